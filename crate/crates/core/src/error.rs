use thiserror::Error;

/// Which side of the no-arbitrage band a vanilla price fell on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandViolation {
    BelowIntrinsic,
    AboveCap,
}

impl std::fmt::Display for BandViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BandViolation::BelowIntrinsic => f.write_str("below intrinsic"),
            BandViolation::AboveCap => f.write_str("above cap"),
        }
    }
}

/// Coarse error classes. The numeric value is the CLI exit status and the
/// FFI status code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Other = 1,
    NoImpliedVol = 2,
    MissingData = 3,
    CorrelationOutOfRange = 4,
    CalendarArbitrage = 5,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no implied vol: {violation} (price {price}, band [{lower}, {upper}])")]
    NoImpliedVol {
        violation: BandViolation,
        price: f64,
        lower: f64,
        upper: f64,
    },

    #[error("implied vol solver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error(
        "calendar arbitrage{}: total variance {earlier} at T={t1} exceeds {later} at T={t2}",
        bucket.map(|b| format!(" in bucket {b}")).unwrap_or_default()
    )]
    CalendarArbitrage {
        bucket: Option<usize>,
        t1: f64,
        t2: f64,
        earlier: f64,
        later: f64,
    },

    #[error("missing vol quote for {pair} at horizon {horizon}")]
    MissingVol { pair: String, horizon: String },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("implied correlation {value} outside [-1, 1]{}: {inputs}", bucket.map(|b| format!(" in bucket {b}")).unwrap_or_default())]
    CorrelationOutOfRange {
        value: f64,
        bucket: Option<usize>,
        inputs: String,
    },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("cannot factorize correlation matrix of bucket {bucket}: minimum eigenvalue {min_eigenvalue}")]
    Factorization { bucket: usize, min_eigenvalue: f64 },

    #[error("currency mismatch: {0}")]
    CurrencyMismatch(String),

    #[error("{entry}: {source}")]
    Entry {
        entry: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NoImpliedVol { .. } => ErrorClass::NoImpliedVol,
            Error::MissingVol { .. } | Error::MissingData(_) => ErrorClass::MissingData,
            Error::CorrelationOutOfRange { .. } => ErrorClass::CorrelationOutOfRange,
            Error::CalendarArbitrage { .. } => ErrorClass::CalendarArbitrage,
            Error::Entry { source, .. } => source.class(),
            _ => ErrorClass::Other,
        }
    }

    /// Attach a bucket index to errors that carry one.
    pub fn in_bucket(self, index: usize) -> Self {
        match self {
            Error::CalendarArbitrage { t1, t2, earlier, later, .. } => Error::CalendarArbitrage {
                bucket: Some(index),
                t1,
                t2,
                earlier,
                later,
            },
            Error::CorrelationOutOfRange { value, inputs, .. } => Error::CorrelationOutOfRange {
                value,
                bucket: Some(index),
                inputs,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
