"""Regenerates the JSON fixtures and oracle values used by the CLI tests.

Oracles are computed from covariance algebra on explicit driver exposures,
never from the correlation formulas under test.

    python3 generate.py
"""

import json
import math
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent


def write(name, doc):
    (HERE / name).write_text(json.dumps(doc, indent=2) + "\n")


def rates(table):
    return [{"currency": c, "points": [{"T": 1.0, "r": r}]} for c, r in table.items()]


def snapshot(as_of, spots, vols, rate_table):
    return {
        "as_of": as_of,
        "spots": [{"pair": p, "value": v} for p, v in spots.items()],
        "vols": [{"pair": p, "points": [{"T": t, "sigma": s} for t, s in pts]} for p, pts in vols.items()],
        "rates": rates(rate_table),
    }


class World:
    """Per-currency exposures to independent drivers, piecewise constant
    over (edges[n], edges[n+1]]. Y_{i/j} loads a_j - a_i."""

    def __init__(self, edges, exposures):
        self.edges = [0.0] + list(edges)
        self.exposures = exposures

    def loading(self, n, pair):
        i, j = pair.split("/")
        e = self.exposures[n]
        return np.array(e[j]) - np.array(e[i])

    def cov(self, a, b, t1, t2):
        total = 0.0
        for n in range(len(self.exposures)):
            s, e = max(self.edges[n], t1), min(self.edges[n + 1], t2)
            if e > s:
                total += float(self.loading(n, a) @ self.loading(n, b)) * (e - s)
        return total

    def corr(self, a, b, t1, t2):
        return self.cov(a, b, t1, t2) / math.sqrt(self.cov(a, a, t1, t2) * self.cov(b, b, t1, t2))

    def vol(self, pair, t):
        return math.sqrt(self.cov(pair, pair, 0.0, t) / t)


def all_pairs(ccys):
    return [f"{a}/{b}" for n, a in enumerate(ccys) for b in ccys[n + 1 :]]


def consistent_spots(ccys, values):
    return {f"{a}/{b}": values[b] / values[a] for a, b in (p.split("/") for p in all_pairs(ccys))}


def simple():
    flat = {"EUR": 0.0, "GBP": 0.0, "USD": 0.0}
    spots = {"EUR/GBP": 1.15, "EUR/USD": 0.92, "GBP/USD": 0.8}
    write("equilateral.json", snapshot("equilateral", spots, {p: [(1.0, 0.2)] for p in spots}, flat))

    ccys = ["EUR", "GBP", "JPY", "USD"]
    values = {"EUR": 1.0, "GBP": 1.15, "JPY": 0.0062, "USD": 0.92}
    spots4 = consistent_spots(ccys, values)
    write(
        "four_equal.json",
        snapshot("four_equal", spots4, {p: [(1.0, 0.2)] for p in spots4}, {c: 0.0 for c in ccys}),
    )

    write(
        "gk_oracle.json",
        snapshot("gk_oracle", {"EUR/USD": 1.25}, {"EUR/USD": [(1.0, 0.10)]}, {"EUR": 0.03, "USD": 0.01}),
    )
    write(
        "two_point.json",
        snapshot("two_point", {"EUR/USD": 1.25}, {"EUR/USD": [(1.0, 0.10), (2.0, 0.12)]}, {"EUR": 0.03, "USD": 0.01}),
    )
    write(
        "flat.json",
        snapshot("flat", {"EUR/USD": 1.25}, {"EUR/USD": [(0.5, 0.15), (1.0, 0.15), (2.0, 0.15)]}, {"EUR": 0.0, "USD": 0.0}),
    )
    write(
        "calendar.json",
        snapshot("calendar", {"EUR/USD": 1.25}, {"EUR/USD": [(1.0, 0.20), (2.0, 0.10)]}, {"EUR": 0.0, "USD": 0.0}),
    )
    write(
        "out_of_range.json",
        snapshot(
            "out_of_range",
            spots,
            {"EUR/GBP": [(1.0, 0.1)], "EUR/USD": [(1.0, 0.1)], "GBP/USD": [(1.0, 0.5)]},
            flat,
        ),
    )
    broken = dict(spots)
    broken["GBP/USD"] = 0.84
    write("spot_triangle.json", snapshot("spot_triangle", broken, {}, flat))


def synthetic():
    ccys = ["EUR", "GBP", "JPY", "USD"]
    exposures = [
        {"EUR": [0.02, -0.05, 0.03], "GBP": [0.07, 0.01, -0.04], "JPY": [-0.06, 0.08, 0.02], "USD": [0.0, 0.0, 0.0]},
        {"EUR": [0.05, 0.02, -0.01], "GBP": [-0.03, 0.06, 0.04], "JPY": [0.01, -0.04, 0.09], "USD": [0.02, 0.01, 0.0]},
    ]
    world = World([1.0, 2.0], exposures)
    values = {"EUR": 1.0, "GBP": 1.15, "JPY": 0.0062, "USD": 0.92}
    vols = {p: [(t, world.vol(p, t)) for t in (1.0, 2.0)] for p in all_pairs(ccys)}
    write(
        "synthetic.json",
        snapshot("synthetic", consistent_spots(ccys, values), vols, {"EUR": 0.02, "GBP": 0.035, "JPY": -0.001, "USD": 0.04}),
    )

    queries = [
        ("EUR/USD", "EUR/GBP"),
        ("EUR/GBP", "JPY/USD"),
        ("USD/EUR", "GBP/JPY"),
        ("GBP/EUR", "GBP/USD"),
        ("JPY/EUR", "USD/GBP"),
    ]
    oracle = []
    for a, b in queries:
        oracle.append(
            {
                "pair_a": a,
                "pair_b": b,
                "total": {"1": world.corr(a, b, 0.0, 1.0), "2": world.corr(a, b, 0.0, 2.0)},
                "buckets": [world.corr(a, b, 0.0, 1.0), world.corr(a, b, 1.0, 2.0)],
            }
        )
    write("synthetic_oracle.json", {"correlations": oracle})


def repair(m):
    w, v = np.linalg.eigh(m)
    r = v @ np.diag(np.clip(w, 0.0, None)) @ v.T
    d = np.sqrt(np.diag(r))
    r = r / np.outer(d, d)
    np.fill_diagonal(r, 1.0)
    return r


def matrices():
    ccys = ["EUR", "GBP", "JPY", "USD"]
    pairs = ["USD/EUR", "USD/GBP", "USD/JPY"]
    sig = np.array([0.08, 0.09, 0.11])
    target = np.array([[1.0, 0.9, 0.9], [0.9, 1.0, 0.7], [0.9, 0.7, 1.0]])
    load = np.diag(sig) @ np.linalg.cholesky(target)
    exposures = {"USD": [0.0, 0.0, 0.0], "EUR": list(load[0]), "GBP": list(load[1]), "JPY": list(load[2])}
    world = World([1.0], [exposures])
    values = {"EUR": 1.0, "GBP": 1.15, "JPY": 0.0062, "USD": 0.92}
    spots = consistent_spots(ccys, values)
    vols = {p: [(1.0, world.vol(p, 1.0))] for p in all_pairs(ccys)}
    zero = {c: 0.0 for c in ccys}
    write("matrix_consistent.json", snapshot("matrix_consistent", spots, vols, zero))
    consistent = np.array([[world.corr(a, b, 0.0, 1.0) for b in pairs] for a in pairs])

    # Move corr(USD/GBP, USD/JPY) from 0.7 to 0.6 through the GBP/JPY vol.
    perturbed_vols = dict(vols)
    g, j = sig[1], sig[2]
    perturbed_vols["GBP/JPY"] = [(1.0, math.sqrt(g * g + j * j - 2 * 0.6 * g * j))]
    write("matrix_perturbed.json", snapshot("matrix_perturbed", spots, perturbed_vols, zero))
    perturbed = target.copy()
    perturbed[1, 2] = perturbed[2, 1] = 0.6
    min_eig = float(np.linalg.eigvalsh(perturbed)[0])
    assert min_eig < -1e-6, min_eig
    repaired = repair(perturbed)

    write(
        "matrix_oracle.json",
        {
            "pairs": pairs,
            "consistent": consistent.tolist(),
            "perturbed": perturbed.tolist(),
            "perturbed_min_eigenvalue": min_eig,
            "repaired": repaired.tolist(),
            "repair_distance": float(np.linalg.norm(repaired - perturbed)),
        },
    )


def pricing():
    ccys = ["EUR", "JPY", "USD"]
    values = {"EUR": 1.0, "JPY": 0.0062, "USD": 0.92}
    vols = {
        "EUR/JPY": [(0.5, 0.11), (1.0, 0.12)],
        "EUR/USD": [(0.5, 0.08), (1.0, 0.09)],
        "JPY/USD": [(0.5, 0.10), (1.0, 0.105)],
    }
    write(
        "pricing.json",
        snapshot("pricing", consistent_spots(ccys, values), vols, {"EUR": 0.025, "JPY": -0.001, "USD": 0.045}),
    )
    vanilla = {"type": "vanilla", "pair": "EUR/USD", "strike": 0.93, "kind": "call", "maturity": 1.0}
    write("payoff_vanilla.json", vanilla)
    barrier = {
        "type": "barrier",
        "payoff_pair": "EUR/USD",
        "strike": 0.93,
        "kind": "call",
        "barrier_pair": "EUR/JPY",
        "barrier_level": 0.0068,
        "direction": "up",
        "monitoring": [0.25, 0.5, 0.75, 1.0],
        "maturity": 1.0,
    }
    write("payoff_knock_out.json", dict(barrier, style="knock_out"))
    write("payoff_knock_in.json", dict(barrier, style="knock_in"))
    write(
        "payoff_basket.json",
        {"type": "basket", "weights": {"EUR/USD": 1.0, "EUR/JPY": 150.0}, "strike": 1.85, "kind": "put", "maturity": 1.0},
    )
    write(
        "payoff_mixed_basket.json",
        {"type": "basket", "weights": {"EUR/USD": 1.0, "USD/JPY": 150.0}, "strike": 1.85, "kind": "put", "maturity": 1.0},
    )


if __name__ == "__main__":
    simple()
    synthetic()
    matrices()
    pricing()
