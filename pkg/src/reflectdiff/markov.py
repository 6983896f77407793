"""Statistical restart test of the strong Markov property.

Every path is watched at the end of each Euler step until a stopping rule
fires at time sigma. The state X(sigma) is binned into a spatial cell. For
every path that stopped, a fresh path is started from its own X(sigma) with
an independent noise stream. Within each cell, the laws of X(sigma + t) for
the restarted paths and X(t) for the fresh paths are compared coordinate by
coordinate with two-sample Kolmogorov-Smirnov tests.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import ks_2samp

from ._validation import as_point, check_count, check_positive
from .controlled import map_paths, simulate_controlled
from .errors import InputError, UnderpopulatedBins
from .scenario import load_scenario
from .timechange import time_change

FRESH_SEED_OFFSET = 7919


@dataclass(frozen=True)
class StoppingRule:
    """``hit``: first step end with <normal, x> <= offset (halfspace) or
    |x - center| <= radius (ball), widened by ``tol``; ``fixed``: the step end
    at ``time``. ``horizon`` caps the wait for a hit."""

    kind: str
    normal: tuple = None
    offset: float = 0.0
    center: tuple = None
    radius: float = None
    time: float = None
    tol: float = 0.0
    horizon: float = 5.0

    @classmethod
    def fixed(cls, time):
        check_positive(time, "stopping time")
        return cls("fixed", time=float(time), horizon=float(time))

    @classmethod
    def hit_halfspace(cls, normal, offset=0.0, tol=0.0, horizon=5.0):
        return cls("hit", normal=tuple(map(float, np.atleast_1d(normal))), offset=float(offset),
                   tol=float(tol), horizon=float(horizon))

    @classmethod
    def hit_ball(cls, center, radius, tol=0.0, horizon=5.0):
        check_positive(radius, "radius")
        return cls("hit", center=tuple(map(float, np.atleast_1d(center))), radius=float(radius),
                   tol=float(tol), horizon=float(horizon))

    def distance(self, X):
        """Signed distance to the hit set (<= 0 inside)."""
        X = np.atleast_2d(X)
        if self.normal is not None:
            n = np.asarray(self.normal)
            return (X @ n - self.offset) / np.linalg.norm(n)
        return np.linalg.norm(X - np.asarray(self.center), axis=1) - self.radius

    def validate(self, x0):
        if self.kind == "fixed":
            return
        if self.kind != "hit" or (self.normal is None) == (self.center is None):
            raise InputError("a hit rule needs exactly one of a halfspace or a ball")
        if not self.distance(x0)[0] > self.tol:
            raise InputError("the hit set must be at positive distance from the start point")

    def describe(self):
        if self.kind == "fixed":
            return f"fixed time {self.time}"
        if self.normal is not None:
            return f"first hit of <{list(self.normal)}, x> <= {self.offset} (tol {self.tol})"
        return f"first hit of |x - {list(self.center)}| <= {self.radius} (tol {self.tol})"

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", None)
        if kind == "fixed":
            return cls.fixed(d["time"])
        if kind == "hit":
            if "normal" in d:
                return cls.hit_halfspace(d["normal"], d.get("offset", 0.0), d.get("tol", 0.0),
                                         d.get("horizon", 5.0))
            return cls.hit_ball(d["center"], d["radius"], d.get("tol", 0.0), d.get("horizon", 5.0))
        raise InputError(f"stopping rule kind must be 'hit' or 'fixed', got {kind!r}")


def _step_samples(sc, x0, T, seed, path):
    p = simulate_controlled(sc.domain, sc.coefficients, sc.behavior, x0, sc.dt, delta=sc.delta,
                            lambda0_target=T, seed=seed, path=path,
                            select_mode=sc.numerics.select_mode)
    cp = time_change(p)
    return cp.x[cp.complete]


def _stop_index(rule, xs, dt):
    if rule.kind == "fixed":
        k = int(round(rule.time / dt))
        return k if k < len(xs) else None
    hit = np.flatnonzero(rule.distance(xs) <= rule.tol)
    return int(hit[0]) if hit.size else None


@dataclass
class CellResult:
    cell: tuple
    n: int
    statistics: np.ndarray  # (n_lags, dim)
    pvalues: np.ndarray     # (n_lags, dim)

    def to_dict(self):
        return {"cell": list(self.cell), "n": self.n, "statistics": self.statistics.tolist(),
                "pvalues": self.pvalues.tolist()}


@dataclass
class RestartTestReport:
    rule: str
    lags: tuple
    edges: list
    mode: str
    n_paths: int
    n_stopped: int
    n_simulated: int
    cells: list
    skipped: list = field(default_factory=list)
    alpha: float = 0.01
    scenario_hash: str = ""
    seed: int = 0

    @property
    def min_p(self):
        return min(float(c.pvalues.min()) for c in self.cells)

    @property
    def passes(self):
        """All compared cells at p >= alpha. For the negative control the test
        must detect the difference instead: every cell has some p < alpha."""
        if self.mode == "control":
            return all(float(c.pvalues.min()) < self.alpha for c in self.cells)
        return self.min_p >= self.alpha

    def to_dict(self):
        return {"rule": self.rule, "lags": list(self.lags), "edges": [e.tolist() for e in self.edges],
                "mode": self.mode, "n_paths": self.n_paths, "n_stopped": self.n_stopped,
                "n_simulated": self.n_simulated,
                "cells": [c.to_dict() for c in self.cells],
                "skipped": [{"cell": list(c), "n": n} for c, n in self.skipped],
                "alpha": self.alpha, "min_p": self.min_p, "passes": self.passes,
                "scenario_hash": self.scenario_hash, "seed": self.seed}


def run_restart_test(scenario, rule, lags, n_paths, seed=None, bins=1, x0=None,
                     mode="restart", control_start=None, min_bin=None, alpha=None,
                     workers=None, max_attempts=10):
    """Restart test on ``n_paths`` stopped paths per arm (at most
    ``max_attempts * n_paths`` are simulated). ``mode`` picks the comparison:

    * ``restart``: X(sigma + t) of the stopped paths against fresh paths from
      each path's own X(sigma);
    * ``control``: the same restarted sample against fresh paths from
      ``control_start`` (negative control, expected to fail);
    * ``calibration``: two independent fresh arms against each other.
    """
    sc = load_scenario(scenario)
    if mode not in ("restart", "control", "calibration"):
        raise InputError("mode must be restart, control or calibration")
    if mode == "control" and control_start is None:
        raise InputError("the negative control needs control_start")
    check_count(n_paths, "paths", minimum=2)
    rule = rule if isinstance(rule, StoppingRule) else StoppingRule.from_dict(rule)
    lags = tuple(float(t) for t in np.atleast_1d(lags))
    if any(t <= 0 for t in lags):
        raise InputError("probe lags must be positive")
    x0 = as_point(sc.x0 if x0 is None else x0, sc.domain.dim, "x0")
    rule.validate(x0)
    seed = sc.seed("markov") if seed is None else int(seed)
    min_bin = int(sc.numerics.tolerances["min_bin"] if min_bin is None else min_bin)
    alpha = float(sc.numerics.tolerances["ks_alpha"] if alpha is None else alpha)
    dt = sc.dt
    lag_steps = [int(round(t / dt)) for t in lags]
    max_lag = max(lags)

    def first_arm(p):
        xs = _step_samples(sc, x0, rule.horizon + max_lag, seed, p)
        k = _stop_index(rule, xs, dt)
        if k is None or k + max(lag_steps) >= len(xs):
            return None
        return xs[k], np.array([xs[k + j] for j in lag_steps])

    # draw paths in batches until n_paths have stopped
    runs, tried = [], 0
    while len(runs) < n_paths and tried < max_attempts * n_paths:
        batch = n_paths - len(runs)
        start = tried
        runs += [r for r in map_paths(lambda i: first_arm(start + i), batch, workers)
                 if r is not None]
        tried += batch
    runs = runs[:n_paths]
    if not runs:
        raise UnderpopulatedBins("no path stopped within the horizon")
    entry = np.array([r[0] for r in runs])
    after = np.array([r[1] for r in runs])  # (n, n_lags, d)

    fresh_seed = seed + FRESH_SEED_OFFSET

    def fresh(i, start, s):
        xs = _step_samples(sc, start, max_lag, s, i)
        return np.array([xs[j] for j in lag_steps])

    if mode == "restart":
        other = np.array(map_paths(lambda i: fresh(i, entry[i], fresh_seed), len(runs), workers))
    elif mode == "control":
        start = as_point(control_start, sc.domain.dim, "control_start")
        other = np.array(map_paths(lambda i: fresh(i, start, fresh_seed), len(runs), workers))
    else:
        after = np.array(map_paths(lambda i: fresh(i, entry[i], fresh_seed), len(runs), workers))
        other = np.array(map_paths(lambda i: fresh(i, entry[i], fresh_seed + 1), len(runs),
                                   workers))

    lo, hi = (np.asarray(b, dtype=float) for b in sc.domain.bbox)
    nb = np.broadcast_to(np.atleast_1d(bins), (sc.domain.dim,)).astype(int)
    edges = [np.linspace(lo[k], hi[k], nb[k] + 1) for k in range(sc.domain.dim)]
    idx = np.stack([np.clip(np.searchsorted(edges[k], entry[:, k], side="right") - 1, 0, nb[k] - 1)
                    for k in range(sc.domain.dim)], axis=1)
    cells, skipped = [], []
    for cell in sorted(set(map(tuple, idx.tolist()))):
        members = np.all(idx == cell, axis=1)
        n = int(members.sum())
        if n < min_bin:
            skipped.append((cell, n))
            continue
        stats = np.empty((len(lags), sc.domain.dim))
        pvals = np.empty_like(stats)
        for j in range(len(lags)):
            for k in range(sc.domain.dim):
                res = ks_2samp(after[members, j, k], other[members, j, k])
                stats[j, k], pvals[j, k] = res.statistic, res.pvalue
        cells.append(CellResult(cell, n, stats, pvals))
    if not cells:
        raise UnderpopulatedBins(
            f"no cell has {min_bin} stopped paths: " + ", ".join(f"{c}: {n}" for c, n in skipped))
    return RestartTestReport(rule.describe(), lags, edges, mode, int(n_paths), len(runs), tried, cells,
                             skipped, alpha, sc.hash, seed)
