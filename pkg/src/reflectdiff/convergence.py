"""Reruns of one estimate over a ladder of (dt, delta) rungs.

Each rung reuses the same seed, so path p at every rung draws from the same
counter-based stream. The streams are indexed by step, so this only couples
rungs that share dt; across different dt the draws are merely reproducible.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .controlled import map_paths, simulate_controlled
from .errors import InputError
from .resolvent import estimate_vh_constrained, estimate_vh_controlled
from .scenario import load_scenario

METRICS = ("resolvent", "excursion", "clock")


def boundary_excursion(domain, y):
    """Largest first-order distance outside the domain over the rows of y."""
    psi, grad = domain.values_and_gradients(y)
    gn = np.linalg.norm(grad, axis=-1)
    depth = np.where(psi < 0, -psi / np.where(gn > 0, gn, np.inf), 0.0)
    return float(depth.max()) if depth.size else 0.0


@dataclass
class Rung:
    dt: float
    delta: float
    value: float
    stderr: float = 0.0
    error: float = None

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class ConvergenceTable:
    metric: str
    rungs: list
    reference: float = None
    n_paths: int = 0
    seed: int = 0
    scenario_hash: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def tracked(self):
        """The per-rung quantity whose trend is reported: the error against the
        reference when one is given, otherwise the metric itself."""
        return [r.error if r.error is not None else r.value for r in self.rungs]

    @property
    def non_increasing(self):
        v = self.tracked
        return all(b <= a for a, b in zip(v, v[1:]))

    @property
    def slope(self):
        """Least-squares slope of log(tracked) against log(dt); None when the
        rungs share dt or a tracked value is not positive."""
        dts = np.array([r.dt for r in self.rungs])
        v = np.array(self.tracked, dtype=float)
        if np.ptp(dts) == 0 or np.any(v <= 0):
            return None
        return float(np.polyfit(np.log(dts), np.log(v), 1)[0])

    def rows(self):
        return [{"rung": k, **r.to_dict()} for k, r in enumerate(self.rungs)]

    def to_dict(self):
        return {"metric": self.metric, "reference": self.reference, "n_paths": self.n_paths,
                "seed": self.seed, "scenario_hash": self.scenario_hash, "rungs": self.rows(),
                "non_increasing": self.non_increasing, "slope": self.slope, "meta": self.meta}


def _parse_ladder(ladder):
    out = []
    for rung in ladder:
        if isinstance(rung, dict):
            dt, delta = rung.get("dt"), rung.get("delta")
        else:
            dt, delta = rung
        out.append((float(dt), None if delta is None else float(delta)))
    if len(out) < 2:
        raise InputError("a convergence ladder needs at least two rungs")
    return out


def convergence_study(scenario, ladder, metric, n_paths, seed=None, h=None, x0=None,
                      reference=None, estimator="controlled", horizon=None, workers=None):
    """Rerun ``metric`` at every (dt, delta) rung of ``ladder``.

    Metrics: ``resolvent`` (mean of the chosen estimator for ``h``),
    ``excursion`` (largest distance of any controlled record outside the
    domain, over all paths) and ``clock`` (largest clock residual). A rung
    with delta None keeps the scenario's delta, capped at sqrt(dt).
    """
    sc = load_scenario(scenario)
    if metric not in METRICS:
        raise InputError(f"metric must be one of {METRICS}")
    if metric == "resolvent" and h is None:
        raise InputError("the resolvent metric needs a test function h")
    seed = sc.seed("converge") if seed is None else int(seed)
    x0 = sc.x0 if x0 is None else x0
    T = sc.numerics.t_trunc if horizon is None else float(horizon)
    rungs = []
    for dt, delta in _parse_ladder(ladder):
        delta = min(sc.delta, math.sqrt(dt)) if delta is None else delta
        rsc = sc.with_numerics(dt=dt, delta=delta)
        if metric == "resolvent":
            fn = estimate_vh_controlled if estimator == "controlled" else estimate_vh_constrained
            est = fn(rsc, h, x0, n_paths, seed, T, workers)
            err = None if reference is None else abs(est.mean - reference)
            rungs.append(Rung(dt, delta, est.mean, est.stderr, err))
            continue

        def one(p, rsc=rsc):
            path = simulate_controlled(rsc.domain, rsc.coefficients, rsc.behavior, x0, rsc.dt,
                                       delta=rsc.delta, lambda0_target=T, seed=seed, path=p,
                                       select_mode=rsc.numerics.select_mode)
            if metric == "clock":
                return path.clock_residual()
            return boundary_excursion(rsc.domain, path.y)

        rungs.append(Rung(dt, delta, max(map_paths(one, n_paths, workers))))
    return ConvergenceTable(metric, rungs, reference, int(n_paths), seed, sc.hash,
                            {"estimator": estimator if metric == "resolvent" else None,
                             "horizon": T})
