"""Pointwise checks of the reflection-cone conditions and direction decomposition.

For a boundary point x with active faces I(x), inward normals n^i and unit
reflection directions g^i:

* condition (a): <g^i, n^i> > 0 for every active face;
* condition (b): some unit e in the normal cone N(x) has <g^j, e> > 0 for all j;
* condition (c): for every realizable exterior set I, the zero-sum game
  ``min_{eta in simplex(I)} max_{j in I} <sum_i eta_i n^i, g^j>`` is positive.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import NotInCone
from .geometry import local_boundary_data, sample_boundary

CONDITION_C_TOL = 1e-10
DECOMP_RESIDUAL_TOL = 1e-10
NOT_IN_CONE_TOL = 1e-8


@dataclass
class ConditionB:
    holds: bool
    witness: np.ndarray  # unit vector in N(x), or None
    margin: float        # max over unit e in N(x) of min_j <g^j, e>


@dataclass
class ConditionC:
    holds: bool
    beta_x: float
    worst_subset: tuple
    worst_weights: np.ndarray
    game_values: dict = field(default_factory=dict)


@dataclass
class ConeReport:
    point: np.ndarray
    active: tuple
    condition_a: bool
    condition_b: ConditionB
    condition_c: ConditionC

    @property
    def holds(self):
        return self.condition_a and self.condition_b.holds and self.condition_c.holds

    def to_dict(self):
        b, c = self.condition_b, self.condition_c
        return {
            "point": self.point.tolist(),
            "active": list(self.active),
            "condition_a": self.condition_a,
            "condition_b": {
                "holds": b.holds,
                "witness": None if b.witness is None else b.witness.tolist(),
                "margin": b.margin,
            },
            "condition_c": {
                "holds": c.holds,
                "beta_x": c.beta_x,
                "worst_subset": list(c.worst_subset),
                "worst_weights": c.worst_weights.tolist(),
                "game_values": {",".join(map(str, k)): v for k, v in c.game_values.items()},
            },
            "holds": self.holds,
        }


def check_condition_a(local):
    dots = np.einsum("kd,kd->k", local.normals, local.reflections)
    return bool(np.all(dots > 0))


def check_condition_b(local):
    """Best common test direction in the normal cone.

    The sign of the verdict comes from an exact maximin LP over the simplex
    of normal weights. The margin ``max_{e in N, |e| <= 1} min_j <g^j, e>`` is
    computed as the reciprocal of the least-distance point of
    ``{e in N : <g^j, e> >= 1 for all j}``.
    """
    Nmat = local.normals.T
    G = local.reflections
    lp_value, _ = linalg.maximin_value(local.normals @ G.T)
    if lp_value <= CONDITION_C_TOL:
        return ConditionB(False, None, float(lp_value))
    H = linalg.cone_halfspaces(Nmat)
    C = np.vstack([H, G]) if H.size else G
    h = np.concatenate([np.zeros(H.shape[0]), np.ones(G.shape[0])])
    e = linalg.ldp(C, h)
    if e is None or not np.all(np.isfinite(e)):
        return ConditionB(False, None, float(lp_value))
    e = e / np.linalg.norm(e)
    margin = float(np.min(G @ e))
    return ConditionB(margin > 0, e, margin)


def check_condition_c(local):
    """Game values over every realizable exterior index set; beta_x is their minimum."""
    values = {}
    worst = None
    for I in local.script_i:
        rows = [local.local_index(i) for i in I]
        M = local.normals[rows] @ local.reflections[rows].T
        v, eta = linalg.game_value(M)
        values[tuple(I)] = v
        if worst is None or v < worst[0]:
            worst = (v, tuple(I), eta)
    beta, subset, eta = worst
    return ConditionC(beta > CONDITION_C_TOL, float(beta), subset, eta, values)


def cone_report(domain, x):
    local = local_boundary_data(domain, x)
    return ConeReport(local.point, local.active, check_condition_a(local),
                      check_condition_b(local), check_condition_c(local))


def decompose_direction(local, u):
    """Nonnegative weights ``eta`` (one per face of the domain if ``m`` is
    given via ``local.active``) with ``sum_i eta_i g^i = u``.

    Among all solutions the one of least Euclidean norm is returned. Weights
    are not normalized to sum to one. Returns a dict ``{face: weight}``-style
    array aligned with ``local.active``.
    """
    u = np.asarray(u, dtype=float)
    G = local.reflections.T
    eta, res = linalg.nnls(G, u)
    if res > NOT_IN_CONE_TOL:
        raise NotInCone(f"direction {u} is not in the reflection cone (residual {res:.3g})")
    if np.linalg.matrix_rank(G) < G.shape[1]:
        alt = linalg.min_norm_nonneg_solution(G, u)
        if alt is not None:
            eta = np.clip(alt, 0.0, None)
    # pseudo-inverse refinement on the support
    for _ in range(3):
        r = u - G @ eta
        if np.linalg.norm(r) <= 1e-15:
            break
        S = eta > 0
        if not np.any(S):
            break
        step = np.linalg.pinv(G[:, S]) @ r
        cand = eta.copy()
        cand[S] += step
        if np.all(cand >= 0) and np.linalg.norm(u - G @ cand) < np.linalg.norm(r):
            eta = cand
        else:
            break
    if np.linalg.norm(u - G @ eta) > DECOMP_RESIDUAL_TOL:
        raise NotInCone(f"could not reconstruct {u} to {DECOMP_RESIDUAL_TOL}")
    return eta


def expand_weights(local, eta, m):
    """Scatter local weights to a length-``m`` vector indexed by face."""
    out = np.zeros(m)
    out[list(local.active)] = eta
    return out


@dataclass
class SweepSummary:
    n_points: int
    n_failed: int
    min_margin: float
    min_beta: float

    @property
    def all_hold(self):
        return self.n_failed == 0


def boundary_sweep(domain, n_samples, seed=0, bbox=None, workers=1):
    """Cone reports at sampled boundary points plus global minima."""
    pts, _ = sample_boundary(domain, n_samples, seed=seed, bbox=bbox)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            reports = list(ex.map(lambda p: cone_report(domain, p), pts))
    else:
        reports = [cone_report(domain, p) for p in pts]
    summary = SweepSummary(
        n_points=len(reports),
        n_failed=sum(not r.holds for r in reports),
        min_margin=float(min(r.condition_b.margin for r in reports)),
        min_beta=float(min(r.condition_c.beta_x for r in reports)),
    )
    return reports, summary
