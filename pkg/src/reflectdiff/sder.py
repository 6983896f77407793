"""Reflected SDE on the physical clock and conversions from controlled paths.

``simulate_sder`` runs the same stepping kernel as the controlled simulator
but never advances time during reflection; each reflection block becomes one
direction atom (gamma, dlambda) with gamma the normalized resultant of the
micro-step pushes and dlambda its length. ``controlled_to_sder`` builds the
same object from a controlled path by time change and block merging, and the
two agree bit for bit on a shared noise stream.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernel as K
from .cones import decompose_direction
from .controlled import (CHUNK_FRACTION, PHI_SCALE, SELECT_MODES, _check_numerics,
                         _raise_status, _step_count, map_paths)
from ._validation import as_point, check_positive
from .errors import DegenerateDirection, InputError
from .linalg import nnls
from .geometry import classify, near_boundary_candidates, near_boundary_data
from .timechange import time_change


@dataclass
class SderPath:
    """Samples (t, x, lambda) after every diffusion chunk and reflection block;
    direction atoms (t, gamma, dlambda); and the Euler steps (base state,
    Brownian increment, chunk count) for replay."""

    t: np.ndarray
    x: np.ndarray
    lam: np.ndarray
    complete: np.ndarray
    atom_t: np.ndarray
    atom_gamma: np.ndarray
    atom_dlam: np.ndarray
    step_base: np.ndarray
    step_dW: np.ndarray
    step_chunks: np.ndarray
    dt: float
    delta: float
    seed: int = 0
    path: int = 0
    meta: dict = field(default_factory=dict)
    start: np.ndarray = None

    def __len__(self):
        return self.t.size

    @property
    def dim(self):
        return self.x.shape[1]

    @property
    def x_start(self):
        """Starting point; differs from x[0] when the path starts outside."""
        return self.x[0] if self.start is None else self.start

    def step_samples(self):
        """Times and states at the end of every completed Euler step (plus t = 0)."""
        k = np.flatnonzero(self.complete)
        return self.t[k], self.x[k]

    def brownian_path(self):
        """Cumulative Brownian motion W at the step boundaries, starting at 0."""
        return np.vstack([np.zeros((1, self.step_dW.shape[1])), np.cumsum(self.step_dW, axis=0)])

    def decomposition_residual(self, coeffs):
        """Relative size of x_K - x_0 - sum b dt - sum sigma dW - sum gamma dlambda.

        Uses the state at the start of every step, which is where the scheme
        evaluated the coefficients. Only meaningful when the path ends on a
        step boundary.
        """
        base = self.step_base
        drift = coeffs.drift(base).sum(axis=0) * self.dt if base.size else 0.0
        noise = (np.einsum("kdq,kq->d", coeffs.sigma(base), self.step_dW)
                 if base.size else 0.0)
        push = (self.atom_gamma * self.atom_dlam[:, None]).sum(axis=0)
        r = self.x[-1] - self.x_start - drift - noise - push
        scale = 1.0 + np.abs(self.x).max() + float(np.abs(self.step_dW).sum()) + float(self.lam[-1])
        return float(np.linalg.norm(r) / scale)

    def to_dict(self):
        return {
            "seed": self.seed, "path": self.path, "dt": self.dt, "delta": self.delta,
            "t": self.t.tolist(), "x": self.x.tolist(), "lambda": self.lam.tolist(),
            "atoms": {"t": self.atom_t.tolist(), "gamma": self.atom_gamma.tolist(),
                      "dlambda": self.atom_dlam.tolist()},
            "increments": {"base": self.step_base.tolist(), "dW": self.step_dW.tolist(),
                           "chunks": self.step_chunks.tolist()},
            "meta": self.meta,
        }


def _sder_buffers(cap, d, q):
    return K.Buffers(
        sample=[np.empty(2 * cap), np.empty((2 * cap, d)), np.empty(2 * cap),
                np.empty(2 * cap, np.bool_)],
        atom=[np.empty(cap // 2 + 16), np.empty((cap // 2 + 16, d)), np.empty(cap // 2 + 16)],
        step=[np.empty((cap, d)), np.empty((cap, q)), np.empty(cap, np.int32)],
    )


def simulate_sder(domain, coeffs, x0, T, dt, delta, seed=0, path=0, select_mode="first"):
    """One Euler path of the reflected SDE on [0, T]."""
    _check_numerics(dt, delta)
    check_positive(T, "T")
    if select_mode not in SELECT_MODES:
        raise InputError(f"select_mode must be one of {sorted(SELECT_MODES)}")
    if coeffs.dim != domain.dim:
        raise InputError(f"coefficients are {coeffs.dim}-dimensional, domain is {domain.dim}")
    x0 = as_point(x0, domain.dim, "x0")
    if classify(domain, x0).kind == "outside":
        raise InputError(f"x0={x0.tolist()} is outside the working region")
    d, q = domain.dim, coeffs.noise_dim
    n_steps = _step_count(T, dt)
    cap = min(n_steps, 10**6) + 64
    max_micro = int(math.ceil(10 * domain.working_margin / delta)) + 100
    bufs = _sder_buffers(cap, d, q)
    ws = K.workspace(domain.m, d, q)
    x, dy, res = x0.copy(), np.zeros(d), np.zeros(d)
    fstate, istate = np.zeros(2), np.zeros(K.I_SIZE, dtype=np.int64)
    while True:
        status = K.run_sder(
            domain.compiled, float(dt), float(delta), PHI_SCALE * delta, SELECT_MODES[select_mode],
            coeffs.b0, coeffs.B, coeffs.S0, coeffs.S1, n_steps, int(seed), int(path),
            float(domain.working_margin), CHUNK_FRACTION, max_micro,
            x, dy, res, fstate, istate, *bufs.flat("sample", "atom", "step"), *ws)
        if status != K.CAPACITY:
            break
        bufs.grow_full({"sample": istate[K.I_REC] + 1, "atom": istate[K.I_ATOM] + 1,
                        "step": istate[K.I_STEP] + 1})
    _raise_status(status, f"path {path}")
    samples = bufs.trimmed("sample", istate[K.I_REC])
    atoms = bufs.trimmed("atom", istate[K.I_ATOM])
    steps = bufs.trimmed("step", istate[K.I_STEP])
    return SderPath(*samples, *atoms, *steps, float(dt), float(delta), int(seed), int(path),
                    {"select_mode": select_mode}, x0.copy())


def simulate_sder_paths(domain, coeffs, x0, T, dt, delta, n_paths, seed=0, workers=None, **kw):
    return map_paths(lambda p: simulate_sder(domain, coeffs, x0, T, dt, delta, seed=seed,
                                             path=p, **kw), n_paths, workers)


def merge_block(us, masses):
    """Resultant of one reflection block: (gamma, dlambda) with
    gamma = sum(u mass) / |sum(u mass)| and dlambda = |sum(u mass)|.

    The sums run in the same order as the stepping kernel so the result is
    bitwise reproducible.
    """
    us = np.atleast_2d(np.asarray(us, dtype=float))
    masses = np.atleast_1d(np.asarray(masses, dtype=float))
    res = np.zeros(us.shape[1])
    for u, m in zip(us, masses):
        res += u * m
    nrm = 0.0
    for v in res:
        nrm += v * v
    nrm = math.sqrt(nrm)
    if nrm == 0.0:
        raise DegenerateDirection("reflection block with zero resultant")
    return res / nrm, nrm


def controlled_to_sder(path):
    """SDER form of a reflecting controlled path: time change, then one
    (gamma, dlambda) atom per block of Lambda1 atoms sharing a physical time."""
    if path.meta.get("behavior", "reflect") != "reflect" or np.any(path.atom_face < 0):
        raise InputError("only reflecting paths have an SDER form")
    cp = time_change(path)
    d = path.dim
    levels = cp.atom_level
    bounds = np.flatnonzero(np.concatenate([[True], levels[1:] != levels[:-1], [True]]))
    n_blocks = bounds.size - 1 if levels.size else 0
    atom_t = np.empty(n_blocks)
    gamma = np.empty((n_blocks, d))
    dlam = np.empty(n_blocks)
    block_at_level = {}
    for b in range(n_blocks):
        lo, hi = bounds[b], bounds[b + 1]
        gamma[b], dlam[b] = merge_block(cp.atom_u[lo:hi], cp.atom_mass[lo:hi])
        atom_t[b] = cp.atom_t[lo]
        block_at_level[int(levels[lo])] = b
    lam = np.empty(len(cp))
    acc = 0.0
    for j in range(len(cp)):
        b = block_at_level.get(j)
        if b is not None:
            acc += dlam[b]
        lam[j] = acc
    return SderPath(cp.t.copy(), cp.x.copy(), lam, cp.complete.copy(), atom_t, gamma, dlam,
                    path.step_base.copy(), path.step_dW.copy(), path.step_chunks.copy(),
                    path.dt, path.delta, path.seed, path.path,
                    {"select_mode": path.meta.get("select_mode", "first"), "source": "controlled"},
                    path.y[0].copy())


@dataclass
class PatchworkLocalTimes:
    """Per-face local times on the controlled clock. Atom k adds
    ``increments[k, i]`` to l_i, spread linearly over [s_k, s_k + mass_k]."""

    atom_s: np.ndarray
    atom_mass: np.ndarray
    increments: np.ndarray

    @property
    def m(self):
        return self.increments.shape[1]

    @property
    def terminal(self):
        return self.increments.sum(axis=0)

    def at(self, s):
        """(l_1(s), ..., l_m(s))."""
        if self.atom_s.size == 0:
            return np.zeros(self.m)
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.clip((s - self.atom_s) / self.atom_mass, 0.0, 1.0)
        return frac @ self.increments


def controlled_to_patchwork(path, m=None, domain=None, decompose=False, radius=None):
    """Split Lambda1 into per-face local times.

    Atoms emitted by a single face j contribute their whole mass to l_j. With
    ``decompose=True`` (or for atoms without a face label) the direction is
    decomposed over the reflection cone at the nearest boundary point within
    ``radius`` (default 2 delta), using the minimal-norm nonnegative weights.
    """
    n = path.atom_s.size
    if m is None:
        if domain is not None:
            m = domain.m
        else:
            m = int(path.atom_face.max()) + 1 if n else 1
    inc = np.zeros((n, m))
    radius = 2.0 * path.delta if radius is None else radius
    for k in range(n):
        j = int(path.atom_face[k])
        if j >= 0 and not decompose:
            inc[k, j] = path.atom_mass[k]
            continue
        if domain is None:
            raise InputError("decomposing atoms needs the domain")
        local = near_boundary_data(domain, path.atom_x[k], radius)
        if local is None:
            raise InputError(f"atom {k} is not within {radius} of the boundary")
        eta = decompose_direction(local, path.atom_u[k])
        inc[k, list(local.active)] += path.atom_mass[k] * eta
    return PatchworkLocalTimes(path.atom_s.copy(), path.atom_mass.copy(), inc)


@dataclass
class SderCheck:
    max_excursion: float
    max_cone_residual: float
    max_push_distance: float
    lam_monotone: bool

    def to_dict(self):
        return dict(self.__dict__)


def check_sder_path(domain, sp, radius=None):
    """Distance outside the domain, cone membership of every gamma atom, and
    distance from the boundary where lambda grows.

    A block that moved the path by dlambda started at most dlambda away, so
    each atom is checked against the cones at all boundary points within
    ``radius + dlambda`` of X(t) (``radius`` defaults to 2 delta), keeping the
    best. On curved faces with oblique reflection the residual is O(delta):
    the push shifts X sideways and the field turns with the boundary.
    """
    radius = 2.0 * sp.delta if radius is None else radius
    psi, grad = domain.values_and_gradients(sp.x)
    gn = np.linalg.norm(grad, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(psi < 0, -psi / gn, 0.0)
    excursion = float(np.nan_to_num(depth, nan=np.inf).max()) if psi.size else 0.0
    k = np.searchsorted(sp.t, sp.atom_t, side="left")
    worst_res, worst_dist = 0.0, 0.0
    for a, i in enumerate(k):
        found = near_boundary_candidates(domain, sp.x[i], radius + sp.atom_dlam[a])
        if not found:
            worst_dist = math.inf
            continue
        worst_dist = max(worst_dist, float(np.linalg.norm(found[0].point - sp.x[i])))
        worst_res = max(worst_res, min(nnls(L.reflections.T, sp.atom_gamma[a])[1] for L in found))
    return SderCheck(excursion, worst_res, worst_dist, bool(np.all(np.diff(sp.lam) >= 0)))
