"""Time change of a controlled path onto the physical clock.

The interior clock lambda0 of a controlled path is piecewise linear in s with
slope 1 on diffusion records and slope 0 on boundary records. Its right
continuous generalized inverse ``tau(t) = inf{s : lambda0(s) > t}`` is kept
exactly as a list of levels: every distinct lambda0 value L carries the
controlled times ``tau(L-)`` and ``tau(L)`` where the flat stretch at level L
starts and ends. X = Y(tau) is constant between levels, so the levels are the
only sample times needed.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRange, ZeroLambda0


@dataclass
class ClockInverse:
    """Exact generalized inverse of lambda0 for one controlled path.

    ``levels[j]`` are the distinct lambda0 values in increasing order,
    ``first[j]``/``last[j]`` the indices of the first and last record at that
    level, and ``tau_lo``/``tau_hi`` the corresponding controlled times.
    """

    levels: np.ndarray
    first: np.ndarray
    last: np.ndarray
    tau_lo: np.ndarray
    tau_hi: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.levels[-1]):
            raise OutOfRange(f"physical time outside [0, {self.levels[-1]}]")
        j = np.searchsorted(self.levels, t, side="right") - 1
        return self.tau_hi[j] + (t - self.levels[j])

    def left_limit(self, t):
        """tau(t-); differs from tau(t) exactly at the levels with a flat stretch."""
        t = np.asarray(t, dtype=float)
        j = np.searchsorted(self.levels, t, side="left")
        at_level = (j < self.levels.size) & (self.levels[np.minimum(j, self.levels.size - 1)] == t)
        jl = np.maximum(j - 1, 0)
        below = self.tau_hi[jl] + (t - self.levels[jl])
        return np.where(at_level, self.tau_lo[np.minimum(j, self.levels.size - 1)], below)

    @property
    def jumps(self):
        """Size of the tau jump at each level (the boundary time spent there)."""
        return self.tau_hi - self.tau_lo

    @property
    def tau0(self):
        return float(self.tau_hi[0])


def invert_clock(path):
    """Generalized inverse of the path's lambda0 clock."""
    l0 = path.lambda0
    if l0.size == 0 or not l0[-1] > 0:
        raise ZeroLambda0("lambda0 never increases on this path, tau is infinite")
    if np.any(np.diff(l0) < 0):
        raise ValueError("lambda0 must be nondecreasing")
    starts = np.flatnonzero(np.concatenate([[True], l0[1:] != l0[:-1]]))
    ends = np.concatenate([starts[1:] - 1, [l0.size - 1]])
    return ClockInverse(l0[starts].copy(), starts, ends, path.s[starts].copy(), path.s[ends].copy())


def lambda0_at(path, s):
    """lambda0 at controlled time s (linear between records)."""
    return np.interp(s, path.s, path.lambda0)


@dataclass
class ConstrainedPath:
    """X = Y(tau) sampled at every level of lambda0, with the pushed-forward
    boundary measure. X(t) = x[k] on [t[k], t[k+1]); ``lam[k]`` is the total
    boundary mass up to and including time t[k]."""

    t: np.ndarray
    x: np.ndarray
    lam: np.ndarray
    complete: np.ndarray
    atom_t: np.ndarray
    atom_x: np.ndarray
    atom_u: np.ndarray
    atom_mass: np.ndarray
    atom_face: np.ndarray
    atom_level: np.ndarray
    clock: ClockInverse
    delta: float
    start: np.ndarray
    source: object = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.size

    @property
    def horizon(self):
        return float(self.t[-1])

    @property
    def tau0(self):
        return self.clock.tau0

    def _index(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.t[-1]):
            raise OutOfRange(f"physical time outside [0, {self.t[-1]}]")
        return np.searchsorted(self.t, t, side="right") - 1

    def left_limits(self):
        """X(t-) at every sample; X(0-) is taken to be the starting point Y(0)."""
        return np.vstack([self.start[None, :], self.x[:-1]])

    def at(self, t):
        """X(t), right continuous."""
        return self.x[self._index(t)]

    def lam_at(self, t):
        return self.lam[self._index(t)]

    def on_grid(self, dt):
        """Samples of X and lambda on the uniform grid 0, dt, 2dt, ... up to the horizon."""
        n = int(np.floor(self.horizon / dt + 1e-9))
        grid = np.minimum(np.arange(n + 1) * dt, self.horizon)
        k = self._index(grid)
        return grid, self.x[k], self.lam[k]

    def discounted_integral(self, h_values, horizon=None):
        """Integral of e^{-t} h(X(t)) dt over [0, horizon] with exact exponential
        weights; ``h_values`` are h at the samples."""
        end = self.horizon if horizon is None else min(horizon, self.horizon)
        tt = np.minimum(np.append(self.t, self.horizon), end)
        w = np.exp(-tt[:-1]) - np.exp(-tt[1:])
        return float(np.dot(w, h_values))

    def to_dict(self):
        return {
            "t": self.t.tolist(), "x": self.x.tolist(), "lambda": self.lam.tolist(),
            "tau0": self.tau0, "entry_point": self.x[0].tolist(),
            "atoms": {"t": self.atom_t.tolist(), "x": self.atom_x.tolist(),
                      "u": self.atom_u.tolist(), "mass": self.atom_mass.tolist(),
                      "face": self.atom_face.tolist()},
            "meta": self.meta,
        }


def atom_levels(path, clock=None):
    """Index into ``clock.levels`` of the level each Lambda1 atom belongs to."""
    clock = invert_clock(path) if clock is None else clock
    rec = np.searchsorted(path.s, path.atom_s, side="right") - 1
    return np.searchsorted(clock.levels, path.lambda0[np.maximum(rec, 0)], side="left")


def time_change(path):
    """Constrained path X = Y(tau) and the boundary measure Lambda on the physical clock."""
    clock = invert_clock(path)
    last = clock.last
    lvl = atom_levels(path, clock)
    return ConstrainedPath(
        t=clock.levels.copy(),
        x=path.y[last].copy(),
        lam=path.lambda1[last].copy(),
        complete=path.complete[last].copy(),
        atom_t=clock.levels[lvl],
        atom_x=path.atom_x.copy(),
        atom_u=path.atom_u.copy(),
        atom_mass=path.atom_mass.copy(),
        atom_face=path.atom_face.copy(),
        atom_level=lvl,
        clock=clock,
        delta=path.delta,
        start=path.y[0].copy(),
        source=path,
        meta=dict(path.meta, seed=path.seed, path=path.path),
    )


@dataclass
class NaturalityReport:
    """``max_distance`` compares each atom with X(t-) at its time, the value the
    boundary term sees; ``max_distance_right`` compares with X(t) after the
    block has been collapsed."""

    max_distance: float
    max_distance_right: float
    max_lambda_jump: float
    n_atoms: int
    delta: float
    worst_atom: int = -1

    def passes(self, factor=2.0):
        return self.max_distance <= factor * self.delta

    def to_dict(self):
        return {"max_distance": self.max_distance,
                "max_distance_right": self.max_distance_right,
                "max_lambda_jump": self.max_lambda_jump, "n_atoms": self.n_atoms,
                "delta": self.delta, "worst_atom": self.worst_atom}


def check_natural(cp, skip_initial=False):
    """Largest distance between an atom's location and the path at the atom's
    time, and the largest jump of lambda at a single time.

    With ``skip_initial`` the atoms collapsed into t = 0 (the march in from an
    exterior start) are left out of the distances.
    """
    if cp.atom_t.size == 0:
        return NaturalityReport(0.0, 0.0, 0.0, 0, cp.delta)
    L = cp.atom_level
    keep = L > 0 if skip_initial else np.ones(L.size, dtype=bool)
    left = np.where(keep, np.linalg.norm(cp.atom_x - cp.left_limits()[L], axis=1), 0.0)
    right = np.where(keep, np.linalg.norm(cp.atom_x - cp.x[L], axis=1), 0.0)
    jumps = np.diff(np.concatenate([[0.0], cp.lam]))
    return NaturalityReport(float(left.max()), float(right.max()), float(jumps.max()),
                            int(L.size), cp.delta, int(np.argmax(left)))
