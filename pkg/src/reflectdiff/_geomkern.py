"""Numba kernels for level-set faces and reflection fields.

A domain is compiled to flat arrays (``CompiledDomain``) so the same code
serves single-point Python queries and the path simulators.
"""

import math
from collections import namedtuple

import numba
import numpy as np

CompiledDomain = namedtuple(
    "CompiledDomain",
    "fkind fvec fpar exps coefs nterms split rkind rconst rcos rsin rexps rcoefs rnterms",
)

# Helpers that never allocate are compiled without the reference-counting
# runtime: passing arrays into NRT-managed calls costs ~100 ns per call here,
# which dominated the per-event cost of the path loops.
hot = numba.njit(cache=True, nogil=True, _nrt=False)

FACE_POLYNOMIAL = 0
FACE_HALFSPACE = 1
FACE_BALL = 2

REFL_CONSTANT = 0
REFL_ROTATED_NORMAL = 1
REFL_POLYNOMIAL = 2


@hot
def poly_value_grad(exps, coefs, n, x, grad):
    d = x.shape[0]
    for k in range(d):
        grad[k] = 0.0
    val = 0.0
    for t in range(n):
        c = coefs[t]
        term = c
        for k in range(d):
            e = exps[t, k]
            if e != 0:
                term *= x[k] ** e
        val += term
        for k in range(d):
            e = exps[t, k]
            if e == 0:
                continue
            g = c * e * x[k] ** (e - 1)
            for l in range(d):
                if l != k and exps[t, l] != 0:
                    g *= x[l] ** exps[t, l]
            grad[k] += g
    return val


@hot
def poly_value(exps, coefs, n, x):
    d = x.shape[0]
    val = 0.0
    for t in range(n):
        term = coefs[t]
        for k in range(d):
            e = exps[t, k]
            if e != 0:
                term *= x[k] ** e
        val += term
    return val


@hot
def face_value_grad(cd, i, x, grad):
    kind = cd.fkind[i]
    d = x.shape[0]
    if kind == FACE_HALFSPACE:
        val = -cd.fpar[i, 0]
        for k in range(d):
            grad[k] = cd.fvec[i, k]
            val += cd.fvec[i, k] * x[k]
        return val
    if kind == FACE_BALL:
        # sign * (r^2 - |x - c|^2)
        sign = cd.fpar[i, 1]
        val = cd.fpar[i, 0]
        for k in range(d):
            dx = x[k] - cd.fvec[i, k]
            val -= dx * dx
            grad[k] = -2.0 * sign * dx
        return sign * val
    piece = 0
    ax = cd.split[i]
    if ax >= 0 and x[ax] < 0.0:
        piece = 1
    return poly_value_grad(cd.exps[i, piece], cd.coefs[i, piece], cd.nterms[i, piece], x, grad)


@hot
def reflection_dir(cd, i, x, gpsi, out):
    """Unit reflection direction of face ``i`` at ``x``; ``gpsi`` is grad psi_i(x)."""
    d = x.shape[0]
    kind = cd.rkind[i]
    if kind == REFL_CONSTANT:
        for k in range(d):
            out[k] = cd.rconst[i, k]
    elif kind == REFL_ROTATED_NORMAL:
        nrm = 0.0
        for k in range(d):
            nrm += gpsi[k] * gpsi[k]
        nrm = math.sqrt(nrm)
        if nrm == 0.0:
            for k in range(d):
                out[k] = math.nan
            return
        if d == 2:
            c = cd.rcos[i]
            s = cd.rsin[i]
            n0 = gpsi[0] / nrm
            n1 = gpsi[1] / nrm
            out[0] = c * n0 + s * n1
            out[1] = -s * n0 + c * n1
        else:
            for k in range(d):
                out[k] = gpsi[k] / nrm
    else:
        for k in range(d):
            out[k] = poly_value(cd.rexps[i, k], cd.rcoefs[i, k], cd.rnterms[i, k], x)
    nrm = 0.0
    for k in range(d):
        nrm += out[k] * out[k]
    nrm = math.sqrt(nrm)
    if nrm == 0.0:
        for k in range(d):
            out[k] = math.nan
        return
    for k in range(d):
        out[k] = out[k] / nrm


@hot
def eval_all(cd, x, psi, grad):
    m = psi.shape[0]
    for i in range(m):
        psi[i] = face_value_grad(cd, i, x, grad[i])


@numba.njit(cache=True)
def eval_points(cd, X):
    n, d = X.shape
    m = cd.split.shape[0]
    psi = np.empty((n, m))
    grad = np.empty((n, m, d))
    for p in range(n):
        eval_all(cd, X[p], psi[p], grad[p])
    return psi, grad


@numba.njit(cache=True)
def values_points(cd, X):
    n, d = X.shape
    m = cd.split.shape[0]
    psi = np.empty((n, m))
    grad = np.empty(d)
    for p in range(n):
        for i in range(m):
            psi[p, i] = face_value_grad(cd, i, X[p], grad)
    return psi


@numba.njit(cache=True)
def reflections_points(cd, X):
    n, d = X.shape
    m = cd.split.shape[0]
    out = np.empty((n, m, d))
    grad = np.empty(d)
    for p in range(n):
        for i in range(m):
            face_value_grad(cd, i, X[p], grad)
            reflection_dir(cd, i, X[p], grad, out[p, i])
    return out


@hot
def smoothstep_slope(r):
    # derivative of the quintic smoothstep 6r^5 - 15r^4 + 10r^3
    if r <= 0.0 or r >= 1.0:
        return 0.0
    return 30.0 * r * r * (1.0 - r) * (1.0 - r)


@hot
def select_face(cd, x, psi, grad, eps_phi, mode, gbuf, dphi):
    """Face index for the next reflection micro-step, or -1 if none is violated.

    mode 0: lowest index j with psi_j <= 0 and <grad phi, g^j> <= 0.
    mode 1: steepest descent of phi among violated faces.
    """
    m = psi.shape[0]
    d = x.shape[0]
    for k in range(d):
        dphi[k] = 0.0
    any_violated = False
    for i in range(m):
        if psi[i] <= 0.0:
            any_violated = True
            w = smoothstep_slope(-psi[i] / eps_phi) / eps_phi
            for k in range(d):
                dphi[k] -= w * grad[i, k]
    if not any_violated:
        return -1
    gn = 0.0
    for k in range(d):
        gn += dphi[k] * dphi[k]
    if gn == 0.0:
        best = -1
        for i in range(m):
            if psi[i] <= 0.0 and (best < 0 or psi[i] < psi[best]):
                best = i
        return best
    best = -1
    best_dot = 0.0
    for j in range(m):
        if psi[j] > 0.0:
            continue
        reflection_dir(cd, j, x, grad[j], gbuf)
        dot = 0.0
        for k in range(d):
            dot += dphi[k] * gbuf[k]
        if mode == 0 and dot <= 0.0:
            return j
        if best < 0 or dot < best_dot:
            best = j
            best_dot = dot
    return best


@numba.njit(cache=True)
def select_face_points(cd, X, eps_phi, mode):
    n, d = X.shape
    m = cd.split.shape[0]
    out = np.empty(n, dtype=np.int64)
    psi = np.empty(m)
    grad = np.empty((m, d))
    gbuf = np.empty(d)
    dphi = np.empty(d)
    for p in range(n):
        eval_all(cd, X[p], psi, grad)
        out[p] = select_face(cd, X[p], psi, grad, eps_phi, mode, gbuf, dphi)
    return out
