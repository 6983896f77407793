"""Per-path simulation loops.

Two loops share the same arithmetic helpers: ``run_controlled`` advances the
controlled clock s = lambda0 + lambda1 and records every event, ``run_sder``
advances physical time only and folds each reflection block into a single
direction atom. Because every floating point update goes through the same
helpers in the same order, the sder loop reproduces the time-changed
controlled path bit for bit.

Diffusion steps are split into equal linear chunks when the Euler endpoint
leaves the closed domain (chunk length <= chunk_frac * delta) or when the
increment is long compared with the working margin. The reflection loop runs
after every chunk.

The loops never allocate. All loop state lives in the caller's arrays; when an
output buffer is full the loop returns CAPACITY before mutating anything, the
caller grows the buffers and calls again, and the path continues exactly where
it stopped.
"""

import math

import numpy as np

from ._geomkern import eval_all, hot, reflection_dir, select_face
from .rng import STREAM_DIFFUSION, STREAM_NONLOCAL, fill_normals, uniform_pair

OK = 0
CAPACITY = 1
ESCAPED = 2
NONFINITE = 3
DEGENERATE = 4

KIND_INIT = 0
KIND_DIFFUSION = 1
KIND_REFLECTION = 2
KIND_NONLOCAL = 3

BEHAVIOR_REFLECT = 0
BEHAVIOR_NONLOCAL = 1

# istate slots
I_REC = 0
I_ATOM = 1
I_STEP = 2
I_LEFT = 3
I_CHUNKS = 4
I_JUMPS = 5
I_MICRO = 6
I_SIZE = 7


@hot
def _violated(cd, y, psi, grad):
    eval_all(cd, y, psi, grad)
    for i in range(psi.shape[0]):
        if not psi[i] >= 0.0:
            return True
    return False


@hot
def _depth(psi, grad):
    worst = 0.0
    for i in range(psi.shape[0]):
        if psi[i] < 0.0:
            gn = 0.0
            for k in range(grad.shape[1]):
                gn += grad[i, k] * grad[i, k]
            if gn == 0.0:
                return math.inf
            dep = -psi[i] / math.sqrt(gn)
            if dep > worst:
                worst = dep
    return worst


@hot
def _finite(y):
    for k in range(y.shape[0]):
        if not math.isfinite(y[k]):
            return False
    return True


@hot
def _increment(y, dt, xi, b0, B, S0, S1, dW, dy):
    """Euler increment dy = b(y) dt + sigma(y) dW with dW = sqrt(dt) xi."""
    d = y.shape[0]
    q = xi.shape[0]
    sq = math.sqrt(dt)
    for r in range(q):
        dW[r] = sq * xi[r]
    for k in range(d):
        drift = b0[k]
        for l in range(d):
            drift += B[k, l] * y[l]
        noise = 0.0
        for r in range(q):
            sig = S0[k, r]
            for l in range(d):
                sig += S1[l, k, r] * y[l]
            noise += sig * dW[r]
        dy[k] = drift * dt + noise


@hot
def _plan_chunks(cd, y, dy, margin, chunk_len, ybuf, psi, grad):
    d = y.shape[0]
    length = 0.0
    for k in range(d):
        length += dy[k] * dy[k]
        ybuf[k] = y[k] + dy[k]
    length = math.sqrt(length)
    n = 1
    if length > 0.5 * margin:
        n = int(math.ceil(length / (0.5 * margin)))
    if _violated(cd, ybuf, psi, grad) and length > chunk_len:
        n2 = int(math.ceil(length / chunk_len))
        if n2 > n:
            n = n2
    return n


@hot
def _put_row(dst, i, src):
    for k in range(src.shape[0]):
        dst[i, k] = src[k]


@hot
def _apply_chunk(y, dy, n):
    for k in range(y.shape[0]):
        y[k] += dy[k] / n


@hot
def _apply_push(y, g, delta):
    for k in range(y.shape[0]):
        y[k] += delta * g[k]


@hot
def _start_step(cd, y, dt, b0, B, S0, S1, seed, path, step, margin, chunk_len,
                xi, dW, dy, ybuf, psi, grad):
    fill_normals(np.uint64(seed), np.uint64(path), np.uint64(STREAM_DIFFUSION), np.uint64(step), xi)
    _increment(y, dt, xi, b0, B, S0, S1, dW, dy)
    return _plan_chunks(cd, y, dy, margin, chunk_len, ybuf, psi, grad)


@hot
def run_controlled(cd, dt, delta, eps_phi, select_mode, behavior, targets,
                   b0, B, S0, S1, n_steps, s_budget, seed, path, margin,
                   chunk_frac, max_micro, y, dy, fstate, istate,
                   rec_s, rec_y, rec_l0, rec_l1, rec_kind, rec_face, rec_complete,
                   at_s, at_x, at_u, at_mass, at_face, st_base, st_dW, st_n,
                   psi, grad, gbuf, dphi, ybuf, xi, dW):
    """Slow-clock loop; ``y``/``dy`` are the current state and pending increment,
    ``fstate = (s, lambda0, lambda1)``. Returns a status code."""
    s = fstate[0]
    l0 = fstate[1]
    l1 = fstate[2]
    nr = istate[I_REC]
    na = istate[I_ATOM]
    step = istate[I_STEP]
    chunks_left = istate[I_LEFT]
    n_chunks = istate[I_CHUNKS]
    jumps = istate[I_JUMPS]
    micro = istate[I_MICRO]
    chunk_len = chunk_frac * delta
    cap_r = rec_s.shape[0]
    cap_a = at_s.shape[0]
    cap_s = st_n.shape[0]
    status = OK

    if nr == 0:
        rec_s[0] = 0.0
        _put_row(rec_y, 0, y)
        rec_l0[0] = 0.0
        rec_l1[0] = 0.0
        rec_kind[0] = KIND_INIT
        rec_face[0] = -1
        rec_complete[0] = False
        nr = 1

    while True:
        stop = False
        while _violated(cd, y, psi, grad):
            if s >= s_budget:
                stop = True
                break
            if _depth(psi, grad) > margin or micro >= max_micro:
                status = ESCAPED
                stop = True
                break
            if nr >= cap_r or na >= cap_a:
                status = CAPACITY
                stop = True
                break
            micro += 1
            at_s[na] = s
            _put_row(at_x, na, y)
            if behavior == BEHAVIOR_REFLECT:
                j = select_face(cd, y, psi, grad, eps_phi, select_mode, gbuf, dphi)
                reflection_dir(cd, j, y, grad[j], gbuf)
                if not _finite(gbuf):
                    status = NONFINITE
                    stop = True
                    break
                _put_row(at_u, na, gbuf)
                at_mass[na] = delta
                at_face[na] = j
                _apply_push(y, gbuf, delta)
                s += delta
                l1 += delta
                rec_kind[nr] = KIND_REFLECTION
                rec_face[nr] = j
            else:
                u1, u2 = uniform_pair(np.uint64(seed), np.uint64(path),
                                      np.uint64(STREAM_NONLOCAL), np.uint64(jumps))
                jumps += 1
                hold = -math.log(1.0 - u1)
                t = min(int(u2 * targets.shape[0]), targets.shape[0] - 1)
                for k in range(y.shape[0]):
                    y[k] = targets[t, k]
                _put_row(at_u, na, y)
                at_mass[na] = hold
                at_face[na] = -1
                s += hold
                l1 += hold
                rec_kind[nr] = KIND_NONLOCAL
                rec_face[nr] = t
            na += 1
            rec_s[nr] = s
            _put_row(rec_y, nr, y)
            rec_l0[nr] = l0
            rec_l1[nr] = l1
            rec_complete[nr] = False
            nr += 1
            if not _finite(y):
                status = NONFINITE
                stop = True
                break
        if stop:
            break
        micro = 0
        if chunks_left == 0:
            rec_complete[nr - 1] = True
            if step >= n_steps or s >= s_budget:
                break
            if step >= cap_s:
                status = CAPACITY
                break
            _put_row(st_base, step, y)
            n_chunks = _start_step(cd, y, dt, b0, B, S0, S1, seed, path, step, margin,
                                   chunk_len, xi, dW, dy, ybuf, psi, grad)
            _put_row(st_dW, step, dW)
            st_n[step] = n_chunks
            chunks_left = n_chunks
            step += 1
        elif s >= s_budget:
            break
        if nr >= cap_r:
            status = CAPACITY
            break
        h = dt / n_chunks
        _apply_chunk(y, dy, n_chunks)
        s += h
        l0 += h
        chunks_left -= 1
        rec_s[nr] = s
        _put_row(rec_y, nr, y)
        rec_l0[nr] = l0
        rec_l1[nr] = l1
        rec_kind[nr] = KIND_DIFFUSION
        rec_face[nr] = -1
        rec_complete[nr] = False
        nr += 1
        if not _finite(y):
            status = NONFINITE
            break

    fstate[0] = s
    fstate[1] = l0
    fstate[2] = l1
    istate[I_REC] = nr
    istate[I_ATOM] = na
    istate[I_STEP] = step
    istate[I_LEFT] = chunks_left
    istate[I_CHUNKS] = n_chunks
    istate[I_JUMPS] = jumps
    istate[I_MICRO] = micro
    return status


@hot
def run_sder(cd, dt, delta, eps_phi, select_mode, b0, B, S0, S1, n_steps,
             seed, path, margin, chunk_frac, max_micro, x, dy, res, fstate, istate,
             sm_t, sm_x, sm_lam, sm_complete, at_t, at_gamma, at_dlam,
             st_base, st_dW, st_n, psi, grad, gbuf, dphi, ybuf, xi, dW):
    """Physical-clock loop; ``res`` is the running resultant of the current
    reflection block, ``fstate = (t, lambda)``. Returns a status code."""
    d = x.shape[0]
    t = fstate[0]
    lam = fstate[1]
    ns = istate[I_REC]
    na = istate[I_ATOM]
    step = istate[I_STEP]
    chunks_left = istate[I_LEFT]
    n_chunks = istate[I_CHUNKS]
    micro = istate[I_MICRO]
    chunk_len = chunk_frac * delta
    cap_r = sm_t.shape[0]
    cap_a = at_t.shape[0]
    cap_s = st_n.shape[0]
    status = OK

    while True:
        stop = False
        while _violated(cd, x, psi, grad):
            if _depth(psi, grad) > margin or micro >= max_micro:
                status = ESCAPED
                stop = True
                break
            micro += 1
            j = select_face(cd, x, psi, grad, eps_phi, select_mode, gbuf, dphi)
            reflection_dir(cd, j, x, grad[j], gbuf)
            if not _finite(gbuf):
                status = NONFINITE
                stop = True
                break
            for k in range(d):
                res[k] += gbuf[k] * delta
            _apply_push(x, gbuf, delta)
            if not _finite(x):
                status = NONFINITE
                stop = True
                break
        if stop:
            break
        if ns >= cap_r or (micro > 0 and na >= cap_a) or (chunks_left == 0 and step >= cap_s):
            status = CAPACITY
            break
        if micro > 0:
            nrm = 0.0
            for k in range(d):
                nrm += res[k] * res[k]
            nrm = math.sqrt(nrm)
            if nrm == 0.0:
                status = DEGENERATE
                break
            at_t[na] = t
            for k in range(d):
                at_gamma[na, k] = res[k] / nrm
            at_dlam[na] = nrm
            lam += nrm
            na += 1
            micro = 0
            for k in range(d):
                res[k] = 0.0
        sm_t[ns] = t
        _put_row(sm_x, ns, x)
        sm_lam[ns] = lam
        sm_complete[ns] = chunks_left == 0
        ns += 1
        if chunks_left == 0:
            if step >= n_steps:
                break
            _put_row(st_base, step, x)
            n_chunks = _start_step(cd, x, dt, b0, B, S0, S1, seed, path, step, margin,
                                   chunk_len, xi, dW, dy, ybuf, psi, grad)
            _put_row(st_dW, step, dW)
            st_n[step] = n_chunks
            chunks_left = n_chunks
            step += 1
        h = dt / n_chunks
        _apply_chunk(x, dy, n_chunks)
        t += h
        chunks_left -= 1
        if not _finite(x):
            status = NONFINITE
            break

    fstate[0] = t
    fstate[1] = lam
    istate[I_REC] = ns
    istate[I_ATOM] = na
    istate[I_STEP] = step
    istate[I_LEFT] = chunks_left
    istate[I_CHUNKS] = n_chunks
    istate[I_MICRO] = micro
    return status


class Buffers:
    """Growable output arrays, in named groups that always grow together."""

    def __init__(self, **groups):
        self.groups = groups

    def grow(self, name):
        grown = []
        for a in self.groups[name]:
            out = np.empty((2 * a.shape[0],) + a.shape[1:], dtype=a.dtype)
            out[:a.shape[0]] = a
            grown.append(out)
        self.groups[name] = grown

    def grow_full(self, used):
        """Grow every group whose fill count in ``used`` reached its capacity."""
        for name, n in used.items():
            if n >= self.groups[name][0].shape[0]:
                self.grow(name)

    def trimmed(self, name, used):
        return [a[:used].copy() for a in self.groups[name]]

    def flat(self, *names):
        return [a for name in names for a in self.groups[name]]


def workspace(m, d, q):
    """Scratch arrays: psi, grad, gbuf, dphi, ybuf, xi, dW."""
    return (np.empty(m), np.empty((m, d)), np.empty(d), np.empty(d), np.empty(d),
            np.empty(q), np.empty(q))
