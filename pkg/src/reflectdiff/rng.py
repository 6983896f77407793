"""Counter-based Gaussian streams (Philox4x32-10 + Box-Muller).

Every draw is a pure function of ``(seed, path, stream, counter)``, so a path
reproduces bit-for-bit no matter which worker simulates it or in what order.
"""

import math

import numba
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)

# stream identifiers (third counter word)
STREAM_DIFFUSION = 0
STREAM_NONLOCAL = 1
STREAM_AUX = 2


@numba.njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox4x32 block; all arguments are 32-bit words."""
    c0 = np.uint64(c0) & _MASK
    c1 = np.uint64(c1) & _MASK
    c2 = np.uint64(c2) & _MASK
    c3 = np.uint64(c3) & _MASK
    k0 = np.uint64(k0) & _MASK
    k1 = np.uint64(k1) & _MASK
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@numba.njit(cache=True, nogil=True)
def _to_unit(a, b):
    # 53-bit uniform in [0, 1)
    return (float(a >> np.uint64(5)) * 67108864.0 + float(b >> np.uint64(6))) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True, nogil=True)
def uniform_pair(seed, path, stream, counter):
    """Two independent U[0,1) variates for one counter value."""
    seed = np.uint64(seed)
    r0, r1, r2, r3 = philox4x32(counter, counter >> 32, stream, seed >> _S32, seed, path)
    return _to_unit(r0, r1), _to_unit(r2, r3)


@numba.njit(cache=True, nogil=True)
def normal_pair(seed, path, stream, counter):
    u1, u2 = uniform_pair(seed, path, stream, counter)
    rad = math.sqrt(-2.0 * math.log(1.0 - u1))
    ang = 2.0 * math.pi * u2
    return rad * math.cos(ang), rad * math.sin(ang)


@numba.njit(cache=True, nogil=True, _nrt=False)
def fill_normals(seed, path, stream, step, out):
    """Write ``len(out)`` standard normals for one step into ``out``."""
    n = out.shape[0]
    base = np.uint64(step) * np.uint64((n + 1) // 2)
    for j in range((n + 1) // 2):
        z0, z1 = normal_pair(seed, path, stream, base + np.uint64(j))
        out[2 * j] = z0
        if 2 * j + 1 < n:
            out[2 * j + 1] = z1


@numba.njit(cache=True)
def _normals_block(seed, path, stream, first_step, n_steps, dim):
    out = np.empty((n_steps, dim))
    for k in range(n_steps):
        fill_normals(seed, path, stream, first_step + k, out[k])
    return out


def normals(seed, path, n_steps, dim, stream=STREAM_DIFFUSION, first_step=0):
    """Standard normals for steps ``first_step .. first_step + n_steps - 1``."""
    return _normals_block(np.uint64(seed), np.uint64(path), np.uint64(stream),
                          np.uint64(first_step), int(n_steps), int(dim))


@numba.njit(cache=True)
def _uniforms_block(seed, path, stream, n):
    out = np.empty(n)
    for j in range((n + 1) // 2):
        a, b = uniform_pair(seed, path, stream, np.uint64(j))
        out[2 * j] = a
        if 2 * j + 1 < n:
            out[2 * j + 1] = b
    return out


def uniforms(seed, path, n, stream=STREAM_AUX):
    return _uniforms_block(np.uint64(seed), np.uint64(path), np.uint64(stream), int(n))
