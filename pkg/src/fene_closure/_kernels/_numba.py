"""Numba-compiled per-particle kernels.

Particle loops run under ``prange``. Reductions go through fixed-size blocks
whose partial sums are combined in a fixed binary-tree order, so results are
independent of the thread count.
"""

from __future__ import annotations

import math
import os

import numba as nb
import numpy as np

from . import _as241 as _as

if "NUMBA_THREADING_LAYER" not in os.environ:
    # skip the TBB probe; OpenMP ships with numba wheels
    nb.config.THREADING_LAYER = "omp"

NAME = "numba"
BLOCK = 256

_U = np.uint64
_G_IDX = _U(0x9E3779B97F4A7C15)
_G_DRAW = _U(0xC2B2AE3D27D4EB4F)
_G_DRAW_OFF = _U(0x165667B19E3779F9)
_S30, _S27, _S31, _S11 = _U(30), _U(27), _U(31), _U(11)
_M1 = _U(0xBF58476D1CE4E5B9)
_M2 = _U(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0
_A, _B, _C, _D, _E, _F = _as.A, _as.B, _as.C, _as.D, _as.E, _as.F
_Q, _R, _RC, _RT = _as.SPLIT_Q, _as.SPLIT_R, _as.CONST_CENTRAL, _as.CONST_TAIL

_jit = nb.njit(cache=True, fastmath=False)
_pjit = nb.njit(cache=True, parallel=True, fastmath=False)


@_jit
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@_jit
def _hash(word, i, d):
    h = _mix(word + _U(i) * _G_IDX)
    return _mix(h ^ (_U(d) * _G_DRAW + _G_DRAW_OFF))


@_jit
def _unit(h):
    return (float(h >> _S11) + 0.5) * _INV53


@_jit
def _poly(c0, c1, c2, c3, c4, c5, c6, c7, r):
    return ((((((c7 * r + c6) * r + c5) * r + c4) * r + c3) * r + c2) * r + c1) * r + c0


@_jit
def _ppnd(p):
    q = p - 0.5
    if abs(q) <= _Q:
        r = _RC - q * q
        return q * _poly(*_A, r) / _poly(*_B, r)
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= _R:
        r = r - _RT
        v = _poly(*_C, r) / _poly(*_D, r)
    else:
        r = r - _R
        v = _poly(*_E, r) / _poly(*_F, r)
    return -v if q < 0.0 else v


@_jit
def _normal(word, i, d):
    return _ppnd(_unit(_hash(word, i, d)))


@_pjit
def _normals(word, idx, draw, sign):
    out = np.empty(idx.size)
    for k in nb.prange(idx.size):
        out[k] = sign * _normal(word, idx[k], draw[k])
    return out


@_pjit
def _uniforms(word, idx, draw):
    out = np.empty(idx.size)
    for k in nb.prange(idx.size):
        out[k] = _unit(_hash(word, idx[k], draw[k]))
    return out


def normals(word, idx, draw, sign):
    return _normals(_U(word), np.asarray(idx, np.int64), np.asarray(draw, np.int64), float(sign))


def uniforms(word, idx, draw):
    return _uniforms(_U(word), np.asarray(idx, np.int64), np.asarray(draw, np.int64))


@_jit
def _force(x, fcode, b, msq):
    if fcode == 0:
        return x
    if fcode == 1:
        return x / (1.0 - x * x / b)
    return x / (1.0 - msq / b)


@_jit
def _accept_one(xk, i, d, kappa, dt, we, fcode, b, msq, word, sign, bound, cap, sq):
    drift = (kappa * xk - _force(xk, fcode, b, msq) / (2.0 * we)) * dt
    tries = 1
    yk = xk + drift + sq * (sign * _normal(word, i, d))
    while yk * yk > bound:
        if tries >= cap:
            return xk, d, 1
        d += 1
        tries += 1
        yk = xk + drift + sq * (sign * _normal(word, i, d))
    return yk, d, 0


@_pjit
def _trial_accept(x, idx, draws, kappa, dt, we, fcode, b, msq, word, sign, bound, cap):
    n = x.size
    y = np.empty(n)
    used = np.empty(n, np.int64)
    over = np.zeros(n, np.int64)
    sq = math.sqrt(dt / we)
    for k in nb.prange(n):
        y[k], used[k], over[k] = _accept_one(x[k], idx[k], draws[k], kappa, dt, we, fcode, b,
                                             msq, word, sign, bound, cap, sq)
    return y, used, over.sum()


def trial_accept(x, idx, draws, kappa, dt, we, fcode, b, msq, word, sign, bound, cap):
    """See the numpy backend for the contract."""
    y, used, n_over = _trial_accept(
        np.ascontiguousarray(x, np.float64), np.asarray(idx, np.int64),
        np.asarray(draws, np.int64), float(kappa), float(dt), float(we), int(fcode),
        float(b), float(msq), _U(word), float(sign), float(bound), int(cap))
    return y, used, int(n_over)


@_jit
def _even_pair(p, x):
    x2 = x * x
    pw = 1.0
    for _ in range(p - 1):
        pw = pw * x2
    return pw * x2, 2.0 * p * x * pw


@_jit
def _obs_pair(code, l, L, x, b):
    if code == 0 or (code == 1 and l < L - 1):
        return _even_pair(l + 1, x)
    x2 = x * x
    u = 1.0 / (1.0 - x2 / b)
    if code == 1 or l == 1:
        return x2 * u, 2.0 * x * u * u
    if l == 0:
        return x2, 2.0 * x
    if l == 2:
        return x2 * u * u, 2.0 * x * u * u + 4.0 * x * x2 * u * u * u / b
    return (x2 * x2 * u * u * u,
            4.0 * x * x2 * u * u * u + 6.0 * x * x2 * x2 * u * u * u * u / b)


@_jit
def _obs_second(code, l, L, x, b):
    x2 = x * x
    if code == 0 or (code == 1 and l < L - 1):
        p = l + 1
        pw = 1.0
        for _ in range(p - 1):
            pw = pw * x2
        return 2.0 * p * (2.0 * p - 1.0) * pw
    u = 1.0 / (1.0 - x2 / b)
    if code == 1 or l == 1:
        return 2.0 * u * u + 8.0 * x2 * u * u * u / b
    if l == 0:
        return 2.0
    if l == 2:
        return 2.0 * u * u + 20.0 * x2 * u ** 3 / b + 24.0 * x2 * x2 * u ** 4 / (b * b)
    return 12.0 * x2 * u ** 3 + 54.0 * x2 * x2 * u ** 4 / b + 48.0 * x2 ** 3 * u ** 5 / (b * b)


@_pjit
def _obs_eval(x, code, L, b, order):
    n = x.size
    out = np.empty((L, n))
    for i in nb.prange(n):
        for l in range(L):
            if order == 2:
                out[l, i] = _obs_second(code, l, L, x[i], b)
            else:
                out[l, i] = _obs_pair(code, l, L, x[i], b)[order]
    return out


def obs_eval(x, code, L, b, order):
    return _obs_eval(np.ascontiguousarray(x, np.float64), int(code), int(L), float(b), int(order))


@_jit
def _tree_reduce(part):
    # part: (nblocks, K); pairwise combine blocks in a fixed order
    nbk, K = part.shape
    buf = part.copy()
    m = nbk
    while m > 1:
        half = m // 2
        for j in range(half):
            for k in range(K):
                buf[j, k] = buf[2 * j, k] + buf[2 * j + 1, k]
        if m % 2 == 1:
            for k in range(K):
                buf[half, k] = buf[m - 1, k]
            m = half + 1
        else:
            m = half
    return buf[0].copy()


@_pjit
def _obs_means(x, code, L, b):
    n = x.size
    nbk = (n + BLOCK - 1) // BLOCK
    part = np.zeros((nbk, L))
    bad = np.zeros(nbk, np.bool_)
    for j in nb.prange(nbk):
        for i in range(j * BLOCK, min(n, (j + 1) * BLOCK)):
            xi = x[i]
            if code != 0 and xi * xi / b >= 1.0:
                bad[j] = True
                continue
            for l in range(L):
                part[j, l] += _obs_pair(code, l, L, xi, b)[0]
    return _tree_reduce(part) / n, not bad.any()


def obs_means(x, code, L, b):
    means, ok = _obs_means(np.ascontiguousarray(x, np.float64), int(code), int(L), float(b))
    if not ok:
        return np.full(L, np.nan), False
    return means, True


@_pjit
def _apply(y, g, lam):
    n = y.size
    L = lam.size
    out = np.empty(n)
    for i in nb.prange(n):
        v = y[i]
        for l in range(L):
            v += lam[l] * g[l, i]
        out[i] = v
    return out


def apply_multipliers(y, g, lam):
    return _apply(np.ascontiguousarray(y, np.float64), np.ascontiguousarray(g, np.float64),
                  np.ascontiguousarray(lam, np.float64))


@_pjit
def _proj_eval(y, g, lam, code, L, b):
    n = y.size
    nbk = (n + BLOCK - 1) // BLOCK
    K = L + L * L
    part = np.zeros((nbk, K))
    bad = np.zeros(nbk, np.bool_)
    for j in nb.prange(nbk):
        acc = np.zeros(K)
        dm = np.empty(L)
        for i in range(j * BLOCK, min(n, (j + 1) * BLOCK)):
            v = y[i]
            for l in range(L):
                v += lam[l] * g[l, i]
            if code != 0 and v * v / b >= 1.0:
                bad[j] = True
                continue
            for l in range(L):
                m, d = _obs_pair(code, l, L, v, b)
                acc[l] += m
                dm[l] = d
            for l in range(L):
                for q in range(L):
                    acc[L + l * L + q] += dm[l] * g[q, i]
        part[j, :] = acc
    tot = _tree_reduce(part) / n
    return tot[:L].copy(), tot[L:].copy().reshape((L, L)), not bad.any()


def proj_eval(y, g, lam, code, L, b):
    R, J, ok = _proj_eval(np.ascontiguousarray(y, np.float64), np.ascontiguousarray(g, np.float64),
                          np.ascontiguousarray(lam, np.float64), int(code), int(L), float(b))
    if not ok:
        return np.full(L, np.nan), np.full((L, L), np.nan), False
    return R, J, True


@_pjit
def _block_sum(a):
    n = a.size
    nbk = max(1, (n + BLOCK - 1) // BLOCK)
    part = np.zeros((nbk, 1))
    for j in nb.prange(nbk):
        s = 0.0
        for i in range(j * BLOCK, min(n, (j + 1) * BLOCK)):
            s += a[i]
        part[j, 0] = s
    return _tree_reduce(part)[0]


def mean(a):
    a = np.ascontiguousarray(a, np.float64)
    return float(_block_sum(a) / a.size)
