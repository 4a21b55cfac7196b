"""Pure-numpy reference implementation of the per-particle kernels."""

from __future__ import annotations

import math

import numpy as np

from . import _as241 as _as

NAME = "numpy"

_U = np.uint64
_G_IDX = _U(0x9E3779B97F4A7C15)
_G_DRAW = _U(0xC2B2AE3D27D4EB4F)
_G_DRAW_OFF = _U(0x165667B19E3779F9)
_S30, _S27, _S31, _S11 = _U(30), _U(27), _U(31), _U(11)
_M1 = _U(0xBF58476D1CE4E5B9)
_M2 = _U(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _hash(word, idx, draw):
    h = _mix(word + idx.astype(np.uint64) * _G_IDX)
    return _mix(h ^ (draw.astype(np.uint64) * _G_DRAW + _G_DRAW_OFF))


def _unit(h):
    return ((h >> _S11).astype(np.float64) + 0.5) * _INV53


def uniforms(word, idx, draw):
    return _unit(_hash(word, idx, draw))


def _poly(cs, r):
    out = cs[7] * r + cs[6]
    for c in cs[5::-1]:
        out = out * r + c
    return out


def ppnd(p):
    """Inverse standard normal CDF (AS241)."""
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(p)
    mid = np.abs(q) <= _as.SPLIT_Q
    qm = q[mid]
    r = _as.CONST_CENTRAL - qm * qm
    out[mid] = qm * _poly(_as.A, r) / _poly(_as.B, r)
    tail = ~mid
    qt = q[tail]
    r = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
    r = np.sqrt(-np.log(r))
    near = r <= _as.SPLIT_R
    v = np.empty_like(r)
    rn = r[near] - _as.CONST_TAIL
    v[near] = _poly(_as.C, rn) / _poly(_as.D, rn)
    rf = r[~near] - _as.SPLIT_R
    v[~near] = _poly(_as.E, rf) / _poly(_as.F, rf)
    out[tail] = np.where(qt < 0.0, -v, v)
    return out


def normals(word, idx, draw, sign):
    return sign * ppnd(uniforms(word, idx, draw))


def _force(x, fcode, b, msq):
    if fcode == 0:
        return x
    if fcode == 1:
        return x / (1.0 - x * x / b)
    return x / (1.0 - msq / b)


def trial_accept(x, idx, draws, kappa, dt, we, fcode, b, msq, word, sign, bound, cap):
    """Euler-Maruyama trial moves with per-particle accept-reject.

    Particle ``idx[i]`` tries draws ``draws[i], draws[i] + 1, ...`` until the new
    squared length is ``<= bound``. Returns ``(y, used_draws, n_overflow)``;
    particles that exhaust ``cap`` tries keep their old value.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    y = np.empty(n)
    used = np.array(draws, dtype=np.int64, copy=True)
    drift = (kappa * x - _force(x, fcode, b, msq) / (2.0 * we)) * dt
    sq = math.sqrt(dt / we)
    active = np.arange(n)
    tries = 0
    n_over = 0
    while active.size:
        xi = normals(word, idx[active], used[active], sign)
        ya = x[active] + drift[active] + sq * xi
        ok = ya * ya <= bound
        y[active[ok]] = ya[ok]
        active = active[~ok]
        tries += 1
        if active.size and tries >= cap:
            y[active] = x[active]
            n_over = active.size
            break
        used[active] += 1
    return y, used, n_over


def _obs_pair(code, l, L, x, b):
    x2 = x * x
    if code == 0 or (code == 1 and l < L - 1):
        p = l + 1
        pw = np.ones_like(x)
        for _ in range(p - 1):
            pw = pw * x2
        return pw * x2, 2.0 * p * x * pw
    u = 1.0 / (1.0 - x2 / b)
    if code == 1 or l == 1:
        return x2 * u, 2.0 * x * u * u
    if l == 0:
        return x2, 2.0 * x
    if l == 2:
        return x2 * u * u, 2.0 * x * u * u + 4.0 * x * x2 * u * u * u / b
    return x2 * x2 * u * u * u, 4.0 * x * x2 * u * u * u + 6.0 * x * x2 * x2 * u * u * u * u / b


def _obs_second(code, l, L, x, b):
    x2 = x * x
    if code == 0 or (code == 1 and l < L - 1):
        p = l + 1
        pw = np.ones_like(x)
        for _ in range(p - 1):
            pw = pw * x2
        return 2.0 * p * (2.0 * p - 1.0) * pw
    u = 1.0 / (1.0 - x2 / b)
    if code == 1 or l == 1:
        return 2.0 * u * u + 8.0 * x2 * u * u * u / b
    if l == 0:
        return np.full_like(x, 2.0)
    if l == 2:
        return 2.0 * u * u + 20.0 * x2 * u ** 3 / b + 24.0 * x2 * x2 * u ** 4 / (b * b)
    return 12.0 * x2 * u ** 3 + 54.0 * x2 * x2 * u ** 4 / b + 48.0 * x2 ** 3 * u ** 5 / (b * b)


def _in_domain(x, code, b):
    return code == 0 or bool(np.all(x * x / b < 1.0))


def obs_eval(x, code, L, b, order):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((L, x.size))
    for l in range(L):
        if order == 2:
            out[l] = _obs_second(code, l, L, x, b)
        else:
            out[l] = _obs_pair(code, l, L, x, b)[order]
    return out


def obs_means(x, code, L, b):
    """Means of the observable values; ``ok`` is False if any particle is out of domain."""
    x = np.asarray(x, dtype=np.float64)
    if not _in_domain(x, code, b):
        return np.full(L, np.nan), False
    vals = obs_eval(x, code, L, b, 0)
    return np.sum(vals, axis=1) / x.size, True


def apply_multipliers(y, g, lam):
    return y + lam @ g


def proj_eval(y, g, lam, code, L, b):
    """Constraint values and Jacobian at ``y + sum_l lam_l g_l``.

    ``J[l, q] = mean(m_l'(x_tilde) * g_q)`` where ``g`` already carries the ``1/N``.
    """
    xt = apply_multipliers(y, g, lam)
    n = xt.size
    if not _in_domain(xt, code, b):
        return np.full(L, np.nan), np.full((L, L), np.nan), False
    m = np.empty((L, n))
    dm = np.empty((L, n))
    for l in range(L):
        m[l], dm[l] = _obs_pair(code, l, L, xt, b)
    R = np.sum(m, axis=1) / n
    J = (dm @ g.T) / n
    return R, J, True


def mean(a):
    a = np.asarray(a, dtype=np.float64)
    return float(np.sum(a) / a.size)
