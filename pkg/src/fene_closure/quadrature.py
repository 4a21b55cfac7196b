"""Adaptive Gauss-Legendre quadrature for vector-valued integrands."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import QuadratureFailure

_ROUNDOFF = 64 * np.finfo(float).eps


@lru_cache(maxsize=8)
def _rule(order):
    return np.polynomial.legendre.leggauss(order)


def _panels(f, lo, hi, nodes, weights):
    mid = 0.5 * (lo + hi)
    rad = 0.5 * (hi - lo)
    x = mid[:, None] + rad[:, None] * nodes[None, :]
    vals = np.asarray(f(x.ravel()), dtype=float)
    vals = vals.reshape(vals.shape[:-1] + x.shape)  # (..., P, n)
    return np.einsum("...pn,n,p->...p", vals, weights, rad), np.einsum(
        "...pn,n,p->...p", np.abs(vals), weights, rad)


def integrate(f, a, b, rtol=1e-10, atol=0.0, order=20, initial_panels=16, max_panels=200_000):
    """Integrate ``f`` over ``[a, b]``.

    ``f`` maps a 1D array of abscissae to an array whose last axis matches it,
    so several integrands sharing the same nodes are handled in one pass.
    Each panel is accepted once its Gauss-Legendre value agrees with the sum
    over its two halves within a width-proportional share of the global
    tolerance ``rtol * integral(|f|) + atol`` (per component).
    """
    if not b > a:
        raise ValueError("integration requires b > a")
    nodes, weights = _rule(order)
    edges = np.linspace(a, b, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    est, est_abs = _panels(f, lo, hi, nodes, weights)
    scale = est_abs.sum(axis=-1)
    tol = rtol * scale + atol
    total = np.zeros(scale.shape)
    width = b - a
    n_done = 0
    while lo.size:
        mid = 0.5 * (lo + hi)
        left, left_abs = _panels(f, lo, mid, nodes, weights)
        right, right_abs = _panels(f, mid, hi, nodes, weights)
        fine = left + right
        if not np.all(np.isfinite(fine)):
            raise QuadratureFailure("non-finite integrand values")
        err = np.abs(fine - est)
        # round-off floor: no panel can be resolved below a few ulps of its own mass
        allowed = np.maximum(tol[..., None] * ((hi - lo) / width),
                             _ROUNDOFF * (left_abs + right_abs))
        ok = np.all(err <= allowed + 1e-300, axis=tuple(range(err.ndim - 1)))
        total = total + fine[..., ok].sum(axis=-1)
        n_done += int(ok.sum())
        keep = ~ok
        if n_done + 2 * int(keep.sum()) > max_panels:
            raise QuadratureFailure(f"no convergence within {max_panels} panels")
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        est = np.concatenate([left[..., keep], right[..., keep]], axis=-1)
    return total if total.ndim else float(total)
