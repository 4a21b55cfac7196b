"""Histograms, distribution distances and batch-means error bars."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import BinMismatch, TooFewBatches

DEFAULT_BINS = 100


@dataclass(frozen=True)
class Histogram:
    """Counts on uniform bins over ``[-sqrt(b), sqrt(b)]``.

    Bins are left-closed and right-open except the last, which is closed.
    Values outside the range (possible for FENE-P) go to ``underflow`` and
    ``overflow``; ``n_total`` counts every sample.
    """

    edges: np.ndarray
    counts: np.ndarray
    n_total: int
    underflow: int = 0
    overflow: int = 0

    @property
    def n_bins(self) -> int:
        return self.counts.size

    @property
    def masses(self) -> np.ndarray:
        return self.counts / self.n_total

    @property
    def density(self) -> np.ndarray:
        return self.masses / np.diff(self.edges)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_left", "bin_right", "count", "normalized_density"])
            for lo, hi, c, d in zip(self.edges[:-1], self.edges[1:], self.counts, self.density):
                w.writerow([repr(float(lo)), repr(float(hi)), int(c), repr(float(d))])


def uniform_edges(b: float, n_bins: int = DEFAULT_BINS) -> np.ndarray:
    # integer numerators keep the edges exactly antisymmetric with 0 on an edge
    k = 2 * np.arange(n_bins + 1) - n_bins
    return math.sqrt(b) * k / n_bins


def bin(ensemble_or_configs, n_bins: int = DEFAULT_BINS, b: float | None = None,
        edges=None) -> Histogram:
    """Bin configurations; ``b`` defaults to the ensemble's model parameter."""
    if hasattr(ensemble_or_configs, "configs"):
        x = ensemble_or_configs.configs
        b = ensemble_or_configs.params.b if b is None else b
    else:
        x = np.asarray(ensemble_or_configs, dtype=float)
    if edges is None:
        if b is None:
            raise ValueError("b is required to bin a bare array")
        edges = uniform_edges(b, n_bins)
    edges = np.asarray(edges, dtype=float)
    k = edges.size - 1
    pos = np.searchsorted(edges, x, side="right") - 1
    pos[x == edges[-1]] = k - 1
    under = int(np.count_nonzero(pos < 0))
    over = int(np.count_nonzero(pos >= k))
    inside = pos[(pos >= 0) & (pos < k)]
    counts = np.bincount(inside, minlength=k).astype(np.int64)
    return Histogram(edges, counts, int(x.size), under, over)


def _ref_masses(ref, edges):
    if isinstance(ref, Histogram):
        if ref.edges.shape != edges.shape or not np.allclose(ref.edges, edges, rtol=0, atol=1e-12):
            raise BinMismatch("histograms have different bin edges")
        return ref.masses, ref.underflow / ref.n_total, ref.overflow / ref.n_total
    if hasattr(ref, "bin_masses"):
        return ref.bin_masses(edges), 0.0, 0.0
    arr = np.asarray(ref, dtype=float)
    if arr.shape != (edges.size - 1,):
        raise BinMismatch(f"reference masses have shape {arr.shape}")
    return arr, 0.0, 0.0


def l1_distance(h: Histogram, ref) -> float:
    """``sum_i |p_i - q_i|`` over normalized bin masses (overflow bins included).

    ``ref`` may be a :class:`Histogram` on the same edges, any object with a
    ``bin_masses(edges)`` method (densities), or an array of masses.
    """
    q, qu, qo = _ref_masses(ref, h.edges)
    p = h.masses
    return float(np.sum(np.abs(p - q)) + abs(h.underflow / h.n_total - qu)
                 + abs(h.overflow / h.n_total - qo))


def l1_noise_sd(h: Histogram, ref_masses) -> float:
    """Approximate standard deviation of the multinomial L1 sampling noise.

    Each bin contributes ``|p_i - q_i|`` with ``p_i`` having variance
    ``q_i (1 - q_i) / N``; the sum's spread is dominated by the
    half-normal variance ``(1 - 2/pi) q_i (1 - q_i) / N`` per bin.
    """
    q = np.asarray(ref_masses, dtype=float)
    return float(math.sqrt(np.sum((1 - 2 / math.pi) * q * (1 - q)) / h.n_total))


def batch_se(series, n_batches: int = 20) -> float:
    """Batch-means standard error of the mean of ``series``.

    The series is cut into ``n_batches`` contiguous batches of equal length;
    a trailing remainder is dropped.
    """
    s = np.asarray(series, dtype=float)
    if n_batches < 2:
        raise TooFewBatches("batch_se needs at least 2 batches")
    size = s.size // n_batches
    if size < 1:
        raise TooFewBatches(f"{s.size} samples cannot fill {n_batches} batches")
    means = s[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(n_batches))


def write_density_csv(path, x, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "phi"])
        for a, v in zip(x, values):
            w.writerow([repr(float(a)), repr(float(v))])
