"""Softmax stability arithmetic, the stability map, and the closed-form
boundary oracle.

The sharp-boundary result used throughout: for an indicator classifier whose
decision boundary crosses a box of height H, the deviation metric integrated
along a crossing line equals 2r/pi, so the box-averaged value is 2r/(pi H).
The quadrature oracle here recomputes that integral numerically so the two
routes can check each other.
"""

import csv
from dataclasses import dataclass

import numpy as np


def softmax_prob(logits, class_index):
    """Numerically stable softmax component (max-subtracted)."""
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 1 or logits.size < 2:
        raise ValueError("softmax needs a vector of at least 2 logits")
    if not np.isfinite(logits).all():
        raise ValueError("softmax needs finite logits")
    if not 0 <= class_index < logits.size:
        raise IndexError(f"class index {class_index} out of range "
                         f"for {logits.size} logits")
    z = logits - logits.max()
    ez = np.exp(z)
    return float(ez[class_index] / ez.sum())


def approx_prob(l_class, l_bar, n_classes):
    """Two-parameter softmax approximation: the class logit against
    (n_classes - 1) copies of the mean remaining logit."""
    n_classes = int(n_classes)
    if n_classes < 2:
        raise ValueError("approx_prob needs at least 2 classes")
    # Same max-subtraction trick as the exact softmax.
    top = max(l_class, l_bar)
    ec = np.exp(l_class - top)
    eb = np.exp(l_bar - top)
    return float(ec / (ec + (n_classes - 1) * eb))


def predicted_stability(p_class, gamma, n_steps):
    """Expected surviving class probability after n_steps of gamma-sized
    logit erosion: P * exp(-N * gamma), clamped into (0, 1]."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    return float(min(1.0, p_class * np.exp(-n_steps * gamma)))


@dataclass(frozen=True)
class SoftmaxSummary:
    """Class logit, mean remaining logit, exact class probability."""

    class_logit: float
    mean_other_logit: float
    class_prob: float
    n_classes: int


def summarize_logits(logits, class_index, include_class_in_mean=False):
    """Reduce a logit vector to the (L_C, L_bar, P_C) summary.

    The mean logit excludes the class component by default; the flag switches
    to averaging over all logits.
    """
    logits = np.asarray(logits, dtype=float)
    p = softmax_prob(logits, class_index)
    if include_class_in_mean:
        l_bar = float(logits.mean())
    else:
        others = np.delete(logits, class_index)
        l_bar = float(others.mean())
    return SoftmaxSummary(class_logit=float(logits[class_index]),
                          mean_other_logit=l_bar, class_prob=p,
                          n_classes=int(logits.size))


@dataclass(frozen=True)
class GammaMap:
    """Binned stability fractions over (class probability, gamma).

    cells hold (count, stable_count); fraction is stable/count for occupied
    cells and undefined for empty ones.
    """

    prob_edges: np.ndarray
    gamma_edges: np.ndarray
    counts: np.ndarray         # (n_prob_bins, n_gamma_bins)
    stable_counts: np.ndarray

    @property
    def fractions(self):
        with np.errstate(invalid="ignore"):
            return np.where(self.counts > 0,
                            self.stable_counts / np.maximum(self.counts, 1),
                            np.nan)


def _bin_index(edges, value):
    # Clamp out-of-range records into the edge bins.
    i = int(np.searchsorted(edges, value, side="right")) - 1
    return min(max(i, 0), len(edges) - 2)


def build_gamma_map(records, prob_edges=None, gamma_edges=None):
    """Bin (prob, gamma, stable) records into a GammaMap.

    Default binning is 10x10: probability edges uniform on [0, 1], gamma
    edges uniform on [0, 99th percentile of the observed gammas] so a few
    outliers cannot stretch the map.
    """
    records = list(records)
    if not records:
        raise ValueError("cannot build a map from zero records")
    probs = np.array([r[0] for r in records], dtype=float)
    gammas = np.array([r[1] for r in records], dtype=float)
    stables = np.array([bool(r[2]) for r in records])

    if prob_edges is None:
        prob_edges = np.linspace(0.0, 1.0, 11)
    prob_edges = np.asarray(prob_edges, dtype=float)
    if gamma_edges is None:
        top = float(np.percentile(gammas, 99))
        if top <= 0:
            top = max(float(gammas.max()), 1e-12)
        gamma_edges = np.linspace(0.0, top, 11)
    gamma_edges = np.asarray(gamma_edges, dtype=float)
    for name, edges in (("prob", prob_edges), ("gamma", gamma_edges)):
        if edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError(f"{name} edges must be strictly increasing")

    counts = np.zeros((prob_edges.size - 1, gamma_edges.size - 1), dtype=int)
    stable_counts = np.zeros_like(counts)
    for p, g, s in zip(probs, gammas, stables):
        i, j = _bin_index(prob_edges, p), _bin_index(gamma_edges, g)
        counts[i, j] += 1
        stable_counts[i, j] += int(s)
    return GammaMap(prob_edges=prob_edges, gamma_edges=gamma_edges,
                    counts=counts, stable_counts=stable_counts)


EMPTY_CELL = None  # sentinel returned for unpopulated map cells


def lookup_stability(gmap, prob, gamma, nearest_nonempty=False):
    """Stability fraction of the cell containing (prob, gamma).

    Empty cells return None, or the nearest populated cell's fraction (by
    bin-index distance) when nearest_nonempty is set.
    """
    i = _bin_index(gmap.prob_edges, prob)
    j = _bin_index(gmap.gamma_edges, gamma)
    if gmap.counts[i, j] > 0:
        return float(gmap.stable_counts[i, j] / gmap.counts[i, j])
    if not nearest_nonempty:
        return EMPTY_CELL
    occupied = np.argwhere(gmap.counts > 0)
    if occupied.size == 0:
        return EMPTY_CELL
    dist = np.abs(occupied - [i, j]).sum(axis=1)
    bi, bj = occupied[int(np.argmin(dist))]
    return float(gmap.stable_counts[bi, bj] / gmap.counts[bi, bj])


def merge_gamma_maps(a, b):
    """Combine two maps built on identical edges (shard-and-merge support)."""
    if not (np.array_equal(a.prob_edges, b.prob_edges)
            and np.array_equal(a.gamma_edges, b.gamma_edges)):
        raise ValueError("maps were built on different bin edges")
    return GammaMap(prob_edges=a.prob_edges, gamma_edges=a.gamma_edges,
                    counts=a.counts + b.counts,
                    stable_counts=a.stable_counts + b.stable_counts)


def write_gamma_map_csv(gmap, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["prob_lo", "prob_hi", "gamma_lo", "gamma_hi",
                    "count", "stable_count", "fraction"])
        for i in range(gmap.counts.shape[0]):
            for j in range(gmap.counts.shape[1]):
                c = int(gmap.counts[i, j])
                s = int(gmap.stable_counts[i, j])
                w.writerow([repr(float(gmap.prob_edges[i])),
                            repr(float(gmap.prob_edges[i + 1])),
                            repr(float(gmap.gamma_edges[j])),
                            repr(float(gmap.gamma_edges[j + 1])),
                            c, s, repr(s / c) if c else ""])


def adaptive_simpson(f, a, b, tol=1e-9, max_depth=60):
    """Classic recursive adaptive Simpson quadrature.

    The boundary integrand has infinite slope at one endpoint, so a fixed
    rule would stall; adaptivity concentrates the subdivision there.
    """
    def simpson(x0, x2):
        x1 = 0.5 * (x0 + x2)
        return (x2 - x0) / 6.0 * (f(x0) + 4.0 * f(x1) + f(x2)), x1

    def recurse(x0, x2, whole, eps, depth):
        s_left, x1 = simpson(x0, 0.5 * (x0 + x2))
        s_right, _ = simpson(0.5 * (x0 + x2), x2)
        # Standard Richardson check: the halved pair agrees with the parent.
        if depth <= 0 or abs(s_left + s_right - whole) <= 15.0 * eps:
            return s_left + s_right + (s_left + s_right - whole) / 15.0
        mid = 0.5 * (x0 + x2)
        return (recurse(x0, mid, s_left, eps / 2.0, depth - 1)
                + recurse(mid, x2, s_right, eps / 2.0, depth - 1))

    whole, _ = simpson(a, b)
    return recurse(a, b, whole, tol, max_depth)


def boundary_band_value(r, method="closed"):
    """Deviation integrated along a line crossing a sharp straight boundary.

    Closed form 2r/pi.  The quadrature route integrates the circular-overlap
    profile arccos(x/r)/pi from 0 to r on each side of the boundary.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    if method == "closed":
        return 2.0 * r / np.pi
    if method == "quadrature":
        def profile(x):
            return np.arccos(min(x / r, 1.0)) / np.pi
        one_side = adaptive_simpson(profile, 0.0, r, tol=1e-9 * max(r, 1e-6))
        return 2.0 * one_side
    raise ValueError(f"unknown method {method!r}")


def boundary_band_average(r, height, method="closed"):
    """Box-averaged deviation for a straight boundary crossing a box of the
    given height: 2r/(pi * height).

    The derivation needs the two half-bands to stay disjoint, so r must be
    below height/2.
    """
    if height <= 0:
        raise ValueError("height must be positive")
    if r >= height / 2.0:
        raise ValueError(f"r = {r} overlaps the band: the closed form needs "
                         f"r < height/2 = {height / 2.0}")
    return boundary_band_value(r, method=method) / height
