"""Atomic and boxed measures, the rescaling operator, and distances.

Boxes are half-open cubes ``[i_1 h, (i_1+1) h) x ... x [i_d h, (i_d+1) h)``.
A :class:`BoxedMeasure` stores only occupied boxes; mass that is known to
live off the stored boxes (but not where exactly) is kept in ``overflow``.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AtomicMeasure",
    "BoxedMeasure",
    "box_index",
    "box_indices",
    "boxify",
    "coarsen",
    "rescale_theta",
    "l1_box_discrepancy",
    "tv_atomic",
    "ks_distance",
    "ks_two_sample",
    "ks_critical",
    "wasserstein1",
    "write_boxed_csv",
    "read_boxed_csv",
    "write_atomic_csv",
]

# |index| must stay well inside int64 so that index + 1 and pairwise sums never wrap
_MAX_INDEX = 2.0**62


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finitely many weighted atoms; weights are positive and sum to one."""

    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=np.float64)
        if pts.ndim != 2 or w.shape != (len(pts),):
            raise ValueError("points must be (m, d) and weights (m,)")
        if len(w) == 0:
            raise ValueError("an atomic probability measure needs at least one atom")
        if np.any(w <= 0):
            raise ValueError("atom weights must be positive")
        if abs(math.fsum(w) - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {math.fsum(w)!r}, not 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points):
        pts = np.asarray(points, dtype=np.float64)
        return cls(pts, np.full(len(pts), 1.0 / len(pts)))

    @property
    def d(self):
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class BoxedMeasure:
    """Sparse nonnegative measure on the width-``h`` box grid.

    ``index`` is an ``(m, d)`` int64 array of distinct box indices in
    lexicographic order, ``mass`` the matching masses.  ``overflow`` is mass
    carried by boxes that are not materialised.
    """

    h: float
    index: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)
    overflow: float = 0.0

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError("box width must be positive and finite")
        idx = np.asarray(self.index, dtype=np.int64)
        if idx.ndim == 1:
            idx = idx[:, None]
        mass = np.asarray(self.mass, dtype=np.float64)
        if idx.ndim != 2 or mass.shape != (len(idx),):
            raise ValueError("index must be (m, d) and mass (m,)")
        if np.any(mass < 0) or self.overflow < 0:
            raise ValueError("masses must be nonnegative")
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "overflow", float(self.overflow))

    @property
    def d(self):
        return self.index.shape[1]

    @property
    def total(self):
        return math.fsum(self.mass) + self.overflow

    def as_dict(self):
        return {tuple(int(v) for v in k): float(m) for k, m in zip(self.index, self.mass)}

    @classmethod
    def from_dict(cls, h, masses, overflow=0.0):
        if not masses:
            raise ValueError("from_dict needs at least one box (dimension is ambiguous otherwise)")
        keys = np.array(sorted(masses), dtype=np.int64)
        vals = np.array([masses[tuple(k)] for k in keys.tolist()], dtype=np.float64)
        return cls(h, keys, vals, overflow)

    def lookup(self, index):
        """Masses of the given ``(k, d)`` box indices (zero when absent)."""
        index = np.asarray(index, dtype=np.int64).reshape(-1, self.d)
        out = np.zeros(len(index))
        if len(self.index) == 0:
            return out
        keys, inv = np.unique(np.concatenate([self.index, index]), axis=0, return_inverse=True)
        inv = inv.ravel()
        table = np.zeros(len(keys))
        table[inv[: len(self.index)]] = self.mass
        return table[inv[len(self.index) :]]


def box_indices(points, h):
    """Box index of every row of ``points`` (shape ``(m, d)``)."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if not (h > 0 and math.isfinite(h)):
        raise ValueError("box width must be positive and finite")
    if not np.all(np.isfinite(x)):
        raise ValueError("box_index needs finite coordinates")
    q = np.floor(x / h)
    if np.any(np.abs(q) >= _MAX_INDEX):
        raise ValueError("coordinate too large for the box grid at this width")
    # x/h is rounded; nudge so that q*h <= x < (q+1)*h holds in float arithmetic
    q = np.where(q * h > x, q - 1, q)
    q = np.where((q + 1) * h <= x, q + 1, q)
    return q.astype(np.int64)


def box_index(x, h):
    """Index tuple of the box containing the single point ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.ndim != 1:
        raise ValueError("box_index takes one point; use box_indices for many")
    return tuple(int(v) for v in box_indices(x[None, :], h)[0])


def _group(index, values):
    """Sum ``values`` over equal rows of ``index``."""
    if index.shape[1] == 1:
        keys, inv = np.unique(index[:, 0], return_inverse=True)
        keys = keys[:, None]
    else:
        keys, inv = np.unique(index, axis=0, return_inverse=True)
    inv = inv.ravel()
    return keys, np.bincount(inv, weights=values, minlength=len(keys))


def boxify(measure, h):
    """Push an :class:`AtomicMeasure` onto the width-``h`` box grid."""
    idx = box_indices(measure.points, h)
    w = measure.weights
    if np.all(w == w[0]):
        # equal weights: count / m is exact, so a single full box has mass 1.0
        keys, counts = _group(idx, np.ones(len(w)))
        return BoxedMeasure(h, keys, counts / len(w))
    keys, mass = _group(idx, w)
    return BoxedMeasure(h, keys, mass)


def coarsen(measure, factor=2):
    """Merge boxes ``factor`` at a time along each axis (width ``factor * h``)."""
    keys, mass = _group(np.floor_divide(measure.index, factor), measure.mass)
    return BoxedMeasure(measure.h * factor, keys, mass, measure.overflow)


def rescale_theta(measure, a):
    """Renormalisation ``Theta_a``: the atom at ``x`` moves to ``x / a``."""
    if not a > 0:
        raise ValueError("rescaling factor must be positive")
    return AtomicMeasure(measure.points / a, measure.weights)


def _aligned(P, Q):
    if P.h != Q.h:
        raise ValueError(f"box widths differ ({P.h} vs {Q.h})")
    if P.d != Q.d:
        raise ValueError("dimensions differ")
    both = np.concatenate([P.index, Q.index])
    if both.shape[1] == 1:
        keys, inv = np.unique(both[:, 0], return_inverse=True)
    else:
        keys, inv = np.unique(both, axis=0, return_inverse=True)
    inv = inv.ravel()
    p = np.zeros(len(keys))
    q = np.zeros(len(keys))
    p[inv[: len(P.index)]] = P.mass
    q[inv[len(P.index) :]] = Q.mass
    return p, q


def l1_box_discrepancy(P, Q):
    """``sum_B |P(B) - Q(B)|`` over boxes.

    Overflow mass counts in full: it is taken to sit on boxes that the other
    measure leaves empty.  That holds whenever the materialised boxes of each
    measure cover the support of the other, which is how the coupling module
    builds its laws.
    """
    p, q = _aligned(P, Q)
    return math.fsum(np.abs(p - q)) + P.overflow + Q.overflow


def tv_atomic(P, Q):
    """Total variation between two atomic measures (atoms matched exactly)."""
    if P.d != Q.d:
        raise ValueError("dimensions differ")
    pts = np.concatenate([P.points, Q.points])
    if pts.shape[1] == 1:
        _, inv = np.unique(pts[:, 0], return_inverse=True)
    else:
        _, inv = np.unique(pts, axis=0, return_inverse=True)
    inv = inv.ravel()
    k = inv.max() + 1
    diff = np.bincount(inv[: len(P.weights)], weights=P.weights, minlength=k)
    diff -= np.bincount(inv[len(P.weights) :], weights=Q.weights, minlength=k)
    return min(1.0, 0.5 * math.fsum(np.abs(diff)))


def _as_1d(samples):
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 2 and x.shape[1] == 1:
        x = x[:, 0]
    if x.ndim != 1:
        raise ValueError("KS/Wasserstein distances are one-dimensional")
    if x.size == 0:
        raise ValueError("need at least one sample")
    return x


def ks_distance(samples, cdf):
    """``sup_x |F_N(x) - F(x)|`` for the empirical CDF of ``samples``.

    ``cdf`` is evaluated at each distinct sample value and at the next float
    below it, which captures the left limit of step CDFs, so the statistic
    is exact for point masses as well as continuous laws.
    """
    x = np.sort(_as_1d(samples))
    n = x.size
    u, first = np.unique(x, return_index=True)
    below = first / n  # F_N just below u
    at = np.append(first[1:], n) / n  # F_N at u
    f_at = np.asarray(cdf(u), dtype=np.float64)
    f_below = np.asarray(cdf(np.nextafter(u, -np.inf)), dtype=np.float64)
    return float(max(np.max(np.abs(at - f_at)), np.max(np.abs(below - f_below))))


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.sort(_as_1d(a))
    b = np.sort(_as_1d(b))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_critical(n, m=None, level=1e-3):
    """Asymptotic KS critical value ``sqrt(-ln(level/2)/2) * sqrt(1/n [+ 1/m])``."""
    c = math.sqrt(-0.5 * math.log(level / 2.0))
    return c * math.sqrt(1.0 / n + (0.0 if m is None else 1.0 / m))


def wasserstein1(a, b):
    """Wasserstein-1 distance between two equal-size samples on the line."""
    a = _as_1d(a)
    b = _as_1d(b)
    if a.size != b.size:
        raise ValueError(f"sample sizes differ ({a.size} vs {b.size})")
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


# CSV export ---------------------------------------------------------------


def write_boxed_csv(measure, path):
    """``h=<value>`` line (then ``overflow=<value>`` if nonzero), then ``i_1..i_d,mass`` rows."""
    with open(path, "w", newline="") as fh:
        fh.write(f"h={measure.h!r}\n")
        if measure.overflow:
            fh.write(f"overflow={measure.overflow!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"i_{j + 1}" for j in range(measure.d)] + ["mass"])
        for k, m in zip(measure.index.tolist(), measure.mass.tolist()):
            w.writerow([*k, repr(m)])


def read_boxed_csv(path):
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("h="):
            raise ValueError(f"{path}: missing 'h=' header")
        h = float(first[2:])
        overflow = 0.0
        rows = list(csv.reader(fh))
    if rows and rows[0] and rows[0][0].startswith("overflow="):
        overflow = float(rows[0][0][len("overflow=") :])
        rows = rows[1:]
    header, body = rows[0], rows[1:]
    d = len(header) - 1
    index = np.array([[int(v) for v in r[:d]] for r in body], dtype=np.int64).reshape(-1, d)
    mass = np.array([float(r[d]) for r in body])
    return BoxedMeasure(h, index, mass, overflow)


def write_atomic_csv(measure, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x_{j + 1}" for j in range(measure.d)] + ["weight"])
        for p, wt in zip(measure.points.tolist(), measure.weights.tolist()):
            w.writerow([repr(v) for v in p] + [repr(wt)])
