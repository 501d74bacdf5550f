"""Conditional box laws of consecutive schedule snapshots and their coupling.

For schedule index ``n`` (times ``T = T_n`` and ``T' = T_{n+1}``) and a
realised urn ``X``:

* the *lhs* law is the law of a uniform ball among the first ``T'``, i.e.
  the empirical measure of ``X_1..X_{T'}``;
* the *rhs* law is the law of a uniform ball among the first ``T`` plus an
  independent ``R D`` with ``R ~ Bernoulli(p_n)``, i.e.
  ``(1 - p_n) emp(X_1..X_T) + p_n * mean_j law(X_j + D)``.

Both are pushed onto the width-``h`` box grid.  In ``exact-cdf`` mode the
convolution term is evaluated from the displacement CDF on every box the
lhs occupies; the rest of its mass goes into the overflow bucket, so the L1
distance between the two box laws is exact.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .displacement import (
    coordinate_cdf,
    coordinate_ppf,
    coordinate_sf,
    has_cdf,
    sample_displacement,
)
from .measure import AtomicMeasure, BoxedMeasure, box_indices, boxify, l1_box_discrepancy
from .schedule import big_time, step_prob
from .urn import record_rep_samples

__all__ = [
    "EXACT",
    "MONTE_CARLO",
    "CouplingReport",
    "CoupledSamples",
    "TailEstimate",
    "schedule_window",
    "modif_probability_exact",
    "modif_expectation",
    "resampled_colors",
    "lhs_box_law",
    "rhs_box_law",
    "main2_discrepancy",
    "couple_samples",
    "tail_mass",
    "tail_record_estimate",
    "default_gamma",
]

EXACT = "exact-cdf"
MONTE_CARLO = "monte-carlo"
_MODES = (EXACT, MONTE_CARLO)
# CDF evaluations per block when averaging over atoms
_BLOCK = 4_000_000


def schedule_window(n):
    """``(T_n, T_{n+1}, p_n)``."""
    if n < 1:
        raise ValueError("schedule index starts at 1")
    return big_time(n), big_time(n + 1), step_prob(n)


def _need(state, balls):
    if state.n < balls:
        raise ValueError(f"urn has {state.n} balls, this check needs at least {balls}")


def default_gamma(model):
    """Tail exponent ``3 beta + 1``."""
    return 3.0 * model.beta + 1.0


def _check_mode(mode, model):
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    if mode == EXACT and (model.d != 1 or not has_cdf(model)):
        raise ValueError(f"exact-cdf mode needs d = 1 and a closed-form CDF; {model.spec} has neither")


# modification statistic ----------------------------------------------------


def modif_probability_exact(state, n):
    """``#{T < i <= T' : U_i > T} / T'`` from the stored parents.

    This is the realised bound on the probability that the resampled pick
    differs from the plain uniform pick at time ``T'``.
    """
    t, t1, _ = schedule_window(n)
    _need(state, t1)
    # 0-based balls t..t1-1 have parents stored at t-1..t1-2
    window = state.parents[t - 1 : t1 - 1]
    return int(np.count_nonzero(window >= t)) / t1


def modif_expectation(n):
    """``E[modif] = sum_{T<i<=T'} (i - 1 - T) / ((i - 1) T')`` by direct summation."""
    t, t1, _ = schedule_window(n)
    return math.fsum((i - 1 - t) / ((i - 1) * t1) for i in range(t + 1, t1 + 1))


def resampled_colors(state, n, rng):
    """Colours of the resampled process on the window ``T < i <= T'``.

    Balls whose parent is at most ``T`` keep their colour.  The others get a
    fresh parent uniform on the first ``T`` balls and a fresh displacement.
    Returns ``(colors, resampled_mask)``.
    """
    t, t1, _ = schedule_window(n)
    _need(state, t1)
    colors = state.colors[t:t1].copy()
    mask = state.parents[t - 1 : t1 - 1] >= t
    k = int(mask.sum())
    if k:
        fresh_parent = rng.integers(0, t, size=k)
        colors[mask] = state.colors[fresh_parent] + sample_displacement(state.model, rng, k)
    return colors, mask


# box laws ----------------------------------------------------------------


def lhs_box_law(state, n, h):
    """Empirical law of ``X_1..X_{T'}`` on the box grid (no randomness)."""
    _, t1, _ = schedule_window(n)
    _need(state, t1)
    return boxify(AtomicMeasure.uniform(state.colors[:t1]), h)


def _mean_cdf(model, edges, atoms):
    """``mean_j P(D <= y - x_j)`` for each edge ``y``."""
    out = np.empty(len(edges))
    block = max(1, _BLOCK // max(len(atoms), 1))
    for lo in range(0, len(edges), block):
        y = edges[lo : lo + block, None]
        out[lo : lo + block] = coordinate_cdf(model, y - atoms[None, :]).mean(axis=1)
    return out


def _union_keys(*arrays):
    return np.unique(np.concatenate([a.ravel() for a in arrays]))


def _exact_conv(state, t, h, keys):
    """Convolution law ``mean_{j<t} law(X_j + D)`` on 1-d box ``keys`` plus overflow."""
    model = state.model
    atoms = state.colors[:t, 0]
    if model.kind == "point-mass":
        shifted = boxify(AtomicMeasure.uniform(atoms + model.param("c")), h)
        sk = shifted.index[:, 0]
        pos = np.searchsorted(keys, sk)
        inside = (pos < len(keys)) & (keys[np.minimum(pos, len(keys) - 1)] == sk)
        mass = np.zeros(len(keys))
        mass[pos[inside]] = shifted.mass[inside]
        return mass, math.fsum(shifted.mass[~inside])
    edge_keys = np.unique(np.concatenate([keys, keys + 1]))
    g = _mean_cdf(model, edge_keys * h, atoms)
    at = dict(zip(edge_keys.tolist(), g.tolist()))
    lo = np.array([at[k] for k in keys.tolist()])
    hi = np.array([at[k + 1] for k in keys.tolist()])
    mass = np.maximum(hi - lo, 0.0)
    gaps = [lo[0], 1.0 - hi[-1]]
    jump = np.nonzero(keys[1:] > keys[:-1] + 1)[0]
    gaps.extend((lo[jump + 1] - hi[jump]).tolist())
    return mass, math.fsum(max(g, 0.0) for g in gaps)


def rhs_box_law(state, n, h, mode=EXACT, mc_samples=1_000_000, rng=None, support=None):
    """Law of ``X_U + R D`` (``U`` uniform on the first ``T`` balls) on the box grid.

    ``exact-cdf``: masses on ``support`` (default: every box holding one of
    the first ``T'`` colours, or all colours when the urn is shorter) plus
    an overflow bucket for the remaining convolution mass.
    ``monte-carlo``: empirical law of ``mc_samples`` draws (needs ``rng``).
    """
    model = state.model
    _check_mode(mode, model)
    t, t1, p = schedule_window(n)
    _need(state, t)
    if mode == MONTE_CARLO:
        if rng is None:
            raise ValueError("monte-carlo mode needs a random generator")
        return boxify(AtomicMeasure.uniform(_rhs_draws(state, t, p, mc_samples, rng)), h)

    emp = boxify(AtomicMeasure.uniform(state.colors[:t]), h)
    if support is None:
        support = box_indices(state.colors[: min(state.n, t1)], h)
    keys = _union_keys(np.asarray(support, dtype=np.int64), emp.index)
    conv, overflow = _exact_conv(state, t, h, keys)
    mass = p * conv
    mass[np.searchsorted(keys, emp.index[:, 0])] += (1.0 - p) * emp.mass
    return BoxedMeasure(h, keys[:, None], mass, p * overflow)


def _rhs_draws(state, t, p, size, rng):
    idx = rng.integers(0, t, size=size)
    jump = rng.random(size) < p
    pts = state.colors[idx].copy()
    k = int(jump.sum())
    if k:
        pts[jump] += sample_displacement(state.model, rng, k)
    return pts


# tails ---------------------------------------------------------------------


def _tail_conv(model, atoms, r):
    """``mean_j P(|X_j + D|_inf > r)`` for a model with a closed-form CDF."""
    if model.kind == "point-mass":
        return float(np.mean(np.max(np.abs(atoms + model.param("c")), axis=1) > r))
    out = np.empty(len(atoms))
    block = max(1, _BLOCK // max(atoms.shape[1], 1))
    for lo in range(0, len(atoms), block):
        x = atoms[lo : lo + block]
        coord_tail = coordinate_cdf(model, -r - x) + coordinate_sf(model, r - x)
        out[lo : lo + block] = 1.0 - np.prod(1.0 - coord_tail, axis=1)
    return float(np.mean(out))


def tail_mass(state, n, gamma, mode=EXACT, rng=None, mc_samples=1_000_000):
    """``(P(|lhs| > n**gamma), P(|rhs| > n**gamma))`` in the sup norm."""
    t, t1, p = schedule_window(n)
    _need(state, t1)
    if mode not in _MODES:
        raise ValueError(f"unknown mode {mode!r}")
    r = float(n) ** gamma
    norms = np.max(np.abs(state.colors[:t1]), axis=1)
    lhs = float(np.count_nonzero(norms > r)) / t1
    if mode == MONTE_CARLO or not has_cdf(state.model):
        if rng is None:
            raise ValueError("monte-carlo tail estimate needs a random generator")
        draws = _rhs_draws(state, t, p, mc_samples, rng)
        return lhs, float(np.mean(np.max(np.abs(draws), axis=1) > r))
    stay = float(np.count_nonzero(norms[:t] > r)) / t
    return lhs, (1.0 - p) * stay + p * _tail_conv(state.model, state.colors[:t], r)


# reports ---------------------------------------------------------------------


@dataclass(frozen=True)
class CouplingReport:
    n: int
    T_n: int
    T_next: int
    p_n: float
    h: float
    discrepancy: float
    benchmark: float
    modif_prob: float
    modif_benchmark: float
    tail_lhs: float
    tail_rhs: float
    gamma: float
    mode: str
    rhs_total: float

    def as_row(self):
        return asdict(self)


def main2_discrepancy(state, n, h, mode=EXACT, gamma=None, rng=None, mc_samples=1_000_000):
    """L1 distance between the lhs and rhs box laws, with side statistics."""
    t, t1, p = schedule_window(n)
    _need(state, t1)
    gamma = default_gamma(state.model) if gamma is None else gamma
    lhs = lhs_box_law(state, n, h)
    rhs = rhs_box_law(state, n, h, mode=mode, mc_samples=mc_samples, rng=rng, support=lhs.index[:, 0] if state.d == 1 else None)
    tail_l, tail_r = tail_mass(state, n, gamma, mode=mode if has_cdf(state.model) else MONTE_CARLO, rng=rng, mc_samples=mc_samples)
    return CouplingReport(
        n=n,
        T_n=t,
        T_next=t1,
        p_n=p,
        h=h,
        discrepancy=l1_box_discrepancy(lhs, rhs),
        benchmark=3.0 * n ** (-4.0 / 3.0),
        modif_prob=modif_probability_exact(state, n),
        modif_benchmark=p * p,
        tail_lhs=tail_l,
        tail_rhs=tail_r,
        gamma=gamma,
        mode=mode,
        rhs_total=rhs.total,
    )


# coupling --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoupledSamples:
    """``a`` follows the rhs law, ``b`` the lhs law; ``matched`` marks shared boxes."""

    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    matched: np.ndarray = field(repr=False)
    mismatch_prob: float

    @property
    def mismatches(self):
        return int(np.count_nonzero(~self.matched))


class _AtomPool:
    """Uniform draws among a point set, restricted to one box at a time."""

    def __init__(self, points, keys, h):
        self.points = points
        box = box_indices(points, h)[:, 0]
        self.order = np.argsort(box, kind="stable")
        sorted_box = box[self.order]
        self.start = np.searchsorted(sorted_box, keys, side="left")
        self.count = np.searchsorted(sorted_box, keys, side="right") - self.start

    def draw(self, slots, rng):
        c = self.count[slots]
        if np.any(c == 0):
            raise RuntimeError("asked for an atom in a box this pool does not occupy")
        pick = self.start[slots] + (rng.random(len(slots)) * c).astype(np.int64)
        return self.points[self.order[pick]]


def _clamp_into(x, lo, hi):
    # rounding in x_j + D can land on an edge; keep half-open box semantics
    return np.minimum(np.maximum(x, lo), np.nextafter(hi, -np.inf))


def _draw_conv_in_boxes(model, atoms, keys, slots, h, rng):
    """Exact draws of ``X_J + D`` conditioned on landing in box ``keys[slot]``."""
    out = np.empty(len(slots))
    for slot in np.unique(slots):
        sel = np.nonzero(slots == slot)[0]
        lo, hi = keys[slot] * h, (keys[slot] + 1) * h
        if model.kind == "point-mass":
            shifted = atoms + model.param("c")
            cand = np.nonzero(box_indices(shifted, h)[:, 0] == keys[slot])[0]
            out[sel] = shifted[cand[rng.integers(0, len(cand), size=len(sel))]]
            continue
        a, b = lo - atoms, hi - atoms
        right = a >= 0  # box lies right of the atom: work with survival functions
        w = np.where(right, coordinate_sf(model, a) - coordinate_sf(model, b), coordinate_cdf(model, b) - coordinate_cdf(model, a))
        w = np.maximum(w, 0.0)
        j = rng.choice(len(atoms), size=len(sel), p=w / w.sum())
        u = rng.random(len(sel))
        rj = right[j]
        ua = np.where(rj, coordinate_sf(model, b[j]), coordinate_cdf(model, a[j]))
        ub = np.where(rj, coordinate_sf(model, a[j]), coordinate_cdf(model, b[j]))
        q = ua + u * (ub - ua)
        # symmetric laws: the survival quantile at q is -ppf(q)
        delta = np.where(rj, -coordinate_ppf(model, q), coordinate_ppf(model, q))
        out[sel] = _clamp_into(atoms[j] + delta, lo, hi)
    return out


def _draw_conv_outside(model, atoms, keys, size, h, rng):
    """Rejection draws of ``X_J + D`` conditioned on missing every box in ``keys``."""
    out = np.empty(0)
    while len(out) < size:
        m = max(4 * (size - len(out)), 1024)
        x = atoms[rng.integers(0, len(atoms), size=m)] + sample_displacement(model, rng, m)[:, 0]
        bx = box_indices(x, h)[:, 0]
        pos = np.minimum(np.searchsorted(keys, bx), len(keys) - 1)
        out = np.concatenate([out, x[keys[pos] != bx]])
    return out[:size]


def couple_samples(state, n, h, rng, k, mode=EXACT, mc_samples=1_000_000):
    """``k`` pairs from a maximal coupling of the rhs and lhs box laws.

    The pair shares a box with probability ``sum_B min(P(B), Q(B))`` and
    otherwise comes from the normalised positive and negative parts, so the
    mismatch probability is half the L1 box discrepancy.  Inside a box the
    lhs point is a uniform atom of that box and the rhs point is drawn from
    the rhs law restricted to the box.  One-dimensional urns only.
    """
    model = state.model
    _check_mode(mode, model)
    if model.d != 1:
        raise ValueError("couple_samples works on one-dimensional urns")
    t, t1, p = schedule_window(n)
    _need(state, t1)
    lhs_pts = state.colors[:t1, 0]
    lhs = boxify(AtomicMeasure.uniform(lhs_pts), h)
    if mode == EXACT:
        rhs = rhs_box_law(state, n, h, mode=EXACT, support=lhs.index[:, 0])
        stay_pool = _AtomPool(state.colors[:t, 0], rhs.index[:, 0], h)
        stay = boxify(AtomicMeasure.uniform(state.colors[:t]), h)
        stay_mass = (1.0 - p) * rhs_lookup(rhs, stay)
    else:
        mc = _rhs_draws(state, t, p, mc_samples, rng)[:, 0]
        rhs0 = boxify(AtomicMeasure.uniform(mc), h)
        keys = _union_keys(rhs0.index, lhs.index)
        rhs = BoxedMeasure(h, keys[:, None], _spread(rhs0, keys))
        mc_pool = _AtomPool(mc, keys, h)
    keys = rhs.index[:, 0]
    P = rhs.mass
    Q = _spread(lhs, keys)
    lhs_pool = _AtomPool(lhs_pts, keys, h)
    common = np.minimum(P, Q)
    pos = P - common
    neg = Q - common
    omega = math.fsum(common)
    rest_p = math.fsum(pos) + rhs.overflow
    rest_q = math.fsum(neg)
    mismatch_prob = 1.0 - omega

    same = rng.random(k) < omega
    ns = int(same.sum())
    nd = k - ns
    a = np.empty(k)
    b = np.empty(k)
    a_slot = np.full(k, -1)
    b_slot = np.full(k, -1)
    if ns:
        s = rng.choice(len(keys), size=ns, p=common / omega)
        a_slot[same] = s
        b_slot[same] = s
    if nd:
        cat = np.append(pos, rhs.overflow) / rest_p
        a_slot[~same] = rng.choice(len(keys) + 1, size=nd, p=cat / cat.sum())
        b_slot[~same] = rng.choice(len(keys), size=nd, p=neg / rest_q)
    b[:] = lhs_pool.draw(b_slot, rng)

    inside = a_slot < len(keys)
    out = ~inside
    if out.any():
        a[out] = _draw_conv_outside(model, state.colors[:t, 0], keys, int(out.sum()), h, rng)
    if mode == EXACT:
        slots = a_slot[inside]
        # split the rhs mass of each box between the kept atoms and the convolution
        from_stay = rng.random(len(slots)) * P[slots] < stay_mass[slots]
        vals = np.empty(len(slots))
        if from_stay.any():
            vals[from_stay] = stay_pool.draw(slots[from_stay], rng)
        if (~from_stay).any():
            vals[~from_stay] = _draw_conv_in_boxes(model, state.colors[:t, 0], keys, slots[~from_stay], h, rng)
        a[inside] = vals
    else:
        a[inside] = mc_pool.draw(a_slot[inside], rng)
    matched = box_indices(a, h)[:, 0] == box_indices(b, h)[:, 0]
    return CoupledSamples(a[:, None], b[:, None], matched, mismatch_prob)


def _spread(measure, keys):
    """Masses of ``measure`` laid out on sorted 1-d ``keys`` (must cover its boxes)."""
    out = np.zeros(len(keys))
    pos = np.searchsorted(keys, measure.index[:, 0])
    if np.any(keys[np.minimum(pos, len(keys) - 1)] != measure.index[:, 0]):
        raise ValueError("keys do not cover the measure's boxes")
    out[pos] = measure.mass
    return out


def rhs_lookup(rhs, part):
    """Mass of ``part`` spread over the boxes of ``rhs`` (zeros elsewhere)."""
    return _spread(part, rhs.index[:, 0])


# record-representation tails ---------------------------------------------------


@dataclass(frozen=True)
class TailEstimate:
    """Monte Carlo ``P(|X_n| > log(n)**gamma)`` and its union-bound decomposition."""

    estimate: float
    radius95: float
    many_terms: float
    big_term: float
    threshold: float

    @property
    def decomposition_bound(self):
        return self.many_terms + self.big_term


def tail_record_estimate(model, n, gamma, samples, rng):
    """Tail frequency of the record representation at radius ``log(n)**gamma``.

    Also estimates the two pieces of the union bound: more than ``log(n)**2``
    records, or ``log(n)**2`` times the chance that one displacement exceeds
    ``log(n)**(gamma - 2)``.
    """
    if n < 1 or samples < 1:
        raise ValueError("need n >= 1 and samples >= 1")
    ln = math.log(n) if n > 1 else 0.0
    thr = ln**gamma
    values, counts = record_rep_samples(model, n, samples, rng)
    norms = np.max(np.abs(values), axis=1)
    est = float(np.mean(norms > thr))
    many = float(np.mean(counts > ln**2))
    single = np.max(np.abs(sample_displacement(model, rng, samples)), axis=1)
    big = ln**2 * float(np.mean(single > ln ** (gamma - 2)))
    z = 1.96  # Wilson score half-width, nonzero even when no exceedance is seen
    radius = z * math.sqrt(est * (1.0 - est) / samples + z * z / (4.0 * samples * samples)) / (1.0 + z * z / samples)
    return TailEstimate(est, radius, many, big, thr)
