"""Subdivision times, step probabilities, the auxiliary walk, and Bernstein bounds.

The schedule is ``T_n = floor(exp(c * n**kappa))`` with ``c = 3`` and
``kappa = 1/3`` by default.  ``T_n`` is kept as an exact integer while it is
below ``2**63``; past that cutoff everything is computed in log space and
the floor is dropped.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np

from .displacement import sample_displacement

__all__ = [
    "Schedule",
    "AuxWalk",
    "big_time",
    "log_big_time",
    "representability_cutoff",
    "step_prob",
    "step_probs",
    "sum_step_probs",
    "sample_aux_walk",
    "sample_aux_sums",
    "bernstein_threshold",
    "bernstein_bound",
    "bernstein_exceedance",
]

C_DEFAULT = 3
KAPPA_DEFAULT = Fraction(1, 3)
_DIGITS = 40
_INT64_LIMIT = 2**63


def _frac(x):
    return x if isinstance(x, Fraction) else Fraction(x).limit_denominator(10**9)


@lru_cache(maxsize=None)
def _exp_hp(n, c, kappa):
    with mpmath.workdps(_DIGITS):
        if kappa == Fraction(1, 3):
            root = mpmath.cbrt(n)
        else:
            root = mpmath.power(n, mpmath.mpf(kappa.numerator) / kappa.denominator)
        return mpmath.exp(mpmath.mpf(c.numerator) / c.denominator * root)


def log_big_time(n, c=C_DEFAULT, kappa=KAPPA_DEFAULT):
    """``c * n**kappa``, vectorised; uses ``cbrt`` for the cube-root default."""
    n = np.asarray(n, dtype=np.float64)
    if np.any(n < 1):
        raise ValueError("schedule index starts at 1")
    root = np.cbrt(n) if _frac(kappa) == Fraction(1, 3) else n ** float(kappa)
    out = float(c) * root
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=None)
def _cutoff(c, kappa):
    # largest n with exp(c n^kappa) < 2^63
    guess = int((math.log(_INT64_LIMIT) / float(c)) ** (1.0 / float(kappa)))
    n = max(guess - 2, 0)
    while n >= 1 and _exp_hp(n, c, kappa) >= _INT64_LIMIT:
        n -= 1
    while _exp_hp(n + 1, c, kappa) < _INT64_LIMIT:
        n += 1
    return n


def representability_cutoff(c=C_DEFAULT, kappa=KAPPA_DEFAULT):
    """Largest ``n`` whose ``T_n`` fits below ``2**63`` (3084 for the defaults)."""
    return _cutoff(_frac(c), _frac(kappa))


@lru_cache(maxsize=None)
def _big_time(n, c, kappa):
    if n < 1:
        raise ValueError("schedule index starts at 1")
    if n > _cutoff(c, kappa):
        raise ValueError(
            f"T_{n} exceeds 2**63 (cutoff n = {_cutoff(c, kappa)}); use log_big_time"
        )
    # int() truncates the 40-digit value exactly; mpmath.floor would round
    # its result to the ambient 53-bit precision
    return int(_exp_hp(n, c, kappa))


def big_time(n, c=C_DEFAULT, kappa=KAPPA_DEFAULT):
    """Exact ``floor(exp(c n**kappa))`` via 40-digit arithmetic."""
    return _big_time(int(n), _frac(c), _frac(kappa))


def _log_gap(n, c, kappa):
    # c((n+1)^k - n^k) without cancellation
    n = np.asarray(n, dtype=np.float64)
    return float(c) * n ** float(kappa) * np.expm1(float(kappa) * np.log1p(1.0 / n))


def step_prob(n, c=C_DEFAULT, kappa=KAPPA_DEFAULT):
    """``p_n = (T_{n+1} - T_n) / T_{n+1}``.

    Exact rational (rounded once) while ``T_{n+1}`` is representable, then
    ``1 - exp(log T_n - log T_{n+1})`` with the floors ignored.
    """
    n = int(n)
    if n < 1:
        raise ValueError("schedule index starts at 1")
    if n + 1 <= representability_cutoff(c, kappa):
        a, b = big_time(n, c, kappa), big_time(n + 1, c, kappa)
        return float(Fraction(b - a, b))
    return float(-np.expm1(-_log_gap(n, c, kappa)))


def step_probs(n_max, c=C_DEFAULT, kappa=KAPPA_DEFAULT):
    """Array ``[p_1, ..., p_{n_max}]`` (cached and read-only)."""
    return _step_probs(int(n_max), _frac(c), _frac(kappa))


@lru_cache(maxsize=64)
def _step_probs(n_max, c, kappa):
    cut = representability_cutoff(c, kappa)
    m = min(n_max, cut - 1)
    exact = [step_prob(i, c, kappa) for i in range(1, m + 1)]
    rest = np.arange(m + 1, n_max + 1, dtype=np.float64)
    approx = -np.expm1(-_log_gap(rest, c, kappa)) if rest.size else np.empty(0)
    out = np.concatenate([np.array(exact, dtype=np.float64), approx])
    out.setflags(write=False)
    return out


def sum_step_probs(n, c=C_DEFAULT, kappa=KAPPA_DEFAULT):
    """``sum_{i<n} p_i`` (the mean number of nonzero increments in ``S_n``)."""
    if n <= 1:
        return 0.0
    return math.fsum(step_probs(n - 1, c, kappa))


@dataclass(frozen=True, eq=False)
class Schedule:
    """Tabulated schedule for ``n = 1..n_max``; ``T[k]`` is None past the cutoff."""

    n_max: int
    c: Fraction = C_DEFAULT
    kappa: Fraction = KAPPA_DEFAULT
    log_T: np.ndarray = field(init=False, repr=False)
    T: tuple = field(init=False, repr=False)
    p: np.ndarray = field(init=False, repr=False)
    cutoff: int = field(init=False)

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        c, kappa = _frac(self.c), _frac(self.kappa)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "kappa", kappa)
        cut = representability_cutoff(c, kappa)
        ns = np.arange(1, self.n_max + 1)
        object.__setattr__(self, "cutoff", cut)
        object.__setattr__(self, "log_T", np.atleast_1d(log_big_time(ns, c, kappa)))
        object.__setattr__(
            self, "T", tuple(big_time(i, c, kappa) if i <= cut else None for i in range(1, self.n_max + 1))
        )
        object.__setattr__(self, "p", step_probs(self.n_max, c, kappa))

    def sum_p(self, n):
        """``sum_{i<n} p_i`` for ``n <= n_max + 1``."""
        if n > self.n_max + 1:
            raise ValueError("n beyond the tabulated range")
        return math.fsum(self.p[: max(n - 1, 0)])

    def rows(self):
        """``(n, T_n or None, log T_n, p_n, sum_{i<n} p_i, sum/log T_n)`` tuples."""
        partial = np.concatenate([[0.0], np.cumsum(self.p)])
        for k in range(self.n_max):
            s = partial[k]
            yield (k + 1, self.T[k], float(self.log_T[k]), float(self.p[k]), float(s), float(s / self.log_T[k]))


# auxiliary walk ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AuxWalk:
    """Increments ``Y_i = R_i D~_i`` for ``i < n`` and their sum ``S_n``."""

    increments: np.ndarray = field(repr=False)
    indicators: np.ndarray = field(repr=False)

    @property
    def partial_sum(self):
        return self.increments.sum(axis=0)


def sample_aux_walk(model, n, rng, c=C_DEFAULT, kappa=KAPPA_DEFAULT):
    """One path ``Y_1, ..., Y_{n-1}`` with ``R_i ~ Bernoulli(p_i)``."""
    if n < 2:
        raise ValueError("the auxiliary walk needs n >= 2")
    p = step_probs(n - 1, c, kappa)
    r = rng.random(n - 1) < p
    incr = np.zeros((n - 1, model.d))
    incr[r] = sample_displacement(model, rng, int(r.sum()))
    return AuxWalk(incr, r)


def sample_aux_sums(model, n, size, rng, c=C_DEFAULT, kappa=KAPPA_DEFAULT, chunk=2_000_000):
    """``size`` independent draws of ``S_n``; returns ``(sums, counts)``."""
    if n < 2:
        raise ValueError("the auxiliary walk needs n >= 2")
    p = step_probs(n - 1, c, kappa)
    rows = max(1, chunk // (n - 1))
    counts = np.empty(size, dtype=np.int64)
    for lo in range(0, size, rows):
        hi = min(size, lo + rows)
        counts[lo:hi] = (rng.random((hi - lo, n - 1)) < p).sum(axis=1)
    sums = np.zeros((size, model.d))
    nz = counts > 0
    total = int(counts.sum())
    if total:
        deltas = sample_displacement(model, rng, total)
        starts = np.concatenate(([0], np.cumsum(counts[nz])[:-1]))
        sums[nz] = np.add.reduceat(deltas, starts, axis=0)
    return sums, counts


# Bernstein -----------------------------------------------------------------


def bernstein_threshold(v, t):
    """``sqrt(2 v t) + t``."""
    if v < 0 or t < 0:
        raise ValueError("v and t must be nonnegative")
    return math.sqrt(2.0 * v * t) + t


def bernstein_bound(t):
    """``exp(-t)``: bound on ``P(|S| >= sqrt(2vt) + t)`` for centred Bernoulli sums."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return math.exp(-t)


def bernstein_exceedance(p, t, trials, rng, v=None):
    """Monte Carlo frequency of ``|sum_i (B_i - p_i)| >= bernstein_threshold(v, t)``.

    ``p`` lists the Bernoulli parameters; ``v`` defaults to ``sum(p)``.
    Equal parameters are grouped and drawn as binomials, which is the same
    law as the individual Bernoulli sum.
    """
    p = np.asarray(p, dtype=np.float64)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("Bernoulli parameters must lie in [0, 1]")
    mean = math.fsum(p)
    v = mean if v is None else v
    if v < mean:
        raise ValueError("v must dominate sum(p)")
    vals, mult = np.unique(p, return_counts=True)
    s = np.zeros(trials)
    for pv, k in zip(vals, mult):
        s += rng.binomial(int(k), pv, size=trials)
    return float(np.mean(np.abs(s - mean) >= bernstein_threshold(v, t)))
