"""Single-ball-addition random-walk Polya urns.

Ball 1 gets colour ``X_1 = D_1``; ball ``i >= 2`` picks a parent ``U_i``
uniformly among the earlier balls and gets ``X_i = X_{U_i} + D_i``.

Indexing: balls are 0-based in memory.  ``UrnState.parents[i - 1]`` is the
0-based parent of 0-based ball ``i``, so it lies in ``{0, ..., i - 1}``.
Checkpoint files use the 1-based convention ``1 <= U_i <= i - 1``.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from .displacement import DisplacementModel, parse_model, sample_displacement

__all__ = [
    "UrnState",
    "RecordSample",
    "empty_urn",
    "grow",
    "simulate_urn",
    "uniform_ball_samples",
    "record_rep_sample",
    "record_rep_samples",
    "record_counts",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
    "CheckpointVersionError",
    "MalformedCheckpoint",
    "TruncatedCheckpoint",
    "InvariantViolation",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_VERSION = 1


@dataclass(frozen=True, eq=False)
class UrnState:
    """A realised urn.  Treat the arrays as read-only."""

    model: DisplacementModel
    seed: int
    colors: np.ndarray = field(repr=False)
    parents: np.ndarray = field(repr=False)

    def __post_init__(self):
        colors = np.asarray(self.colors, dtype=np.float64)
        if colors.ndim != 2 or colors.shape[1] != self.model.d:
            raise ValueError(f"colors must have shape (n, {self.model.d})")
        parents = np.asarray(self.parents, dtype=np.int64)
        if parents.shape != (max(len(colors) - 1, 0),):
            raise ValueError("need exactly n - 1 parent indices")
        colors.setflags(write=False)
        parents.setflags(write=False)
        object.__setattr__(self, "colors", colors)
        object.__setattr__(self, "parents", parents)

    @property
    def n(self):
        return len(self.colors)

    @property
    def d(self):
        return self.model.d

    def check_parents(self):
        """Raise :class:`InvariantViolation` unless ``0 <= parents[i-1] <= i-1``."""
        if self.n <= 1:
            return
        i = np.arange(1, self.n)
        bad = np.nonzero((self.parents < 0) | (self.parents >= i))[0]
        if bad.size:
            k = int(bad[0])
            raise InvariantViolation(
                f"ball {k + 2} has parent {int(self.parents[k]) + 1}, outside 1..{k + 1}"
            )

    def prefix(self, m):
        """The urn restricted to its first ``m`` balls."""
        if not 0 <= m <= self.n:
            raise ValueError(f"prefix length {m} outside 0..{self.n}")
        return UrnState(self.model, self.seed, self.colors[:m], self.parents[: max(m - 1, 0)])

    def __eq__(self, other):
        if not isinstance(other, UrnState):
            return NotImplemented
        return (
            self.model == other.model
            and self.seed == other.seed
            and np.array_equal(self.parents, other.parents)
            and self.colors.shape == other.colors.shape
            and self.colors.tobytes() == other.colors.tobytes()
        )

    __hash__ = None


def empty_urn(model, seed=0):
    return UrnState(model, int(seed), np.empty((0, model.d)), np.empty(0, dtype=np.int64))


def _levels(parents_new, start):
    """Hop count from each new ball back to the known prefix ``[0, start)``.

    Pointer jumping: after ``k`` rounds every pointer has advanced ``2**k``
    generations, so the loop runs ``O(log depth)`` times.
    """
    level = np.ones(len(parents_new), dtype=np.int64)
    anc = parents_new.copy()
    live = anc >= start
    while live.any():
        j = anc - start
        nxt_level = level.copy()
        nxt_anc = anc.copy()
        nxt_level[live] += level[j[live]]
        nxt_anc[live] = anc[j[live]]
        level, anc = nxt_level, nxt_anc
        live = anc >= start
    return level


def grow(state, target_n, rng):
    """Append balls until the urn holds ``target_n`` of them.

    Draws the ``target_n - state.n`` displacements first, then the parent
    indices.  Colours are filled generation by generation (relative to the
    existing prefix), which evaluates exactly ``X_i = X_{U_i} + D_i`` in the
    same floating-point order as a ball-by-ball loop.
    """
    n0 = state.n
    target_n = int(target_n)
    if target_n < n0:
        raise ValueError(f"cannot shrink an urn from {n0} to {target_n} balls")
    if target_n == n0:
        return state
    model = state.model
    colors = np.empty((target_n, model.d))
    colors[:n0] = state.colors
    parents = np.empty(target_n - 1, dtype=np.int64)
    parents[: max(n0 - 1, 0)] = state.parents

    delta = sample_displacement(model, rng, target_n - n0)
    start = n0
    if n0 == 0:
        colors[0] = delta[0]
        delta = delta[1:]
        start = 1
    if target_n > start:
        idx = np.arange(start, target_n)
        par = rng.integers(0, idx)  # uniform on {0, ..., i-1}, unbiased
        parents[start - 1 :] = par
        level = _levels(par, start)
        order = np.argsort(level, kind="stable")
        sorted_levels = level[order]
        cuts = np.flatnonzero(np.diff(sorted_levels)) + 1
        for group in np.split(order, cuts):
            balls = idx[group]
            colors[balls] = colors[par[group]] + delta[group]
    return UrnState(model, state.seed, colors, parents)


def simulate_urn(model, n, seed, replica=0):
    """Grow a fresh urn to ``n`` balls from the ``(seed, replica, "urn")`` stream."""
    from .streams import derive_rng

    return grow(empty_urn(model, seed), n, derive_rng(seed, replica, "urn"))


def uniform_ball_samples(state, k, rng):
    """``k`` iid colours ``X_I`` with ``I`` uniform on the balls (with replacement)."""
    if k <= 0:
        raise ValueError("need k >= 1 samples")
    if state.n < 1:
        raise ValueError("urn is empty")
    return state.colors[rng.integers(0, state.n, size=int(k))]


# record representation ---------------------------------------------------


@dataclass(frozen=True)
class RecordSample:
    """``value = sum_i B_i D_i`` and ``count = sum_i B_i`` with ``B_i ~ Bernoulli(1/i)``."""

    value: np.ndarray
    count: int


def record_counts(n, size, rng):
    """Draws of ``sum_{i<=n} B_i`` with independent ``B_i ~ Bernoulli(1/i)``.

    Walks the successes directly: given a success at ``i``, no success in
    ``i+1..m`` has probability ``prod (1 - 1/k) = i/m``, so the next success is
    at ``ceil(i/V)`` for ``V`` uniform on (0, 1].
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    size = int(size)
    counts = np.ones(size, dtype=np.int64)  # B_1 = 1
    pos = np.ones(size, dtype=np.float64)
    live = np.arange(size)
    while live.size:
        v = 1.0 - rng.random(live.size)
        nxt = np.maximum(np.ceil(pos[live] / v), pos[live] + 1.0)
        hit = nxt <= n
        live = live[hit]
        pos[live] = nxt[hit]
        counts[live] += 1
    return counts


def record_rep_samples(model, n, size, rng):
    """Vectorised :func:`record_rep_sample`: returns ``(values, counts)``."""
    counts = record_counts(n, size, rng)
    total = int(counts.sum())
    deltas = sample_displacement(model, rng, total)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    values = np.add.reduceat(deltas, starts, axis=0)
    return values, counts


def record_rep_sample(model, n, rng):
    """One draw of the record representation of ``X_n``."""
    values, counts = record_rep_samples(model, n, 1, rng)
    return RecordSample(values[0], int(counts[0]))


# checkpoints ---------------------------------------------------------------


class CheckpointError(ValueError):
    """Base class for unreadable checkpoints."""


class CheckpointVersionError(CheckpointError):
    pass


class MalformedCheckpoint(CheckpointError):
    pass


class TruncatedCheckpoint(CheckpointError):
    pass


class InvariantViolation(CheckpointError):
    pass


_HEADER = ("version", "d", "model", "seed", "n")


def save_checkpoint(state, path):
    """Write ``state`` as versioned text; colours as hexadecimal float literals."""
    lines = [
        f"version={CHECKPOINT_VERSION}",
        f"d={state.d}",
        f"model={state.model.spec}",
        f"seed={state.seed}",
        f"n={state.n}",
    ]
    lines.extend(str(int(p) + 1) for p in state.parents)
    lines.extend(" ".join(float(v).hex() for v in row) for row in state.colors.tolist())
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
    os.replace(tmp, path)


def load_checkpoint(path):
    """Read a checkpoint written by :func:`save_checkpoint`."""
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise MalformedCheckpoint(f"{path}: empty file")
    header = {}
    for i, key in enumerate(_HEADER):
        if i >= len(lines):
            raise TruncatedCheckpoint(f"{path}: header ends before {key!r}")
        k, sep, v = lines[i].partition("=")
        if not sep or k != key:
            raise MalformedCheckpoint(f"{path}:{i + 1}: expected '{key}=...', got {lines[i]!r}")
        header[key] = v
        if key == "version" and v != str(CHECKPOINT_VERSION):
            raise CheckpointVersionError(
                f"{path}: checkpoint version {v!r}, this reader understands {CHECKPOINT_VERSION}"
            )
    try:
        d = int(header["d"])
        seed = int(header["seed"])
        n = int(header["n"])
        model = parse_model(header["model"])
    except ValueError as exc:
        raise MalformedCheckpoint(f"{path}: bad header value ({exc})") from None
    if model.d != d or n < 0:
        raise MalformedCheckpoint(f"{path}: header is inconsistent (d={d}, model d={model.d}, n={n})")

    body = lines[len(_HEADER) :]
    n_par = max(n - 1, 0)
    if len(body) < n_par + n:
        raise TruncatedCheckpoint(f"{path}: expected {n_par + n} body lines, found {len(body)}")
    if len(body) > n_par + n and any(s.strip() for s in body[n_par + n :]):
        raise MalformedCheckpoint(f"{path}: trailing data after {n} colours")
    try:
        parents = np.array([int(s) for s in body[:n_par]], dtype=np.int64) - 1
    except ValueError:
        raise MalformedCheckpoint(f"{path}: non-integer parent index") from None
    colors = np.empty((n, d))
    for j, row in enumerate(body[n_par : n_par + n]):
        fields = row.split()
        if len(fields) != d:
            raise MalformedCheckpoint(f"{path}: colour line {j + 1} has {len(fields)} fields, expected {d}")
        try:
            colors[j] = [float.fromhex(f) for f in fields]
        except ValueError:
            raise MalformedCheckpoint(f"{path}: colour line {j + 1} is not hexadecimal floats") from None
    state = UrnState(model, seed, colors, parents)
    state.check_parents()
    return state
