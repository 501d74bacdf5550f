"""Displacement laws in the stable regime.

A :class:`DisplacementModel` is a law on R^d whose coordinates are iid copies
of a one-dimensional symmetric law.  Each model knows its stable-regime data
(:class:`StableLimit`): the normalisation exponent ``alpha`` such that
``n**-alpha * (D_1 + ... + D_n)`` converges in law, the limit law itself, and a
tail exponent ``beta`` with ``P(|D| > n**beta) = o(1/n)``.

Models are written as ``kind(param=value,...);d=<int>``, for example
``cauchy(scale=1);d=1`` or ``symmetric-stable(index=1.5,scale=1);d=2``.
"""

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "CdfUnavailable",
    "ModelSpecError",
    "DisplacementModel",
    "StableLimit",
    "parse_model",
    "sample_displacement",
    "cdf_displacement",
    "coordinate_cdf",
    "coordinate_sf",
    "coordinate_ppf",
    "has_cdf",
    "stable_limit",
    "sample_limit",
    "stable_sampler",
]


class ModelSpecError(ValueError):
    """Malformed or invalid model specification."""


class CdfUnavailable(ValueError):
    """The model has no closed-form CDF (or d != 1)."""


# kind -> (parameter names, defaults)
KINDS = {
    "point-mass": (("c",), {"c": 0.0}),
    "gaussian": (("sigma",), {"sigma": 1.0}),
    "cauchy": (("scale",), {"scale": 1.0}),
    "symmetric-stable": (("index", "scale"), {"index": 2.0, "scale": 1.0}),
    "symmetric-pareto": (("a", "scale"), {"a": 1.5, "scale": 1.0}),
    "rademacher": ((), {}),
}


@dataclass(frozen=True)
class DisplacementModel:
    """A product law on R^d with iid symmetric one-dimensional coordinates.

    ``params`` is a tuple of ``(name, value)`` pairs in the kind's canonical
    order; use :func:`parse_model` or the ``DisplacementModel.<kind>``
    constructors rather than building it by hand.
    """

    kind: str
    params: tuple = ()
    d: int = 1
    beta_override: float = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelSpecError(f"unknown displacement kind {self.kind!r}")
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise ModelSpecError(f"dimension must be a positive integer, got {self.d!r}")
        names, _ = KINDS[self.kind]
        if tuple(k for k, _ in self.params) != names:
            raise ModelSpecError(f"{self.kind} expects parameters {names}")
        for k, v in self.params:
            if not math.isfinite(v):
                raise ModelSpecError(f"parameter {k} must be finite")
        p = dict(self.params)
        if self.kind == "gaussian" and p["sigma"] <= 0:
            raise ModelSpecError("gaussian sigma must be positive")
        if self.kind in ("cauchy", "symmetric-stable", "symmetric-pareto") and p["scale"] <= 0:
            raise ModelSpecError(f"{self.kind} scale must be positive")
        if self.kind == "symmetric-stable" and not 0 < p["index"] <= 2:
            raise ModelSpecError("stable index must lie in (0, 2]")
        if self.kind == "symmetric-pareto" and p["a"] <= 0:
            raise ModelSpecError("pareto tail index must be positive")
        if self.beta_override is not None and self.beta_override <= _min_beta(self):
            raise ModelSpecError(
                f"beta={self.beta_override} does not exceed the minimal exponent {_min_beta(self)}"
            )

    # constructors -----------------------------------------------------------
    @classmethod
    def point_mass(cls, c=0.0, d=1):
        return cls("point-mass", (("c", float(c)),), d)

    @classmethod
    def gaussian(cls, sigma=1.0, d=1):
        return cls("gaussian", (("sigma", float(sigma)),), d)

    @classmethod
    def cauchy(cls, scale=1.0, d=1):
        return cls("cauchy", (("scale", float(scale)),), d)

    @classmethod
    def symmetric_stable(cls, index, scale=1.0, d=1):
        return cls("symmetric-stable", (("index", float(index)), ("scale", float(scale))), d)

    @classmethod
    def symmetric_pareto(cls, a, scale=1.0, d=1):
        return cls("symmetric-pareto", (("a", float(a)), ("scale", float(scale))), d)

    @classmethod
    def rademacher(cls, d=1):
        return cls("rademacher", (), d)

    # ------------------------------------------------------------------------
    def param(self, name):
        return dict(self.params)[name]

    @property
    def beta(self):
        if self.beta_override is not None:
            return self.beta_override
        return _min_beta(self) + 1.0

    @property
    def is_lattice(self):
        """True when atoms repeat with positive probability."""
        return self.kind in ("point-mass", "rademacher")

    @property
    def spec(self):
        items = [f"{k}={_fmt(v)}" for k, v in self.params]
        if self.beta_override is not None:
            items.append(f"beta={_fmt(self.beta_override)}")
        return f"{self.kind}({','.join(items)});d={self.d}"

    def __str__(self):
        return self.spec


def _fmt(v):
    return repr(float(v)) if not float(v).is_integer() else str(int(v))


def _min_beta(model):
    """Infimum of the admissible tail exponents for ``model``."""
    kind = model.kind
    if kind in ("point-mass", "gaussian", "rademacher"):
        return 0.0
    if kind == "cauchy":
        return 1.0
    if kind == "symmetric-stable":
        s = model.param("index")
        return 0.0 if s == 2 else 1.0 / s
    return 1.0 / model.param("a")


_SPEC_RE = re.compile(r"^\s*([a-z][a-z-]*)\s*\((.*)\)\s*(?:;\s*d\s*=\s*(\S+)\s*)?$")


def parse_model(text):
    """Parse ``kind(param=value,...);d=<int>``.

    Missing parameters take the kind's defaults; ``beta=`` is accepted for
    every kind.  Unknown kinds or keys raise :class:`ModelSpecError`.
    """
    m = _SPEC_RE.match(text)
    if not m:
        raise ModelSpecError(f"cannot parse model spec {text!r}")
    kind, body, dtext = m.groups()
    if kind not in KINDS:
        raise ModelSpecError(f"unknown displacement kind {kind!r}")
    names, defaults = KINDS[kind]
    values = dict(defaults)
    beta = None
    seen = set()
    for item in filter(None, (s.strip() for s in body.split(","))):
        if "=" not in item:
            raise ModelSpecError(f"expected key=value, got {item!r}")
        key, raw = (s.strip() for s in item.split("=", 1))
        if key in seen:
            raise ModelSpecError(f"duplicate parameter {key!r}")
        seen.add(key)
        try:
            val = float(raw)
        except ValueError:
            raise ModelSpecError(f"parameter {key!r} is not a number: {raw!r}") from None
        if key == "beta":
            beta = val
        elif key in names:
            values[key] = val
        else:
            raise ModelSpecError(f"{kind} has no parameter {key!r}")
    d = 1
    if dtext is not None:
        try:
            d = int(dtext)
        except ValueError:
            raise ModelSpecError(f"dimension is not an integer: {dtext!r}") from None
    return DisplacementModel(kind, tuple((k, float(values[k])) for k in names), d, beta)


# sampling -----------------------------------------------------------------


def stable_sampler(index, scale, rng, size=None):
    """Symmetric ``index``-stable draws (Chambers-Mallows-Stuck).

    With ``V`` uniform on (-pi/2, pi/2) and ``W`` standard exponential,
    ``sin(s V) / cos(V)**(1/s) * (cos((1-s) V) / W)**((1-s)/s)`` is
    ``S_s(1, 0, 0)``.  Index 2 gives ``N(0, 2 scale**2)`` and index 1 the
    Cauchy law with the given scale.
    """
    s = float(index)
    if not 0 < s <= 2:
        raise ValueError(f"stable index must lie in (0, 2], got {index}")
    v = rng.uniform(-np.pi / 2, np.pi / 2, size=size)
    w = rng.standard_exponential(size=size)
    if s == 1:
        x = np.tan(v)
    elif s == 2:
        x = 2.0 * np.sin(v) * np.sqrt(w)
    else:
        x = (np.sin(s * v) / np.cos(v) ** (1.0 / s)) * (np.cos((1.0 - s) * v) / w) ** ((1.0 - s) / s)
    return scale * x


def _sample_coords(model, rng, shape):
    kind = model.kind
    if kind == "point-mass":
        return np.full(shape, model.param("c"))
    if kind == "gaussian":
        return rng.normal(0.0, model.param("sigma"), size=shape)
    if kind == "cauchy":
        return model.param("scale") * rng.standard_cauchy(size=shape)
    if kind == "symmetric-stable":
        return stable_sampler(model.param("index"), model.param("scale"), rng, size=shape)
    if kind == "symmetric-pareto":
        u = 1.0 - rng.random(size=shape)  # (0, 1]
        sign = np.where(rng.random(size=shape) < 0.5, -1.0, 1.0)
        return sign * model.param("scale") * u ** (-1.0 / model.param("a"))
    # rademacher
    return np.where(rng.random(size=shape) < 0.5, -1.0, 1.0)


def sample_displacement(model, rng, size=None):
    """Draw from ``model``: shape ``(d,)`` if ``size`` is None, else ``(size, d)``."""
    if size is None:
        return _sample_coords(model, rng, (model.d,))
    return _sample_coords(model, rng, (int(size), model.d))


# distribution functions -------------------------------------------------


def _effective_1d(model):
    """(kind, scale) of the coordinate law when it has a closed-form CDF."""
    kind = model.kind
    if kind == "point-mass":
        return "point-mass", model.param("c")
    if kind == "gaussian":
        return "gaussian", model.param("sigma")
    if kind == "cauchy":
        return "cauchy", model.param("scale")
    if kind == "symmetric-stable":
        s, scale = model.param("index"), model.param("scale")
        if s == 2:
            return "gaussian", scale * math.sqrt(2.0)
        if s == 1:
            return "cauchy", scale
    return None


def has_cdf(model):
    """Whether the coordinate law has a closed-form CDF."""
    return _effective_1d(model) is not None


def _require(model):
    eff = _effective_1d(model)
    if eff is None:
        raise CdfUnavailable(f"no closed-form CDF for {model.spec}")
    return eff


def coordinate_cdf(model, x):
    """CDF of one coordinate of ``model`` (any d), vectorised over ``x``."""
    kind, s = _require(model)
    x = np.asarray(x, dtype=float)
    if kind == "point-mass":
        return np.where(x >= s, 1.0, 0.0)
    if kind == "gaussian":
        return special.ndtr(x / s)
    return 0.5 + np.arctan(x / s) / np.pi


def coordinate_sf(model, x):
    """Survival function ``P(coordinate > x)``, accurate in the upper tail."""
    kind, s = _require(model)
    x = np.asarray(x, dtype=float)
    if kind == "point-mass":
        return np.where(x >= s, 0.0, 1.0)
    if kind == "gaussian":
        return special.ndtr(-x / s)
    return 0.5 - np.arctan(x / s) / np.pi


def coordinate_ppf(model, q):
    """Quantile function of one coordinate of ``model``."""
    kind, s = _require(model)
    q = np.asarray(q, dtype=float)
    if kind == "point-mass":
        return np.full_like(q, s)
    if kind == "gaussian":
        return s * special.ndtri(q)
    return s * np.tan(np.pi * (q - 0.5))


def cdf_displacement(model, x):
    """``P(D <= x)`` for a one-dimensional model with a closed-form CDF."""
    if model.d != 1:
        raise CdfUnavailable(f"CDF is only exposed for d = 1 (model has d = {model.d})")
    out = coordinate_cdf(model, x)
    return float(out) if np.ndim(out) == 0 else out


# stable regime -----------------------------------------------------------


@dataclass(frozen=True)
class StableLimit:
    """Normalisation exponent, limit law and tail exponent of a model."""

    alpha: float
    limit_law: DisplacementModel
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")


def _pareto_stable_scale(a, scale):
    # P(|D| > x) = (scale/x)**a must match C_a sigma**a x**-a with
    # C_a = (1 - a) / (Gamma(2 - a) cos(pi a / 2)).
    c_a = (1.0 - a) / (math.gamma(2.0 - a) * math.cos(math.pi * a / 2.0))
    return scale * c_a ** (-1.0 / a)


def stable_limit(model):
    """Stable-regime data for ``model``; coordinates of the limit are iid."""
    kind, d = model.kind, model.d
    if kind == "point-mass":
        alpha, law = 1.0, DisplacementModel.point_mass(model.param("c"), d)
    elif kind == "gaussian":
        alpha, law = 0.5, DisplacementModel.gaussian(model.param("sigma"), d)
    elif kind == "cauchy":
        alpha, law = 1.0, DisplacementModel.cauchy(model.param("scale"), d)
    elif kind == "rademacher":
        alpha, law = 0.5, DisplacementModel.gaussian(1.0, d)
    elif kind == "symmetric-stable":
        s = model.param("index")
        alpha, law = 1.0 / s, DisplacementModel.symmetric_stable(s, model.param("scale"), d)
    else:
        a, scale = model.param("a"), model.param("scale")
        if a > 2:
            alpha = 0.5
            law = DisplacementModel.gaussian(scale * math.sqrt(a / (a - 2.0)), d)
        elif a == 2:
            raise ValueError("symmetric-pareto with a = 2 needs a logarithmic correction; not a pure power normalisation")
        elif a == 1:
            alpha, law = 1.0, DisplacementModel.cauchy(scale * math.pi / 2.0, d)
        else:
            alpha = 1.0 / a
            law = DisplacementModel.symmetric_stable(a, _pareto_stable_scale(a, scale), d)
    return StableLimit(alpha=alpha, limit_law=law, beta=model.beta)


def sample_limit(limit, rng, size=None):
    """Draw from the limit law (shape as in :func:`sample_displacement`)."""
    return sample_displacement(limit.limit_law, rng, size)
