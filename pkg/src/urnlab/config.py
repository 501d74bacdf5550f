"""Experiment configuration: flat ``key = value`` text, parsed strictly."""

from dataclasses import dataclass, fields, replace

from .displacement import ModelSpecError, parse_model

__all__ = ["ConfigError", "ExperimentConfig", "EXPERIMENTS", "parse_config", "config_from_mapping"]

EXPERIMENTS = (
    "grow",
    "theorem-check",
    "coupling-check",
    "record-identity",
    "tv-identity",
    "schedule-table",
    "aux-walk-check",
)

MAX_BALLS = 10**7


class ConfigError(ValueError):
    """Bad configuration; ``line`` and ``key`` point at the culprit when known."""

    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    model: str = "cauchy(scale=1);d=1"
    seed: int = 0
    n: int = None
    n_values: tuple = ()
    n_from: int = None
    n_to: int = None
    m: int = None
    replicas: int = 1
    h: float = 0.05
    gamma: float = None
    mode: str = "exact-cdf"
    samples: int = 10_000
    mc_samples: int = 1_000_000
    workers: int = 1
    out: str = None
    checkpoint: str = None
    ks_threshold: float = None
    level: float = 1e-3
    min_pass_fraction: float = 0.8
    assert_trend: bool = False
    allow_large: bool = False

    @property
    def model_obj(self):
        return parse_model(self.model)

    def n_list(self):
        """The n values to sweep: ``n-values`` if given, else ``n-from..n-to``, else ``n``."""
        if self.n_values:
            return list(self.n_values)
        if self.n_from is not None or self.n_to is not None:
            lo = self.n_from if self.n_from is not None else self.n_to
            hi = self.n_to if self.n_to is not None else self.n_from
            return list(range(lo, hi + 1))
        if self.n is not None:
            return [self.n]
        return []

    def with_overrides(self, **kw):
        return _validate(replace(self, **{k: v for k, v in kw.items() if v is not None}))


def _to_int(raw):
    return int(raw.replace("_", ""))


def _to_float(raw):
    return float(raw)


def _to_bool(raw):
    low = raw.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _to_int_tuple(raw):
    return tuple(_to_int(p.strip()) for p in raw.split(",") if p.strip())


_PARSERS = {
    "experiment": str,
    "model": str,
    "seed": _to_int,
    "n": _to_int,
    "n_values": _to_int_tuple,
    "n_from": _to_int,
    "n_to": _to_int,
    "m": _to_int,
    "replicas": _to_int,
    "h": _to_float,
    "gamma": _to_float,
    "mode": str,
    "samples": _to_int,
    "mc_samples": _to_int,
    "workers": _to_int,
    "out": str,
    "checkpoint": str,
    "ks_threshold": _to_float,
    "level": _to_float,
    "min_pass_fraction": _to_float,
    "assert_trend": _to_bool,
    "allow_large": _to_bool,
}
assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)}


def _field_name(key):
    return key.strip().replace("-", "_")


def parse_config(text, experiment=None):
    """Parse config text.  Blank lines and ``#`` comments are ignored.

    ``experiment`` (e.g. from the command line) fills in or must agree with
    the ``experiment`` key.
    """
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError("expected 'key = value'", line=lineno)
        name = _field_name(key)
        if name not in _PARSERS:
            raise ConfigError("unknown key", line=lineno, key=key.strip())
        if name in values:
            raise ConfigError(f"duplicate key (first set on line {lines[name]})", line=lineno, key=key.strip())
        value = value.strip()
        if not value:
            raise ConfigError("empty value", line=lineno, key=key.strip())
        try:
            values[name] = _PARSERS[name](value)
        except ValueError as exc:
            raise ConfigError(str(exc), line=lineno, key=key.strip()) from None
        lines[name] = lineno
    if not values and experiment is None:
        raise ConfigError("empty configuration")
    if experiment is not None:
        if "experiment" in values and values["experiment"] != experiment:
            raise ConfigError(
                f"config says {values['experiment']!r} but {experiment!r} was requested",
                line=lines["experiment"],
                key="experiment",
            )
        values["experiment"] = experiment
    return config_from_mapping(values, lines)


def config_from_mapping(values, lines=None):
    lines = lines or {}
    if "experiment" not in values:
        raise ConfigError("missing required key", key="experiment")
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return _validate(cfg, lines)


def _validate(cfg, lines=None):
    lines = lines or {}

    def fail(name, msg):
        raise ConfigError(msg, line=lines.get(name), key=name.replace("_", "-"))

    if cfg.experiment not in EXPERIMENTS:
        fail("experiment", f"unknown experiment {cfg.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    try:
        parse_model(cfg.model)
    except ModelSpecError as exc:
        fail("model", str(exc))
    if not 0 <= cfg.seed < 2**64:
        fail("seed", "seed must be a 64-bit unsigned integer")
    for name in ("n", "n_from", "n_to", "m", "replicas", "samples", "mc_samples", "workers"):
        v = getattr(cfg, name)
        if v is not None and v <= 0:
            fail(name, "must be positive")
    for name in ("h", "gamma", "ks_threshold", "level"):
        v = getattr(cfg, name)
        if v is not None and not v > 0:
            fail(name, "must be positive")
    if any(v <= 0 for v in cfg.n_values):
        fail("n_values", "must be positive")
    if not 0 < cfg.min_pass_fraction <= 1:
        fail("min_pass_fraction", "must lie in (0, 1]")
    if not cfg.level < 1:
        fail("level", "must be below 1")
    if cfg.mode not in ("exact-cdf", "monte-carlo"):
        fail("mode", "must be exact-cdf or monte-carlo")
    if cfg.n_from is not None and cfg.n_to is not None and cfg.n_from > cfg.n_to:
        fail("n_from", "n-from exceeds n-to")
    if not cfg.allow_large:
        for name in ("n", "m"):
            v = getattr(cfg, name)
            if v is not None and v > MAX_BALLS:
                fail(name, f"more than {MAX_BALLS} balls; set allow-large = true to override")
        if cfg.experiment in ("theorem-check", "record-identity", "grow") and any(v > MAX_BALLS for v in cfg.n_list()):
            fail("n_values", f"more than {MAX_BALLS} balls; set allow-large = true to override")
    return cfg
