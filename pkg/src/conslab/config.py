"""Flat ``key = value`` experiment configs with ``a,b,c`` lists."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

EXPERIMENTS = ("scaling", "platoon", "loss", "recovery", "bounds")


def _ints(text: str) -> tuple[int, ...]:
    text = text.strip()
    return tuple(int(v) for v in text.split(",")) if text else ()


def _opt_int(text: str) -> int | None:
    return None if text.strip().lower() == "none" else int(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _zeta(text: str) -> float | None:
    return None if text.strip().lower() in ("auto", "none") else float(text)


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment. Node ids in files are 1-based; ``seeds`` counts runs
    starting at ``seed``."""

    experiment: str
    seed: int = 0
    seeds: int = 10
    N: int = 20
    sizes: tuple[int, ...] = (20, 100)
    d: int = 6
    degrees: tuple[int, ...] = (4, 6)
    family: str = "regular"
    a11: float = 1.07
    zeta: float | None = None
    ground_node: int = 1
    ground_step: int | None = 100
    recover_step: int = 150
    budgets: tuple[int, ...] = (1, 2)
    disturbance: bool = True
    window: tuple[int, ...] = (10, 20)
    horizon: int = 2600
    out: str = "out"

    def __post_init__(self):
        self.validate()

    @property
    def seed_list(self) -> list[int]:
        return list(range(self.seed, self.seed + self.seeds))

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {', '.join(EXPERIMENTS)}")
        if self.horizon < 1:
            raise ConfigError("horizon must be positive")
        if self.seeds < 0:
            raise ConfigError("seeds must be nonnegative")
        if self.N < 2 or any(n < 2 for n in self.sizes):
            raise ConfigError("networks need at least two nodes")
        if self.d < 1 or any(v < 1 for v in self.degrees):
            raise ConfigError("degrees must be positive")
        if self.family not in ("regular", "complete"):
            raise ConfigError(f"unknown family {self.family!r}")
        if self.zeta is not None and not 0 < self.zeta <= 1:
            raise ConfigError("zeta must lie in (0, 1]")
        if any(b < 0 for b in self.budgets):
            raise ConfigError("budgets must be nonnegative")
        if len(self.window) != 2 or not 0 <= self.window[0] < self.window[1]:
            raise ConfigError("window needs two steps start,stop with start < stop")
        sizes = (self.N,) if self.experiment in ("loss", "recovery") else self.sizes
        if not 1 <= self.ground_node <= min(sizes, default=self.N):
            raise ConfigError(f"ground_node {self.ground_node} outside 1..{min(sizes, default=self.N)}")
        if self.ground_step is not None and self.ground_step < 0:
            raise ConfigError("ground_step must be nonnegative")
        if self.experiment == "recovery":
            gs = self.ground_step if self.ground_step is not None else 0
            if not gs <= self.recover_step < self.horizon:
                raise ConfigError("recover_step must follow ground_step and precede the horizon")

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_fmt(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, **kw) -> "ExperimentConfig":
        try:
            return dataclasses.replace(self, **kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


_PARSERS = {
    "experiment": str.strip,
    "seed": int,
    "seeds": int,
    "N": int,
    "sizes": _ints,
    "d": int,
    "degrees": _ints,
    "family": str.strip,
    "a11": float,
    "zeta": _zeta,
    "ground_node": int,
    "ground_step": _opt_int,
    "recover_step": int,
    "budgets": _ints,
    "disturbance": _bool,
    "window": _ints,
    "horizon": int,
    "out": str.strip,
}

# per-experiment defaults that differ from the dataclass defaults
_EXPERIMENT_DEFAULTS = {
    "scaling": {"d": 4, "sizes": (20, 50, 100, 200, 500), "horizon": 1},
    "platoon": {"sizes": (20, 100), "horizon": 3000},
    "loss": {"horizon": 2600, "seeds": 20},
    "recovery": {"ground_step": 50, "horizon": 1500, "seeds": 20},
    "bounds": {"sizes": (10, 12, 14, 16), "seeds": 25},
}


def loads(text: str) -> ExperimentConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    if "experiment" not in values:
        raise ConfigError("missing required key 'experiment'")
    merged = {**_EXPERIMENT_DEFAULTS.get(values["experiment"], {}), **values}
    return ExperimentConfig(**merged)


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return loads(text)
