"""Flat ``section.key = value`` configuration used by the command-line tool.

One file holds every tunable: map construction, cost ranges, motion model,
state-space tolerances, planner settings and benchmark defaults. Lines are
``key = value`` pairs, ``#`` starts a comment, and ``none`` means "derive
from other settings". Every value is validated by the dataclass that owns it
when the config is loaded.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field, fields, replace

from .errors import InvalidConfig
from .planners import PlannerConfig
from .state_space import MotionModel, SpaceParams
from .surfel_map import CostConfig, MapConfig


@dataclass(frozen=True)
class BenchSettings:
    problems: int = 50
    d_min: float = 15.0
    d_max: float = 40.0
    verify_timeout: float = 30.0
    timeout: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.problems < 1:
            raise InvalidConfig("bench.problems must be >= 1")
        if not 0 <= self.d_min < self.d_max:
            raise InvalidConfig("need 0 <= bench.d_min < bench.d_max")
        if self.verify_timeout <= 0 or self.timeout <= 0:
            raise InvalidConfig("bench timeouts must be positive")


@dataclass(frozen=True)
class PlanSettings:
    timeout: float = 60.0
    goal_tolerance_exact: float = 0.2
    goal_tolerance_approx: float = 10.0


# the CLI plans with an iteration budget so output does not depend on machine speed
_CLI_PLANNER = PlannerConfig(max_iterations=1000)

SECTIONS = {
    "map": MapConfig,
    "cost": CostConfig,
    "model": MotionModel,
    "space": SpaceParams,
    "planner": PlannerConfig,
    "plan": PlanSettings,
    "bench": BenchSettings,
}

_COMMENTS = {
    "map": "surfel construction: voxel size d_s, elevation d_e (robot centre-of-gravity height), waffle step",
    "cost": "critic weights, critic ranges (also the traversability limits) and max cost M",
    "model": "motion model: euclidean-se2 or dubins; distance weights",
    "space": "state-space tolerances; none = derived from the map voxel size",
    "planner": "planner: rrt-star or prm-star; objective: length, scoo or blend",
    "plan": "single-query settings for the plan command",
    "bench": "random-problem benchmark defaults",
}


@dataclass(frozen=True)
class Config:
    map: MapConfig = field(default_factory=MapConfig)
    cost: CostConfig = field(default_factory=CostConfig)
    model: MotionModel = field(default_factory=MotionModel)
    space: SpaceParams = field(default_factory=SpaceParams)
    planner: PlannerConfig = _CLI_PLANNER
    plan: PlanSettings = field(default_factory=PlanSettings)
    bench: BenchSettings = field(default_factory=BenchSettings)

    def items(self):
        for section in SECTIONS:
            obj = getattr(self, section)
            for f in fields(obj):
                yield f"{section}.{f.name}", getattr(obj, f.name)

    def dumps(self) -> str:
        out = ["# surfelnav configuration (every key optional; shown values are the defaults in effect)"]
        current = None
        for key, value in self.items():
            section = key.split(".")[0]
            if section != current:
                out += ["", f"# {_COMMENTS[section]}"]
                current = section
            out.append(f"{key} = {_format(value)}")
        return "\n".join(out) + "\n"


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _base_type(cls, name: str):
    hint = typing.get_type_hints(cls)[name]
    args = [a for a in typing.get_args(hint) if a is not type(None)]
    return args[0] if args else hint


def _parse(cls, name: str, text: str):
    text = text.strip()
    optional = type(None) in typing.get_args(typing.get_type_hints(cls)[name])
    if text.lower() == "none":
        if optional:
            return None
        raise InvalidConfig(f"{name} cannot be none")
    kind = _base_type(cls, name)
    try:
        if kind is bool:
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise InvalidConfig(f"{name}: cannot parse {text!r} as {kind.__name__}") from None
    return text


def parse_assignments(pairs: list[tuple[str, str]], base: Config | None = None) -> Config:
    """Apply ``(key, value)`` string pairs on top of ``base`` (defaults if omitted)."""
    base = base or Config()
    updates: dict[str, dict] = {}
    for key, value in pairs:
        section, _, name = key.strip().partition(".")
        cls = SECTIONS.get(section)
        if cls is None or name not in {f.name for f in fields(cls)}:
            raise InvalidConfig(f"unknown config key {key.strip()!r}")
        updates.setdefault(section, {})[name] = _parse(cls, name, value)
    kwargs = {}
    for section, values in updates.items():
        try:
            kwargs[section] = replace(getattr(base, section), **values)
        except TypeError as exc:
            raise InvalidConfig(f"[{section}] {exc}") from None
    return dataclasses.replace(base, **kwargs)


def loads(text: str, base: Config | None = None) -> Config:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise InvalidConfig(f"config line {lineno}: expected 'key = value', got {raw.strip()!r}")
        pairs.append((key, value))
    return parse_assignments(pairs, base)


def load(path) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text)


def split_assignment(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep:
        raise InvalidConfig(f"--set expects key=value, got {text!r}")
    return key, value
