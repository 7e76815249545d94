"""Run configuration: a nested YAML document mapped onto dataclasses.

Unknown keys are rejected with their full path (``mesh.nxx``), so typos in
long-running setups fail before any computation starts.  ``to_dict`` and
``load_config``/``dump_config`` round-trip exactly.
"""

from __future__ import annotations

import dataclasses
import math
import types
import typing
from dataclasses import dataclass, field

import yaml

from .errors import ConfigurationError
from .mesh import SIDE_NAMES, validate_tag

__all__ = [
    "RunConfig",
    "GasSection",
    "MeshSection",
    "InitialCondition",
    "BoundarySection",
    "TimeSection",
    "StatisticsSection",
    "OutputSection",
    "ReferenceSection",
    "WakeSection",
    "PsdSection",
    "BenchSection",
    "load_config",
    "parse_config",
    "dump_config",
    "MESH_GENERATORS",
    "INITIAL_CONDITIONS",
]

MESH_GENERATORS = ("box", "deformed_box", "channel", "tgv", "file")
INITIAL_CONDITIONS = ("uniform", "taylor_green", "density_wave", "isentropic_vortex", "couette")


@dataclass
class GasSection:
    mach: float = 0.1
    reynolds: float = math.inf
    gamma: float = 1.4
    prandtl: float = 0.72
    prandtl_turbulent: float = 0.9


@dataclass
class MeshSection:
    generator: str = "tgv"
    path: str | None = None
    nx: int = 4
    ny: int = 4
    nz: int = 4
    extents: list | None = None
    periodic: list = field(default_factory=lambda: [True, True, True])
    geo_order: int = 1
    amplitude: float = 0.0
    grading: float = 1.0
    boundary_tags: dict = field(default_factory=dict)


@dataclass
class InitialCondition:
    kind: str = "taylor_green"
    velocity: list = field(default_factory=lambda: [1.0, 0.0, 0.0])
    amplitude: float = 0.1
    pressure: float | None = None
    perturbation: float = 0.0
    noise: float = 0.0


@dataclass
class BoundarySection:
    kind: str = "FreeSlipWall"
    rho: float | None = None
    velocity: list | None = None
    pressure: float | None = None
    wall_velocity: list = field(default_factory=lambda: [0.0, 0.0, 0.0])


@dataclass
class TimeSection:
    t_end: float = 48.0
    cfl: float = 0.5
    fixed_dt: float | None = None
    max_steps: int | None = None


@dataclass
class StatisticsSection:
    start: float = 40.0
    duration: float = 8.0
    interval_steps: int = 1


@dataclass
class OutputSection:
    directory: str = "output"
    checkpoint_interval: float | None = None
    force_patches: list = field(default_factory=list)
    surface_patches: list = field(default_factory=list)
    vtk: bool = True


@dataclass
class ReferenceSection:
    chord: float = 1.0
    u_inf: float = 1.0
    rho_inf: float = 1.0
    area: float = 1.0
    drag_axis: list = field(default_factory=lambda: [1.0, 0.0, 0.0])
    lift_axis: list = field(default_factory=lambda: [0.0, 1.0, 0.0])
    span_axis: int = 2


@dataclass
class WakeSection:
    stations: list = field(default_factory=list)
    n_points: int = 101
    y_range: list | None = None
    z: float | None = None


@dataclass
class PsdSection:
    segment_length: int = 62500
    overlap: float = 0.5
    window: str = "Hamming"
    peaks: int = 3


@dataclass
class BenchSection:
    formulations: list = field(default_factory=lambda: ["eLES", "iLES"])
    start: float = 0.5
    increment: float = 0.1
    probe_steps: int = 100
    warmup: int = 5
    max_rungs: int = 200


@dataclass
class RunConfig:
    case: str = "tgv"
    formulation: str = "iLES"
    order: int = 4
    interface: str | None = None
    c_v: float = 0.07
    sgs: bool = True
    seed: int = 0
    threads: int | None = None
    deterministic: bool = True
    gas: GasSection = field(default_factory=GasSection)
    mesh: MeshSection = field(default_factory=MeshSection)
    initial_condition: InitialCondition = field(default_factory=InitialCondition)
    boundary_conditions: dict = field(default_factory=dict)
    time: TimeSection = field(default_factory=TimeSection)
    statistics: StatisticsSection = field(default_factory=StatisticsSection)
    output: OutputSection = field(default_factory=OutputSection)
    reference: ReferenceSection = field(default_factory=ReferenceSection)
    wake: WakeSection = field(default_factory=WakeSection)
    psd: PsdSection = field(default_factory=PsdSection)
    bench: BenchSection = field(default_factory=BenchSection)

    def validate(self):
        from .solver import Formulation  # noqa: PLC0415  (avoid import cycle at module load)

        Formulation.parse(self.formulation)
        _check(1 <= self.order <= 12, "order", f"must lie in [1, 12], got {self.order}")
        _check(self.mesh.generator in MESH_GENERATORS, "mesh.generator",
               f"unknown generator {self.mesh.generator!r}; expected one of {MESH_GENERATORS}")
        if self.mesh.generator == "file":
            _check(bool(self.mesh.path), "mesh.path", "is required when mesh.generator is 'file'")
        _check(self.mesh.geo_order <= self.order, "mesh.geo_order",
               f"({self.mesh.geo_order}) must not exceed the solution order ({self.order})")
        for side, tag in self.mesh.boundary_tags.items():
            _check(side in SIDE_NAMES, f"mesh.boundary_tags.{side}", f"unknown side; expected one of {SIDE_NAMES}")
            _wrap(validate_tag, f"mesh.boundary_tags.{side}", tag)
        for tag, bc in self.boundary_conditions.items():
            _wrap(validate_tag, f"boundary_conditions.{tag}", tag)
            _wrap(validate_tag, f"boundary_conditions.{tag}.kind", bc.kind)
        _check(self.initial_condition.kind in INITIAL_CONDITIONS, "initial_condition.kind",
               f"unknown kind {self.initial_condition.kind!r}; expected one of {INITIAL_CONDITIONS}")
        _check(self.time.t_end > 0, "time.t_end", "must be positive")
        _check(self.time.cfl > 0, "time.cfl", "must be positive")
        st = self.statistics
        _check(st.start >= 0 and st.duration >= 0, "statistics", "start and duration must be non-negative")
        _check(st.start + st.duration <= self.time.t_end * (1 + 1e-12), "statistics",
               f"window [{st.start}, {st.start + st.duration}] CTU lies outside the run window [0, {self.time.t_end}] CTU")
        _check(st.interval_steps >= 1, "statistics.interval_steps", "must be >= 1")
        _check(self.gas.gamma > 1.0, "gas.gamma", "must exceed 1")
        _check(self.gas.mach > 0.0 and self.gas.reynolds > 0.0, "gas", "mach and reynolds must be positive")
        _check(self.psd.segment_length >= 2, "psd.segment_length", "must be >= 2")
        _check(0.0 <= self.psd.overlap < 1.0, "psd.overlap", "must lie in [0, 1)")
        _check(self.psd.peaks >= 1, "psd.peaks", "must be >= 1")
        _check(self.bench.probe_steps >= 1, "bench.probe_steps", "must be >= 1")
        _check(self.threads is None or self.threads >= 1, "threads", "must be >= 1")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)


def _check(ok, path, message):
    if not ok:
        raise ConfigurationError(f"{path}: {message}")


def _wrap(fn, path, *args):
    try:
        return fn(*args)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def _is_optional(tp):
    return isinstance(tp, types.UnionType) or typing.get_origin(tp) is typing.Union


def _coerce(value, tp, path):
    if _is_optional(tp):
        if value is None:
            return None
        inner = [a for a in typing.get_args(tp) if a is not type(None)][0]
        return _coerce(value, inner, path)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{path}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", ".inf"):
            return math.inf
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"{path}: expected a string, got {value!r}")
        return value
    if tp is list:
        if not isinstance(value, list):
            raise ConfigurationError(f"{path}: expected a list, got {value!r}")
        return value
    if tp is dict:
        if not isinstance(value, dict):
            raise ConfigurationError(f"{path}: expected a mapping, got {value!r}")
        return value
    return value


def _build(cls, data, path=""):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigurationError(
            f"unknown configuration key(s) {', '.join(where + str(k) for k in unknown)}; "
            f"allowed keys: {', '.join(sorted(names))}"
        )
    kwargs = {}
    for name in names & set(data):
        sub = f"{path}.{name}" if path else name
        if cls is RunConfig and name == "boundary_conditions":
            value = data[name] or {}
            if not isinstance(value, dict):
                raise ConfigurationError(f"{sub}: expected a mapping of tag -> boundary data")
            kwargs[name] = {str(k): _build(BoundarySection, v, f"{sub}.{k}") for k, v in value.items()}
        else:
            kwargs[name] = _coerce(data[name], hints[name], sub)
    return cls(**kwargs)


def parse_config(data):
    """Build and validate a :class:`RunConfig` from a (YAML-decoded) mapping."""
    return _build(RunConfig, data).validate()


def load_config(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: not valid YAML: {exc}") from exc
    return parse_config(data)


def dump_config(config, path=None):
    """Serialise ``config`` to YAML text (and write it to ``path`` if given)."""
    text = yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
