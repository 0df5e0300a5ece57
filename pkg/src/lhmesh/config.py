"""Declarative scenario description, stored as YAML.

Every physical parameter has a named key; defaults reproduce the point source
over a matched Drude slab in a 3 cm square.
"""
from __future__ import annotations

import copy
import dataclasses
import re
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from .constants import C0
from .engine import step_size


class _Loader(yaml.SafeLoader):
    pass


# YAML 1.1 reads "1e-3" (no dot) as a string; accept it as a float
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^[-+]?(?:[0-9][0-9_]*\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[0-9][0-9_]*[eE][-+]?[0-9]+
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


class ConfigError(ValueError):
    """Raised with the complete list of violated fields."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scenario config:\n  " + "\n  ".join(self.problems))


@dataclass
class DomainConfig:
    extent: list = field(default_factory=lambda: [0.03, 0.03])
    nodes_per_axis: int = 61


@dataclass
class PmlConfig:
    layers: int = 3
    order: int = 2
    r_th: float = 1e-3


@dataclass
class SlabConfig:
    start: float = 0.01
    thickness: float = 0.01


@dataclass
class MediumConfig:
    omega_p: float = 2.666e11
    gamma: float = 0.0


@dataclass
class SourceConfig:
    f0: float = 30e9
    m: int = 5
    n: int = 10
    amplitude: float = 1.0
    # None: centred in x, half a slab thickness above the slab
    position: list | None = None


@dataclass
class RbfConfig:
    alpha_c: float = 0.5
    stencil_size: int = 12


@dataclass
class TimeConfig:
    dt_divisor: float = 2.0
    steps: int = 800
    snapshot_times: list = field(default_factory=lambda: [5.7623e-10])


@dataclass
class ProbeConfig:
    points: list = field(default_factory=lambda: [[0.015, 0.025], [0.015, 0.015], [0.015, 0.005]])
    # None: derived from the source ramp and the distance to the image plane
    error_window: list | None = None


@dataclass
class ReferenceConfig:
    enabled: bool = False
    cell: float = 1e-4
    courant: float = 0.95


@dataclass
class ScenarioConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    pml: PmlConfig = field(default_factory=PmlConfig)
    slab: SlabConfig = field(default_factory=SlabConfig)
    medium: MediumConfig = field(default_factory=MediumConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    rbf: RbfConfig = field(default_factory=RbfConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    probes: ProbeConfig = field(default_factory=ProbeConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    output: str = "out"
    seed: int = 0

    # derived quantities -------------------------------------------------

    @property
    def spacing(self) -> float:
        return min(self.domain.extent) / (self.domain.nodes_per_axis - 1)

    @property
    def dt(self) -> float:
        return step_size(self.spacing, self.time.dt_divisor)

    def source_position(self) -> np.ndarray:
        if self.source.position is not None:
            return np.asarray(self.source.position, dtype=float)
        ext = self.domain.extent
        return np.array([ext[0] / 2, self.slab.start + 1.5 * self.slab.thickness])

    def error_window(self) -> tuple:
        """Interval over which the image-plane error is averaged.

        Starts once the fully ramped signal can have reached the image plane
        and ends when the source switches off.
        """
        if self.probes.error_window is not None:
            a, b = self.probes.error_window
            return float(a), float(b)
        tp = 1.0 / self.source.f0
        dist = abs(self.source_position()[1] - (self.slab.start - self.slab.thickness / 2))
        return dist / C0 + self.source.m * tp, (2 * self.source.m + self.source.n) * tp

    def replace(self, **changes) -> "ScenarioConfig":
        """Copy with dotted-key overrides, e.g. ``replace(**{"rbf.alpha_c": 1.0})``."""
        new = copy.deepcopy(self)
        for key, value in changes.items():
            *path, last = key.split(".")
            target = new
            for p in path:
                target = getattr(target, p)
            if not hasattr(target, last):
                raise ConfigError([f"unknown key {key!r}"])
            setattr(target, last, value)
        return new

    # validation ----------------------------------------------------------

    def problems(self) -> list:
        out = []

        def need(cond, msg):
            if not cond:
                out.append(msg)

        d = self.domain
        need(len(d.extent) == 2 and all(_num(x) and x > 0 for x in d.extent),
             "domain.extent must be two positive lengths")
        need(_int(d.nodes_per_axis) and d.nodes_per_axis >= 2, "domain.nodes_per_axis must be an integer >= 2")
        p = self.pml
        need(_int(p.layers) and p.layers >= 0, "pml.layers must be a non-negative integer")
        if _int(p.layers) and _int(d.nodes_per_axis):
            need(2 * p.layers < d.nodes_per_axis, "pml.layers leaves no interior nodes")
        need(_int(p.order) and p.order >= 0, "pml.order must be a non-negative integer")
        need(_num(p.r_th) and 0 < p.r_th < 1, "pml.r_th must lie in (0, 1)")
        need(_num(self.slab.start) and self.slab.start >= 0, "slab.start must be non-negative")
        need(_num(self.slab.thickness) and self.slab.thickness > 0, "slab.thickness must be positive")
        need(_num(self.medium.omega_p) and self.medium.omega_p >= 0, "medium.omega_p must be non-negative")
        need(_num(self.medium.gamma) and self.medium.gamma >= 0, "medium.gamma must be non-negative")
        s = self.source
        need(_num(s.f0) and s.f0 > 0, "source.f0 must be positive")
        need(_int(s.m) and s.m >= 0, "source.m must be a non-negative integer")
        need(_int(s.n) and s.n >= 0, "source.n must be a non-negative integer")
        need(_num(s.amplitude), "source.amplitude must be a number")
        need(s.position is None or (len(s.position) == 2 and all(_num(x) for x in s.position)),
             "source.position must be null or two coordinates")
        r = self.rbf
        need(_num(r.alpha_c) and r.alpha_c > 0, "rbf.alpha_c must be positive")
        need(_int(r.stencil_size) and r.stencil_size >= 3, "rbf.stencil_size must be an integer >= 3")
        t = self.time
        need(_num(t.dt_divisor) and t.dt_divisor >= 1, "time.dt_divisor must be >= 1")
        need(_int(t.steps) and t.steps >= 0, "time.steps must be a non-negative integer")
        times_ok = all(_num(x) and x >= 0 for x in t.snapshot_times)
        need(times_ok, "time.snapshot_times must be non-negative numbers")
        need(self.probes.error_window is None
             or (len(self.probes.error_window) == 2 and all(_num(x) for x in self.probes.error_window)
                 and self.probes.error_window[0] < self.probes.error_window[1]),
             "probes.error_window must be null or an increasing pair of times")
        need(all(len(pt) == 2 and all(_num(x) for x in pt) for pt in self.probes.points),
             "probes.points must be coordinate pairs")
        ref = self.reference
        need(isinstance(ref.enabled, bool), "reference.enabled must be true or false")
        need(_num(ref.cell) and ref.cell > 0, "reference.cell must be positive")
        need(_num(ref.courant) and 0 < ref.courant <= 1, "reference.courant must lie in (0, 1]")
        need(isinstance(self.output, str) and self.output != "", "output must be a directory path")
        need(_int(self.seed), "seed must be an integer")

        # cross-field checks only once the pieces they use are sane
        if not out:
            ext = d.extent
            need(self.slab.start + self.slab.thickness <= ext[1], "slab must fit inside the domain")
            if times_ok:
                limit = t.steps * self.dt
                late = [x for x in t.snapshot_times if x > limit * (1 + 1e-9) + 0.5 * self.dt]
                need(not late, f"time.snapshot_times {late} exceed steps * dt = {limit:.6e} s")
            pml_t = p.layers * self.spacing
            inside = lambda q: all(pml_t <= q[k] <= ext[k] - pml_t for k in range(2))
            need(inside(self.source_position()), "source position must lie inside the PML-free interior")
            need(all(0 <= q[k] <= ext[k] for q in self.probes.points for k in range(2)),
                 "probes.points must lie inside the domain")
        return out

    def validate(self) -> "ScenarioConfig":
        probs = self.problems()
        if probs:
            raise ConfigError(probs)
        return self

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, data: dict | None) -> "ScenarioConfig":
        data = data or {}
        if not isinstance(data, dict):
            raise ConfigError(["top level of the config must be a mapping"])
        problems = []
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name not in data:
                continue
            value = data[f.name]
            sub = f.default_factory if f.default_factory is not dataclasses.MISSING else None
            if sub is not None and dataclasses.is_dataclass(sub):
                if not isinstance(value, dict):
                    problems.append(f"{f.name} must be a mapping")
                    continue
                names = {g.name for g in dataclasses.fields(sub)}
                problems += [f"unknown key {f.name}.{k}" for k in value if k not in names]
                kwargs[f.name] = sub(**{k: v for k, v in value.items() if k in names})
            else:
                kwargs[f.name] = value
        known = {f.name for f in dataclasses.fields(cls)}
        problems += [f"unknown key {k}" for k in data if k not in known]
        if problems:
            raise ConfigError(problems)
        return cls(**kwargs)

    @classmethod
    def from_yaml(cls, text: str) -> "ScenarioConfig":
        try:
            data = yaml.load(text, Loader=_Loader)
        except yaml.YAMLError as exc:
            raise ConfigError([f"unreadable YAML: {exc}"]) from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError([f"cannot read config {path}: {exc.strerror}"]) from None
        return cls.from_yaml(text)


def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def _int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)
