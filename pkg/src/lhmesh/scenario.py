"""Scenario runner: config in, snapshot/probe/error files and a manifest out."""
from __future__ import annotations

import hashlib
import json
import platform
import resource
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__, checks
from .analysis import ErrorSeries, error_series, export_snapshot, image_plane_nodes, locate_foci
from .config import ConfigError, ScenarioConfig
from .engine import PointSource, SplitFieldStateTM, build_operators, precompute, run
from .excitation import WindowedSine
from .fdtd_ref import make_grid, place_source, record
from .lattice import NodeLattice, build_staggered_lattice
from .media import DrudeMedium, Slab, assign_media
from .pml import PmlSpec, assign_conductivities
from .rbf import RbfKernel

SWEEP_PARAMS = {
    "nodes": ("domain.nodes_per_axis", int),
    "alpha_c": ("rbf.alpha_c", float),
    "dt_divisor": ("time.dt_divisor", float),
    "stencil_size": ("rbf.stencil_size", int),
}


@dataclass
class Scenario:
    config: ScenarioConfig
    e: NodeLattice
    h: NodeLattice
    coeffs: object
    source: PointSource
    slab: Slab
    medium: DrudeMedium
    pml: PmlSpec | None
    max_condition: float = 0.0

    @property
    def dt(self):
        return self.coeffs.dt


def signal_of(config: ScenarioConfig) -> WindowedSine:
    s = config.source
    return WindowedSine(s.f0, s.m, s.n, s.amplitude)


def build_scenario(config: ScenarioConfig) -> Scenario:
    config.validate()
    e, h = build_staggered_lattice(config.domain.extent, config.domain.nodes_per_axis,
                                   config.pml.layers)
    d = e.d_min
    kernel = RbfKernel(config.rbf.alpha_c, d)
    ops = build_operators(e, h, kernel, config.rbf.stencil_size)
    pml = None
    if config.pml.layers:
        pml = PmlSpec(config.pml.order, config.pml.r_th, tuple(config.pml.layers * e.spacing))
    slab = Slab(config.slab.start, config.slab.thickness)
    medium = DrudeMedium(config.medium.omega_p, config.medium.gamma)
    coeffs = precompute(ops, assign_conductivities(e, pml), assign_conductivities(h, pml),
                        assign_media(e, slab, medium), assign_media(h, slab, medium), config.dt)
    src = PointSource.at(e, e.nearest_node(config.source_position()), signal_of(config), coeffs.dt)
    cond = max(float(ops.e_stencils.condition.max()), float(ops.h_stencils.condition.max()))
    return Scenario(config, e, h, coeffs, src, slab, medium, pml, cond)


_REFERENCE_CACHE: dict = {}


def reference_samples(config: ScenarioConfig, points, times) -> np.ndarray:
    """FDTD ``E_z`` at ``points`` for each of ``times`` (nearest FDTD step).

    The reference shares the scenario's slab, Drude and PML parameters; its
    PML has the same physical thickness as the meshless one.
    """
    ext = config.domain.extent
    if abs(ext[0] - ext[1]) > 1e-12 * max(ext):
        raise ConfigError(["reference solver needs a square domain"])
    points = np.ascontiguousarray(points, dtype=float)
    times = np.ascontiguousarray(times, dtype=float)
    pml_t = config.pml.layers * config.spacing
    key = (ext[0], config.reference.cell, config.reference.courant, pml_t, config.pml.order,
           config.pml.r_th, config.slab.start, config.slab.thickness, config.medium.omega_p,
           config.medium.gamma, tuple(config.source_position()), signal_of(config),
           points.tobytes(), times.tobytes())
    if key not in _REFERENCE_CACHE:
        pml = PmlSpec(config.pml.order, config.pml.r_th, pml_t) if pml_t > 0 else None
        grid = make_grid(ext[0], config.reference.cell, pml, Slab(config.slab.start, config.slab.thickness),
                         DrudeMedium(config.medium.omega_p, config.medium.gamma),
                         courant=config.reference.courant)
        place_source(grid, config.source_position(), signal_of(config))
        _REFERENCE_CACHE.clear()
        _REFERENCE_CACHE[key] = record(grid, points, times)
    return _REFERENCE_CACHE[key]


@dataclass
class RunOutput:
    directory: Path
    manifest: Path
    files: dict = field(default_factory=dict)          # name -> Path
    snapshots: dict = field(default_factory=dict)      # realized time -> E_z
    focal_reports: dict = field(default_factory=dict)  # realized time -> FocalReport
    probe_times: np.ndarray | None = None
    probe_series: np.ndarray | None = None
    errors: ErrorSeries | None = None
    wall_time: float = 0.0
    peak_memory_mb: float = 0.0

    @property
    def mean_l2(self):
        return None if self.errors is None else self.errors.time_average()


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_probes(path, times, series, points):
    with open(path, "w", newline="") as fh:
        fh.write("t_s," + ",".join(f"ez_{x:.6g}_{y:.6g}" for x, y in points) + "\n")
        for t, row in zip(times, series):
            fh.write(f"{t:.10e}," + ",".join(f"{v:.10e}" for v in row) + "\n")


def snapshot_steps(config: ScenarioConfig) -> dict:
    """Requested snapshot times snapped to the nearest step, as step -> requested time."""
    dt = config.dt
    out = {}
    for t in config.time.snapshot_times:
        q = int(np.rint(t / dt))
        if 0 < q <= config.time.steps:
            out.setdefault(q, float(t))
    return dict(sorted(out.items()))


def run_scenario(config: ScenarioConfig, out_dir=None) -> RunOutput:
    """Run one scenario and write its outputs to ``out_dir`` (default ``config.output``)."""
    config.validate()
    t_wall = time.perf_counter()
    t_cpu = time.process_time()
    out = Path(out_dir if out_dir is not None else config.output)
    out.mkdir(parents=True, exist_ok=True)
    result = RunOutput(out, out / "manifest.txt")
    cfg_path = out / "config.yaml"
    cfg_path.write_text(config.to_yaml())
    result.files["config.yaml"] = cfg_path
    lines = []

    steps = config.time.steps
    if steps > 0:
        sc = build_scenario(config)
        e = sc.e
        probe_nodes = np.array([e.nearest_node(p) for p in config.probes.points], dtype=np.int64)
        plane = image_plane_nodes(e, sc.slab, config.source_position())
        wanted = snapshot_steps(config)
        r = run(SplitFieldStateTM.zeros(e.size, sc.h.size), sc.coeffs, steps, sc.source,
                probes=np.concatenate([probe_nodes, plane]), snapshot_steps=wanted)
        k = probe_nodes.size
        result.probe_times = r.times
        result.probe_series = r.probes[:, :k]
        p_path = out / "probes.csv"
        _write_probes(p_path, r.times, r.probes[:, :k], e.positions[probe_nodes])
        result.files["probes.csv"] = p_path

        report_lines = []
        for q, requested in wanted.items():
            t = q * sc.dt
            ez = r.snapshots[q]
            result.snapshots[t] = ez
            for path in export_snapshot(e, ez, out / f"snapshot_{t:.4e}", "both"):
                result.files[path.name] = path
            rep = locate_foci(e, ez, sc.slab, config.source_position())
            result.focal_reports[t] = rep
            report_lines.append(f"snapshot_t_s {t:.6e}\n" + rep.to_text())
            lines.append(f"snapshot requested_s {requested:.6e} step {q} realized_s {t:.6e}")
        if report_lines:
            f_path = out / "focal_report.txt"
            f_path.write_text("\n".join(report_lines))
            result.files["focal_report.txt"] = f_path

        if config.reference.enabled:
            a, b = config.error_window()
            sel = (r.times >= a) & (r.times <= b)
            if not np.any(sel):
                raise ConfigError([f"error window [{a:.4e}, {b:.4e}] s holds no time step"])
            ref = reference_samples(config, e.positions[plane], r.times[sel])
            result.errors = error_series(
                r.times[sel], r.probes[sel, k:], ref,
                nodes_per_axis=config.domain.nodes_per_axis, alpha_c=config.rbf.alpha_c,
                reference_cell=config.reference.cell)
            l_path = out / "l2_error.csv"
            result.errors.write_csv(l_path)
            result.files["l2_error.csv"] = l_path
            lines.append(f"error_window_s {a:.6e} {b:.6e}")
            lines.append(f"image_plane_points {plane.size}")
            lines.append(f"mean_l2 {result.errors.time_average():.6e}")
        lines[:0] = [f"dt_s {sc.dt:.10e}", f"max_stencil_condition {sc.max_condition:.4e}"]

    result.wall_time = time.perf_counter() - t_wall
    cpu = time.process_time() - t_cpu
    # ru_maxrss is in KiB on Linux
    result.peak_memory_mb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
    head = [
        f"lhmesh {__version__}",
        f"python {platform.python_version()}",
        f"numpy {np.__version__}",
        f"scipy {scipy.__version__}",
        f"pyyaml {yaml.__version__}",
        f"steps {steps}",
        f"wall_time_s {result.wall_time:.3f}",
        f"cpu_time_s {cpu:.3f}",
        f"peak_memory_mb {result.peak_memory_mb:.1f}",
    ]
    files = [f"{_sha256(p)}  {name}" for name, p in sorted(result.files.items())]
    body = head + lines + ["files:"] + files
    result.manifest.write_text("\n".join(body) + "\n")
    return result


def read_manifest_files(manifest) -> dict:
    """``name -> sha256`` entries of a manifest."""
    text = Path(manifest).read_text().splitlines()
    i = text.index("files:")
    out = {}
    for line in text[i + 1:]:
        digest, name = line.split("  ", 1)
        out[name] = digest
    return out


@dataclass
class SweepOutput:
    directory: Path
    summary: Path
    param: str
    values: list
    mean_l2: list
    runs: list


def _sweep_one(args):
    config, out = args
    res = run_scenario(config, out)
    # only the picklable essentials cross the process boundary
    return res.mean_l2, res.errors.n_points if res.errors else 0, str(res.directory)


def sweep_configs(config: ScenarioConfig, param: str, values) -> list:
    """One config per value, with the physical run length held fixed."""
    if param not in SWEEP_PARAMS:
        raise ConfigError([f"sweep parameter must be one of {sorted(SWEEP_PARAMS)}, got {param!r}"])
    key, kind = SWEEP_PARAMS[param]
    horizon = config.time.steps * config.dt
    out = []
    for v in values:
        c = config.replace(**{key: kind(v), "reference.enabled": True})
        c.time.steps = int(np.ceil(horizon / c.dt - 1e-9))
        out.append(c)
    return out


def sweep(config: ScenarioConfig, param: str, values, out_dir=None, workers: int = 1) -> SweepOutput:
    """Run the scenario once per parameter value and tabulate the time-averaged L2."""
    configs = sweep_configs(config, param, values)
    problems = []
    for v, c in zip(values, configs):
        problems += [f"{param}={v}: {p}" for p in c.problems()]
    if problems:
        raise ConfigError(problems)
    root = Path(out_dir if out_dir is not None else config.output)
    root.mkdir(parents=True, exist_ok=True)
    jobs = [(c, root / f"{param}_{v}") for v, c in zip(values, configs)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    summary = root / "summary.csv"
    with open(summary, "w", newline="") as fh:
        fh.write("param,value,mean_l2,n_points,run_dir\n")
        for v, (l2, n, d) in zip(values, results):
            fh.write(f"{param},{v},{l2:.10e},{n},{Path(d).name}\n")
    return SweepOutput(root, summary, param, list(values), [r[0] for r in results], [r[2] for r in results])


SUITES = {
    "drude": checks.drude_matching,
    "delta": checks.delta_property,
    "derivatives": checks.derivative_fidelity,
    "free-space": checks.free_space_reduction,
    "ade": checks.ade_convergence,
    "consistency": checks.consistency_3d,
    "stability": checks.stability,
    "pml": checks.pml_absorption,
}
DEFAULT_SUITES = ("drude", "delta", "derivatives", "free-space", "ade", "consistency", "stability", "pml")


def oracle_check(config: ScenarioConfig | None = None, out_dir=None,
                 threshold: float = checks.ORACLE_L2_THRESHOLD) -> checks.CheckResult:
    """Default scenario against the FDTD reference: time-averaged image-plane L2."""
    config = (config or ScenarioConfig()).replace(**{"reference.enabled": True})
    if out_dir is None:
        import tempfile
        with tempfile.TemporaryDirectory() as tmp:
            res = run_scenario(config, tmp)
    else:
        res = run_scenario(config, out_dir)
    val = res.mean_l2
    return checks.CheckResult("oracle", val <= threshold, val, threshold,
                              f"{res.errors.n_points} image-plane points")


def validate(suite: str = "default") -> list:
    """Run the named suite ("default", "all", "oracle" or a single check)."""
    if suite == "default":
        names = list(DEFAULT_SUITES)
    elif suite == "all":
        names = list(DEFAULT_SUITES) + ["oracle"]
    elif suite == "oracle" or suite in SUITES:
        names = [suite]
    else:
        raise ConfigError([f"unknown suite {suite!r}; choose from default, all, oracle, "
                           + ", ".join(SUITES)])
    return [oracle_check() if n == "oracle" else SUITES[n]() for n in names]


def report_json(results) -> str:
    return json.dumps({"passed": all(r.passed for r in results),
                       "checks": [r.to_dict() for r in results]}, indent=2)
