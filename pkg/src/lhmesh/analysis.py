"""Post-processing: image-plane error, focus localization, snapshot export."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lattice import NodeLattice
from .media import Slab


def normalize(profile) -> np.ndarray:
    """Scale a profile by its own largest magnitude."""
    p = np.asarray(profile, dtype=float)
    if p.size == 0:
        raise ValueError("cannot normalize an empty profile")
    peak = np.max(np.abs(p))
    if not peak > 0:
        raise ValueError("cannot normalize a profile whose maximum magnitude is zero")
    return p / peak


def l2_error(profile, reference) -> float:
    """Sum of squared differences of the two normalized profiles.

    Inputs are normalized here, which is a no-op for profiles that already are.
    No ``1/N`` factor is applied, so values are only comparable at equal ``N``.
    """
    a = np.asarray(profile, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"profile lengths differ: {a.shape} vs {b.shape}")
    return float(np.sum((normalize(a) - normalize(b)) ** 2))


@dataclass
class ErrorSeries:
    times: np.ndarray
    values: np.ndarray
    n_points: int
    nodes_per_axis: int | None = None
    alpha_c: float | None = None
    reference_cell: float | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have the same length")

    def time_average(self) -> float:
        if self.values.size == 0:
            raise ValueError("empty error series")
        return float(np.mean(self.values))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "l2"])
            for t, v in zip(self.times, self.values):
                w.writerow([f"{t:.10e}", f"{v:.10e}"])


def error_series(times, profiles, references, **meta) -> ErrorSeries:
    """L2 error at each time from matching rows of two (n_times, N) arrays."""
    profiles = np.atleast_2d(profiles)
    references = np.atleast_2d(references)
    if profiles.shape != references.shape:
        raise ValueError(f"profile arrays differ in shape: {profiles.shape} vs {references.shape}")
    vals = [l2_error(p, r) for p, r in zip(profiles, references)]
    return ErrorSeries(times, vals, profiles.shape[1], **meta)


def image_plane_nodes(lattice: NodeLattice, slab: Slab, source) -> np.ndarray:
    """E-nodes on the lattice row half a slab thickness beyond the back face.

    "Back" is the face away from ``source``.  Returned in increasing order of
    the transverse coordinate.
    """
    ax = slab.axis
    s = float(np.asarray(source, dtype=float)[ax])
    if s >= slab.end:
        plane = slab.start - slab.thickness / 2
    else:
        plane = slab.end + slab.thickness / 2
    c = lattice.positions[:, ax]
    row = np.abs(c - plane)
    nodes = np.flatnonzero(row <= row.min() + 1e-9 * lattice.d_min)
    trans = lattice.positions[nodes][:, [k for k in range(lattice.dim) if k != ax]]
    return nodes[np.lexsort(trans.T[::-1])]


@dataclass
class FocalReport:
    """Foci found along the line through the source, normal to the slab.

    ``detected`` holds positions along the slab axis in metres, sorted by
    distance from the front face; the first is compared against the inside
    image and the second against the beyond image.
    """

    detected: list
    strengths: list
    expected_inside: float
    expected_beyond: float
    d_min: float
    formed: bool = True
    errors: list = field(default_factory=list)   # in units of d_min

    @property
    def inside(self):
        return self.detected[0] if self.formed else None

    @property
    def beyond(self):
        return self.detected[1] if self.formed else None

    def within(self, tolerance: float = 1.0) -> bool:
        return self.formed and all(e <= tolerance for e in self.errors)

    def to_text(self) -> str:
        lines = [f"formed {self.formed}",
                 f"d_min_m {self.d_min:.6e}",
                 f"expected_inside_m {self.expected_inside:.6e}",
                 f"expected_beyond_m {self.expected_beyond:.6e}"]
        names = ("inside", "beyond")
        for name, pos, amp, err in zip(names, self.detected, self.strengths, self.errors):
            lines.append(f"{name}_m {pos:.6e} strength {amp:.6e} error_dmin {err:.4f}")
        return "\n".join(lines) + "\n"


def _peak_offset(left, mid, right):
    # vertex of the parabola through three equally spaced samples, in samples
    den = left - 2.0 * mid + right
    if den >= 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / den, -0.5, 0.5))


def local_maxima(values) -> np.ndarray:
    """Indices of interior local maxima; a flat top counts once, at its first sample."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return np.empty(0, dtype=int)
    out = []
    j = 1
    while j < v.size - 1:
        if v[j] > v[j - 1]:
            k = j
            while k < v.size - 1 and v[k + 1] == v[j]:
                k += 1
            if k < v.size - 1 and v[k + 1] < v[j]:
                out.append(j)
            j = k + 1
        else:
            j += 1
    return np.asarray(out, dtype=int)


def line_through(lattice: NodeLattice, point, axis: int) -> np.ndarray:
    """Nodes sharing the transverse coordinates of the node nearest ``point``, sorted along ``axis``."""
    anchor = lattice.positions[lattice.nearest_node(point)]
    other = [k for k in range(lattice.dim) if k != axis]
    tol = 1e-9 * lattice.d_min
    on = np.all(np.abs(lattice.positions[:, other] - anchor[other]) <= tol, axis=1)
    nodes = np.flatnonzero(on)
    return nodes[np.argsort(lattice.positions[nodes, axis], kind="stable")]


def locate_foci(lattice: NodeLattice, ez, slab: Slab, source) -> FocalReport:
    """Find the two strongest ``|E_z|`` maxima past the slab's front face.

    The scan runs along the slab axis through the source.  Peaks are refined
    with a three-point parabola.  Fewer than two maxima gives a report with
    ``formed = False``.
    """
    ax = slab.axis
    src = np.asarray(source, dtype=float)
    nodes = line_through(lattice, src, ax)
    coord = lattice.positions[nodes, ax]
    amp = np.abs(np.asarray(ez, dtype=float)[nodes])
    above = src[ax] >= slab.end
    front, back = (slab.end, slab.start) if above else (slab.start, slab.end)
    half = slab.thickness / 2
    sgn = -1.0 if above else 1.0
    exp_in, exp_out = front + sgn * half, back + sgn * half
    d = lattice.spacing[ax]

    keep = (coord < front) if above else (coord > front)
    peaks = [j for j in local_maxima(amp) if keep[j]]
    if len(peaks) < 2:
        return FocalReport([], [], exp_in, exp_out, d, formed=False)
    peaks = sorted(peaks, key=lambda j: (-amp[j], j))[:2]
    pos, strength = [], []
    for j in peaks:
        off = _peak_offset(amp[j - 1], amp[j], amp[j + 1])
        pos.append(coord[j] + off * d)
        strength.append(float(amp[j]))
    order = np.argsort([abs(p - front) for p in pos], kind="stable")
    pos = [float(pos[i]) for i in order]
    strength = [strength[i] for i in order]
    errors = [abs(pos[0] - exp_in) / d, abs(pos[1] - exp_out) / d]
    return FocalReport(pos, strength, exp_in, exp_out, d, True, errors)


def _pgm_bytes(image: np.ndarray) -> bytes:
    lo, hi = float(image.min()), float(image.max())
    if hi - lo > 0:
        gray = np.rint((image - lo) / (hi - lo) * 255.0)
    else:
        gray = np.full(image.shape, 128.0)
    h, w = image.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + gray.astype(np.uint8).tobytes()


def export_snapshot(lattice: NodeLattice, ez, path, fmt: str = "csv") -> list:
    """Write a 2D ``E_z`` snapshot as CSV and/or an 8-bit PGM of ``|E_z|``.

    ``fmt`` is "csv", "pgm" or "both"; ``path`` is used without its suffix.
    The PGM is row-major with +y at the top.  Returns the written paths.
    """
    ez = np.asarray(ez, dtype=float)
    if ez.size == 0:
        raise ValueError("empty snapshot")
    if ez.shape != (lattice.size,):
        raise ValueError(f"snapshot has {ez.size} values for {lattice.size} nodes")
    if fmt not in ("csv", "pgm", "both"):
        raise ValueError(f"unknown snapshot format {fmt!r}")
    base = Path(path)
    base = base.with_suffix("") if base.suffix in (".csv", ".pgm") else base
    written = []
    if fmt in ("csv", "both"):
        out = base.parent / (base.name + ".csv")
        with open(out, "w", newline="") as fh:
            fh.write("x_m,y_m,e_z\n")
            for (x, y), v in zip(lattice.positions[:, :2], ez):
                fh.write(f"{x:.9e},{y:.9e},{v:.10e}\n")
        written.append(out)
    if fmt == "csv":
        return written
    if lattice.dim != 2:
        raise ValueError("PGM export needs a 2D lattice")
    # grid is (nx, ny) with x on axis 0; image rows run north to south
    img = np.abs(lattice.grid_view(ez)).T[::-1]
    out = base.parent / (base.name + ".pgm")
    out.write_bytes(_pgm_bytes(img))
    written.append(out)
    return written
