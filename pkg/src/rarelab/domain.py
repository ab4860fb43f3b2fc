"""Discretized cylinder domain: a truncated line times a flat torus.

The computational domain is [-L, L] x T^{n-1}, where each torus direction
has period 1.  The line direction (axis 0, "x1") uses cell-centered
coordinates; torus directions use the uniform grid {j/m}.  All norms are
midpoint-rule quadratures over the truncation; the measure of the
truncated domain is 2L since every torus factor has measure 1.

Truncation caveat: fields of interest decay in |x1| (perturbations are
integrable along the line by construction), so the truncated norm is a
proxy for the norm over the unbounded cylinder.  The quality of the proxy
is monitored, not proven: `tail_mass` reports the fraction of |f| living
in the outer 10% of the x1 range and experiments keep it small.

All reductions use numpy's pairwise summation on arrays with a fixed
layout, so results are reproducible and independent of any worker count.
Fields are immutable once constructed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DomainSpec",
    "Grid",
    "Field",
    "make_grid",
    "lp_norm",
    "gradient",
    "second_derivative",
    "laplacian",
    "torus_average",
    "tail_mass",
    "write_snapshot",
    "read_snapshot",
    "write_csv",
]


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of the truncated cylinder grid.

    Attributes:
        n: spatial dimension, 1 to 3 (n=1 means a bare line, used for
           1-d profile snapshots).
        L: half-length of the x1 truncation, L > 0.
        n1: number of x1 cells (cell centers at -L + (i+1/2)*dx1).
        n_torus: cells per torus direction, one entry per direction.
    """

    n: int
    L: float
    n1: int
    n_torus: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "n_torus", tuple(int(m) for m in self.n_torus))
        if self.n not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.n}")
        if len(self.n_torus) != self.n - 1:
            raise ValueError(
                f"need {self.n - 1} torus cell counts for n={self.n}, "
                f"got {len(self.n_torus)}"
            )
        if not self.L > 0:
            raise ValueError(f"half-length L must be positive, got {self.L}")
        if self.n1 < 4:
            raise ValueError(f"n1 must be at least 4, got {self.n1}")
        if any(m < 4 for m in self.n_torus):
            raise ValueError(f"torus cell counts must be at least 4, got {self.n_torus}")

    @property
    def periods(self) -> tuple[float, ...]:
        return (1.0,) * (self.n - 1)

    @property
    def dx1(self) -> float:
        return 2.0 * self.L / self.n1

    @property
    def dx_torus(self) -> tuple[float, ...]:
        return tuple(1.0 / m for m in self.n_torus)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n1, *self.n_torus)

    @property
    def num_points(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        vol = self.dx1
        for h in self.dx_torus:
            vol *= h
        return vol

    @property
    def measure(self) -> float:
        """Measure of the truncated domain (torus factors have measure 1)."""
        return 2.0 * self.L

    def spacing(self, axis: int) -> float:
        return self.dx1 if axis == 0 else self.dx_torus[axis - 1]


@dataclass(frozen=True)
class Grid:
    x1: np.ndarray
    torus: tuple[np.ndarray, ...]


def make_grid(spec: DomainSpec) -> Grid:
    """Coordinate arrays: x1 cell centers in (-L, L), torus points in [0, 1)."""
    x1 = -spec.L + (np.arange(spec.n1) + 0.5) * spec.dx1
    torus = tuple(np.arange(m) / m for m in spec.n_torus)
    return Grid(x1=x1, torus=torus)


@dataclass(frozen=True)
class Field:
    """Scalar samples on a DomainSpec grid at one instant.

    Values are stored as a read-only float array of shape
    (n1, *n_torus); axis 0 is the line direction.
    """

    spec: DomainSpec
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.spec.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.spec.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values: np.ndarray, t: float | None = None) -> "Field":
        return Field(self.spec, values, self.t if t is None else t)


def lp_norm(f: Field, p: float) -> float:
    """L^p norm over the truncated domain by midpoint quadrature.

    p = inf is the max of |f| (a separate code path, not a large-p limit).
    """
    if np.isinf(p):
        return float(np.max(np.abs(f.values)))
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    a = np.abs(f.values)
    if p == 1:
        acc = float(np.sum(a))
    elif p == 2:
        acc = float(np.sum(a * a))
    else:
        acc = float(np.sum(a**p))
    return (acc * f.spec.cell_volume) ** (1.0 / p)


def _diff_periodic(v: np.ndarray, h: float, axis: int) -> np.ndarray:
    return (np.roll(v, -1, axis=axis) - np.roll(v, 1, axis=axis)) / (2.0 * h)


def gradient(f: Field) -> list[Field]:
    """All first partials, one Field per direction.

    Central second-order differences; torus directions wrap, the line
    direction falls back to one-sided second-order stencils at the two
    truncation ends.
    """
    out = [f.with_values(np.gradient(f.values, f.spec.dx1, axis=0, edge_order=2))]
    for k, h in enumerate(f.spec.dx_torus):
        out.append(f.with_values(_diff_periodic(f.values, h, k + 1)))
    return out


def second_derivative(f: Field, axis: int) -> Field:
    """Second partial along one axis, second order everywhere."""
    v = f.values
    h = f.spec.spacing(axis)
    if axis == 0:
        d2 = np.empty_like(v)
        d2[1:-1] = v[:-2] - 2.0 * v[1:-1] + v[2:]
        # one-sided 4-point stencils keep O(h^2) at the truncation ends
        d2[0] = 2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]
        d2[-1] = 2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]
        return f.with_values(d2 / h**2)
    up = np.roll(v, -1, axis=axis)
    dn = np.roll(v, 1, axis=axis)
    return f.with_values((up - 2.0 * v + dn) / h**2)


def laplacian(f: Field) -> Field:
    acc = second_derivative(f, 0).values.copy()
    for axis in range(1, f.spec.n):
        acc += second_derivative(f, axis).values
    return f.with_values(acc)


def torus_average(f: Field, dirs) -> Field:
    """Average over the listed torus directions (2..n), constant along them.

    Grid averages are exact sums, so applying the average twice equals
    applying it once to machine precision.
    """
    dirs = sorted(set(int(d) for d in dirs))
    if not dirs:
        raise ValueError("dirs must be a non-empty subset of torus directions")
    if any(d < 2 or d > f.spec.n for d in dirs):
        raise ValueError(f"directions {dirs} outside 2..{f.spec.n}")
    axes = tuple(d - 1 for d in dirs)
    avg = np.mean(f.values, axis=axes, keepdims=True)
    return f.with_values(np.broadcast_to(avg, f.spec.shape))


def tail_mass(f: Field, fraction: float = 0.1) -> float:
    """Fraction of the |f| mass in the outer `fraction` of the x1 range.

    Returns 0 for an identically zero field.  Used as the diagnostic
    guarding against structure reaching the truncation boundary.
    """
    a = np.abs(f.values)
    total = float(np.sum(a))
    if total == 0.0:
        return 0.0
    k = max(1, int(round(f.spec.n1 * fraction / 2.0)))
    outer = float(np.sum(a[:k])) + float(np.sum(a[-k:]))
    return outer / total


# --- snapshot I/O ------------------------------------------------------------
#
# Binary layout: little-endian 64-bit header values
#   n (int), L (float), n1 (int), n_torus[0..n-2] (int), t (float)
# followed by the row-major float64 values.  L = 0 flags an all-periodic
# torus state (no line direction); L > 0 is a truncated-cylinder field.

def write_snapshot(f: Field, path) -> None:
    spec = f.spec
    with open(path, "wb") as fh:
        fh.write(struct.pack("<q", spec.n))
        fh.write(struct.pack("<d", spec.L))
        fh.write(struct.pack("<q", spec.n1))
        for m in spec.n_torus:
            fh.write(struct.pack("<q", m))
        fh.write(struct.pack("<d", f.t))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_snapshot(path) -> Field:
    with open(path, "rb") as fh:
        n = struct.unpack("<q", fh.read(8))[0]
        L = struct.unpack("<d", fh.read(8))[0]
        n1 = struct.unpack("<q", fh.read(8))[0]
        n_torus = tuple(struct.unpack("<q", fh.read(8))[0] for _ in range(n - 1))
        t = struct.unpack("<d", fh.read(8))[0]
        if L == 0.0:
            raise ValueError(
                "file is an all-periodic torus snapshot (L = 0); "
                "use rarelab.periodic.read_torus_snapshot"
            )
        spec = DomainSpec(n=n, L=L, n1=n1, n_torus=n_torus)
        raw = fh.read(spec.num_points * 8)
    values = np.frombuffer(raw, dtype="<f8").reshape(spec.shape)
    return Field(spec=spec, values=values, t=t)


def write_csv(f: Field, path) -> None:
    """Plain-text export (coordinates, value); intended for small grids."""
    grid = make_grid(f.spec)
    coords = np.meshgrid(grid.x1, *grid.torus, indexing="ij")
    cols = [c.ravel() for c in coords] + [f.values.ravel()]
    header = ",".join([f"x{i+1}" for i in range(f.spec.n)] + ["value"])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in zip(*cols):
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
