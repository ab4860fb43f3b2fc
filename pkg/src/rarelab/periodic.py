"""Fully periodic solutions on the unit torus and their decay toward the mean.

The far field of the cylinder experiments is carried by two torus
solutions started from the same zero-average disturbance around the two
end states.  Conservation form keeps the disturbance average at zero,
and dissipation drives the disturbance to zero exponentially fast; the
rate is measured (by a log-linear fit), never assumed.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .fluxes import FluxSet
from .stepping import DiffusionSweep, check_cfl, heun_advection, max_advective_dt

__all__ = [
    "TorusSpec",
    "PeriodicState",
    "TorusStepper",
    "solve_periodic",
    "spectral_derivative",
    "w_sup_norms",
    "fit_exponential_decay",
    "write_periodic_series",
    "write_torus_snapshot",
    "read_torus_snapshot",
]


@dataclass(frozen=True)
class TorusSpec:
    """Uniform grid on the unit torus in each of `ndim` directions.

    Coordinates along direction d are (j + offsets[d]) / sizes[d].  A
    half-cell offset in the first direction lines the torus grid up with
    the cell-centered line axis of the cylinder grid.
    """

    sizes: tuple[int, ...]
    offsets: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(m) for m in self.sizes))
        if not self.offsets:
            object.__setattr__(self, "offsets", (0.0,) * len(self.sizes))
        if len(self.offsets) != len(self.sizes):
            raise ValueError("offsets and sizes must have equal length")
        if any(m < 4 for m in self.sizes):
            raise ValueError(f"torus sizes must be at least 4, got {self.sizes}")

    @property
    def ndim(self) -> int:
        return len(self.sizes)

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(1.0 / m for m in self.sizes)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        return tuple(
            (np.arange(m) + off) / m for m, off in zip(self.sizes, self.offsets)
        )


@dataclass(frozen=True)
class PeriodicState:
    spec: TorusSpec
    values: np.ndarray
    t: float
    ubar: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.spec.sizes:
            raise ValueError(f"values shape {v.shape} != torus shape {self.spec.sizes}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def w(self) -> np.ndarray:
        """Disturbance relative to the background constant."""
        return self.values - self.ubar

    def mean_drift(self) -> float:
        return abs(float(np.mean(self.values)) - self.ubar)


class TorusStepper:
    """One Strang step on the torus; also drives the cylinder far field."""

    def __init__(self, spec: TorusSpec, flux: FluxSet, dt: float):
        self.spec = spec
        self.flux = flux
        self.dt = dt
        self.sweeps = [
            DiffusionSweep(m, h, dt / 2.0, periodic=True)
            for m, h in zip(spec.sizes, spec.spacings)
        ]

    def sweep_axis(self, values: np.ndarray, axis: int) -> np.ndarray:
        moved = np.moveaxis(values, axis, 0)
        return np.moveaxis(self.sweeps[axis].apply(moved), 0, axis)

    def diffuse_half(self, values: np.ndarray) -> np.ndarray:
        for axis in range(len(self.sweeps)):
            values = self.sweep_axis(values, axis)
        return values

    def advect(self, values: np.ndarray, t: float) -> np.ndarray:
        check_cfl(values, self.flux, self.spec.spacings, self.dt, t)
        return heun_advection(values, self.flux, self.spec.spacings, self.dt)

    def step(self, values: np.ndarray, t: float) -> np.ndarray:
        values = self.diffuse_half(values)
        values = self.advect(values, t)
        return self.diffuse_half(values)


def solve_periodic(
    w0: np.ndarray,
    ubar: float,
    flux: FluxSet,
    t_end: float,
    snapshot_times,
    spec: TorusSpec | None = None,
    dt: float | None = None,
    cfl: float = 0.4,
) -> list[PeriodicState]:
    """Evolve the torus solution from data ubar + w0.

    The disturbance must average to zero (to 1e-12): a nonzero average
    belongs in the background constant, not the disturbance.  Snapshot
    times are rounded to the step grid.
    """
    w0 = np.asarray(w0, dtype=float)
    if spec is None:
        spec = TorusSpec(sizes=w0.shape)
    if w0.shape != spec.sizes:
        raise ConfigError(f"w0 shape {w0.shape} does not match torus {spec.sizes}")
    if abs(float(np.mean(w0))) > 1e-12:
        raise ConfigError(
            f"disturbance mean {float(np.mean(w0)):.3e} violates the "
            "zero-average requirement"
        )
    amp = float(np.max(np.abs(w0)))
    dt_max = max_advective_dt(flux, spec.spacings, ubar - amp, ubar + amp, cfl)
    steps = max(1, math.ceil(t_end / (dt if dt is not None else dt_max)))
    dt = t_end / steps

    stepper = TorusStepper(spec, flux, dt)
    want = {}
    for ts in snapshot_times:
        idx = int(round(ts / dt))
        if not 0 <= idx <= steps:
            raise ValueError(f"snapshot time {ts} outside [0, {t_end}]")
        want.setdefault(idx, ts)

    u = ubar + w0
    out = []
    if 0 in want:
        out.append(PeriodicState(spec, u.copy(), 0.0, ubar))
    for k in range(steps):
        u = stepper.step(u, k * dt)
        if k + 1 in want:
            out.append(PeriodicState(spec, u.copy(), (k + 1) * dt, ubar))
    return out


def spectral_derivative(values: np.ndarray, axis: int, size: int | None = None) -> np.ndarray:
    """Exact derivative of the trigonometric interpolant along one axis.

    Unit period per direction; the unpaired highest mode of an even-size
    grid contributes nothing to a real derivative and is dropped.
    """
    m = values.shape[axis] if size is None else size
    k = np.fft.fftfreq(m, d=1.0 / m)
    mult = 2.0j * np.pi * k
    if m % 2 == 0:
        mult[m // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = m
    hat = np.fft.fft(values, axis=axis) * mult.reshape(shape)
    return np.real(np.fft.ifft(hat, axis=axis))


def w_sup_norms(state: PeriodicState) -> tuple[float, float]:
    """(sup |w|, sup |grad w|) with the gradient taken spectrally."""
    w = state.w
    sup = float(np.max(np.abs(w)))
    g2 = np.zeros_like(w)
    for axis in range(w.ndim):
        d = spectral_derivative(w, axis)
        g2 += d * d
    return sup, float(np.sqrt(np.max(g2)))


def fit_exponential_decay(times, norms, window) -> tuple[float, float]:
    """Fit norms ~ C exp(-2 a t) on the window; returns (a, r^2).

    The factor 2 matches the convention that the disturbance decays at
    twice the rate the induced source term does.  At least 4 points must
    fall inside the window and all of them must be positive.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(norms, dtype=float)
    lo, hi = window
    mask = (t >= lo) & (t <= hi)
    if int(np.sum(mask)) < 4:
        raise ValueError(f"window {window} holds {int(np.sum(mask))} points; need >= 4")
    if np.any(v[mask] <= 0.0):
        raise ValueError("norm series must be positive inside the fit window")
    tt, vv = t[mask], np.log(v[mask])
    slope, intercept = np.polyfit(tt, vv, 1)
    fitted = slope * tt + intercept
    ss_res = float(np.sum((vv - fitted) ** 2))
    ss_tot = float(np.sum((vv - np.mean(vv)) ** 2))
    r2 = 1.0 if ss_tot <= 1e-24 else 1.0 - ss_res / ss_tot
    return -0.5 * float(slope), r2


def write_periodic_series(states, path) -> None:
    """CSV time series (t, sup |w|, sup |grad w|, mean drift)."""
    with open(path, "w") as fh:
        fh.write("t,w_sup,grad_w_sup,mean_drift\n")
        for st in states:
            sup, gsup = w_sup_norms(st)
            fh.write(f"{st.t:.17g},{sup:.17g},{gsup:.17g},{st.mean_drift():.17g}\n")


def write_torus_snapshot(state: PeriodicState, path) -> None:
    """Binary snapshot in the shared field layout; L = 0 flags all-periodic.

    The stored values are the full solution; the background constant is
    recovered on read as the mean (the disturbance averages to zero).
    """
    spec = state.spec
    with open(path, "wb") as fh:
        fh.write(struct.pack("<q", spec.ndim))
        fh.write(struct.pack("<d", 0.0))
        fh.write(struct.pack("<q", spec.sizes[0]))
        for m in spec.sizes[1:]:
            fh.write(struct.pack("<q", m))
        fh.write(struct.pack("<d", state.t))
        fh.write(np.ascontiguousarray(state.values, dtype="<f8").tobytes())


def read_torus_snapshot(path, offsets=()) -> PeriodicState:
    with open(path, "rb") as fh:
        ndim = struct.unpack("<q", fh.read(8))[0]
        L = struct.unpack("<d", fh.read(8))[0]
        if L != 0.0:
            raise ValueError("not an all-periodic snapshot; use domain.read_snapshot")
        sizes = tuple(struct.unpack("<q", fh.read(8))[0] for _ in range(ndim))
        t = struct.unpack("<d", fh.read(8))[0]
        spec = TorusSpec(sizes=sizes, offsets=tuple(offsets) if offsets else ())
        raw = fh.read(int(np.prod(sizes)) * 8)
    values = np.frombuffer(raw, dtype="<f8").reshape(sizes)
    return PeriodicState(spec, values, t, ubar=float(np.mean(values)))
