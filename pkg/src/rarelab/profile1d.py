"""The 1-d viscous rarefaction profile and its quantitative bounds.

The profile solves u_t + (f_1(u))_x = u_xx from hyperbolic-tangent data
joining the two end states ul < ur.  It replaces the Lipschitz inviscid
rarefaction fan as the smooth backbone that the multi-d experiments
perturb.  Checks provided here: the one-sided Oleinik slope bound, the
linear-in-time growth of the integrated deviation from the end states,
and the t^(-1+1/p) decay of the slope's L^p norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .domain import DomainSpec, Field
from .errors import NumericalAbort
from .fluxes import FluxSet
from .stepping import DiffusionSweep, check_cfl, heun_advection, max_advective_dt

__all__ = [
    "ProfileState",
    "inviscid_rarefaction",
    "initial_profile",
    "make_initial_state",
    "evolve_profile",
    "oleinik_bound",
    "profile_norm_checks",
    "ProfileSpline",
    "profile_to_field",
    "write_profile_series",
]


@dataclass(frozen=True)
class ProfileState:
    """Samples of the viscous rarefaction profile on its own x1 grid."""

    x1: np.ndarray
    values: np.ndarray
    t: float
    ul: float
    ur: float

    def __post_init__(self):
        x = np.asarray(self.x1, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.shape != v.shape or x.ndim != 1:
            raise ValueError("x1 and values must be 1-d arrays of equal length")
        object.__setattr__(self, "x1", x)
        object.__setattr__(self, "values", v)
        if not self.ul < self.ur:
            raise ValueError(f"need ul < ur, got {self.ul}, {self.ur}")

    @property
    def dx(self) -> float:
        return float(self.x1[1] - self.x1[0])

    def validate(self, boundary_tol: float = 1e-8) -> list[str]:
        """Check range, monotonicity and boundary approach.

        The mathematical statements are strict (open range, positive
        slope) but the tails saturate to the end states at machine
        precision, so the checks carry floating-point slack: range
        within 1e-10, forward differences above -1e-12.
        """
        problems = []
        if self.values.min() < self.ul - 1e-10 or self.values.max() > self.ur + 1e-10:
            problems.append("values leave the interval [ul, ur]")
        if np.min(np.diff(self.values)) < -1e-12:
            problems.append("forward differences dip below -1e-12")
        if abs(self.values[0] - self.ul) > boundary_tol:
            problems.append(f"left boundary off by {abs(self.values[0] - self.ul):.3e}")
        if abs(self.values[-1] - self.ur) > boundary_tol:
            problems.append(f"right boundary off by {abs(self.values[-1] - self.ur):.3e}")
        return problems


def inviscid_rarefaction(x1, t: float, flux: FluxSet, ul: float, ur: float):
    """Self-similar entropy solution of the two-state dam-break problem.

    Constant states outside the fan; inside, the wave speed f_1' is
    inverted by bisection to 1e-12.  Requires t > 0 and f_1' strictly
    increasing on [ul, ur].
    """
    if t <= 0:
        raise ValueError(f"rarefaction fan needs t > 0, got t = {t}")
    if not ul < ur:
        raise ValueError(f"need ul < ur, got {ul}, {ur}")
    df = flux.df[0]
    probe = np.asarray(df(np.linspace(ul, ur, 512)), dtype=float)
    if np.any(np.diff(probe) <= 0.0):
        raise ValueError("f_1' is not strictly increasing on [ul, ur]")

    x = np.asarray(x1, dtype=float)
    scalar = x.ndim == 0
    s = np.atleast_1d(x) / t
    sl, sr = float(df(np.float64(ul))), float(df(np.float64(ur)))
    out = np.empty_like(s)
    out[s <= sl] = ul
    out[s > sr] = ur
    fan = (s > sl) & (s <= sr)
    if np.any(fan):
        target = s[fan]
        lo = np.full_like(target, ul)
        hi = np.full_like(target, ur)
        while np.max(hi - lo) > 1e-12:
            mid = 0.5 * (lo + hi)
            below = np.asarray(df(mid), dtype=float) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out[fan] = 0.5 * (lo + hi)
    return float(out[0]) if scalar else out


def initial_profile(x1, ul: float, ur: float):
    """Hyperbolic-tangent data joining ul to ur, centered at the origin.

    np.tanh saturates to +-1 for large arguments, so the formula needs
    no explicit overflow guard; values reach ul/ur exactly beyond
    |x1| ~ 20.
    """
    x = np.asarray(x1, dtype=float)
    mid = 0.5 * (ul + ur)
    half = 0.5 * (ur - ul)
    out = mid + half * np.tanh(x)
    return float(out) if np.ndim(x1) == 0 else out


def make_initial_state(L: float, n1: int, ul: float, ur: float) -> ProfileState:
    """Cell-centered grid on [-L, L] filled with the tangent data."""
    dx = 2.0 * L / n1
    x1 = -L + (np.arange(n1) + 0.5) * dx
    return ProfileState(x1=x1, values=initial_profile(x1, ul, ur), t=0.0, ul=ul, ur=ur)


def evolve_profile(
    p0: ProfileState,
    flux: FluxSet,
    t_end: float,
    dt: float | None = None,
    cfl: float = 0.4,
    snapshot_times=(),
) -> list[ProfileState]:
    """March the profile to t_end, returning states at the requested times.

    Implicit trapezoidal diffusion plus explicit second-order advection;
    ends are pinned to ul/ur, consistent with the exponentially small
    tails of the data.  Snapshot times are rounded to the step grid.
    """
    n = p0.values.size
    dx = p0.dx
    span = t_end - p0.t
    if span <= 0:
        raise ValueError("t_end must exceed the starting time")
    dt_max = max_advective_dt(flux, (dx,), p0.ul, p0.ur, cfl)
    if dt is not None and dt > dt_max * (1.0 + 1e-12):
        raise NumericalAbort("cfl", p0.t, f"requested dt={dt:.3e} > stable {dt_max:.3e}")
    steps = max(1, math.ceil(span / (dt if dt is not None else dt_max)))
    dt = span / steps

    sweep = DiffusionSweep(n, dx, dt / 2.0, periodic=False)
    ghost_lo = np.full((2,), p0.ul)
    ghost_hi = np.full((2,), p0.ur)

    want = {}
    for ts in snapshot_times:
        idx = int(round((ts - p0.t) / dt))
        if not 0 <= idx <= steps:
            raise ValueError(f"snapshot time {ts} outside [{p0.t}, {t_end}]")
        want.setdefault(idx, ts)

    u = p0.values.copy()
    out = []
    if 0 in want:
        out.append(ProfileState(p0.x1, u.copy(), p0.t, p0.ul, p0.ur))
    for k in range(steps):
        t = p0.t + k * dt
        check_cfl(u, flux, (dx,), dt, t)
        u = sweep.apply(u, b_lo=p0.ul, b_hi=p0.ur)
        u = heun_advection(u, flux, (dx,), dt, ghosts=(ghost_lo, ghost_hi))
        u = sweep.apply(u, b_lo=p0.ul, b_hi=p0.ur)
        if k + 1 in want:
            out.append(ProfileState(p0.x1, u.copy(), p0.t + (k + 1) * dt, p0.ul, p0.ur))
    if not snapshot_times:
        out.append(ProfileState(p0.x1, u.copy(), t_end, p0.ul, p0.ur))
    return out


def oleinik_bound(p: ProfileState) -> tuple[float, float]:
    """Largest discrete slope and its product with time.

    The product t * max_slope is the quantity that stays bounded for a
    convex flux (one-sided entropy estimate); the ceiling constant is
    problem-dependent, so trajectories are reported rather than checked
    against a fixed value.
    """
    slope = np.gradient(p.values, p.dx, edge_order=2)
    max_slope = float(np.max(slope))
    return max_slope, p.t * max_slope


def profile_norm_checks(p: ProfileState, ps) -> dict:
    """Slope norms and the integrated end-state deviation at one time.

    Returns the deviation integral (grows at most linearly in t), the
    L^p norms of the slope for each requested p, and their ratios to
    t^(-1+1/p).  Requires t > 0 for the ratios to make sense.
    """
    if p.t <= 0:
        raise ValueError("norm checks need t > 0")
    dx = p.dx
    left = p.x1 < 0
    ut1 = float(np.sum(p.values[left] - p.ul) + np.sum(p.ur - p.values[~left])) * dx
    slope = np.gradient(p.values, dx, edge_order=2)
    report = {"t": p.t, "ut1": ut1, "norms": {}, "ratios": {}}
    for q in ps:
        if np.isinf(q):
            nrm = float(np.max(np.abs(slope)))
            ratio = nrm * p.t
        else:
            nrm = float(np.sum(np.abs(slope) ** q) * dx) ** (1.0 / q)
            ratio = nrm / p.t ** (-1.0 + 1.0 / q)
        report["norms"][q] = nrm
        report["ratios"][q] = ratio
    return report


class ProfileSpline:
    """Cubic interpolant of a profile state, clamped to ul/ur outside.

    The profile grid is usually finer than the multi-d grid; downstream
    modules sample values and slopes through this object so the backbone
    accuracy is set by the fine grid.
    """

    def __init__(self, state: ProfileState):
        self.state = state
        self._spline = CubicSpline(state.x1, state.values)
        self._deriv = self._spline.derivative()
        self._lo = float(state.x1[0])
        self._hi = float(state.x1[-1])

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = self._spline(np.clip(x, self._lo, self._hi))
        out = np.where(x < self._lo, self.state.ul, out)
        out = np.where(x > self._hi, self.state.ur, out)
        return out

    def slope(self, x):
        x = np.asarray(x, dtype=float)
        out = self._deriv(np.clip(x, self._lo, self._hi))
        return np.where((x < self._lo) | (x > self._hi), 0.0, out)


def profile_to_field(p: ProfileState) -> Field:
    """Repackage as a 1-d Field so the snapshot format applies."""
    dx = p.dx
    L = -float(p.x1[0]) + 0.5 * dx
    spec = DomainSpec(n=1, L=L, n1=p.values.size)
    return Field(spec=spec, values=p.values, t=p.t)


def write_profile_series(states, flux: FluxSet, path, ps=(1.0, 2.0, np.inf)) -> None:
    """CSV time series: slope bound, slope norms, deviation integral."""
    with open(path, "w") as fh:
        names = ["t", "max_slope", "t_max_slope"]
        names += ["slope_linf" if np.isinf(q) else f"slope_l{q:g}" for q in ps]
        names.append("end_state_deviation")
        fh.write(",".join(names) + "\n")
        for st in states:
            ms, tms = oleinik_bound(st)
            row = [st.t, ms, tms]
            rep = profile_norm_checks(st, ps) if st.t > 0 else None
            for q in ps:
                row.append(rep["norms"][q] if rep else float("nan"))
            row.append(rep["ut1"] if rep else float("nan"))
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
