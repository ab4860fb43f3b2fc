"""Far-field ansatz: weighted blend of the two torus solutions.

The ansatz interpolates between the torus solutions through a weight
that rescales the 1-d viscous profile onto (0, 1), so it carries the
far-field oscillations and leaves an x1-integrable perturbation.  It is
not an exact solution; `source_term` evaluates its defect in closed
form, and `discrete_residual` recomputes the same defect by finite
differences on stored snapshots.  Agreement of the two at second order
under refinement is the module's central correctness check; it
exercises every term of the closed form.

Formula-side derivatives are taken spectrally on the torus grid (exact
for resolved modes) and the weight's slope comes from the fine profile
grid, so the closed form is computed to higher accuracy than the
finite-difference residual it is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import DomainSpec, Field, gradient, laplacian, make_grid
from .fluxes import FluxSet
from .periodic import PeriodicState, spectral_derivative
from .profile1d import ProfileSpline, ProfileState

__all__ = [
    "AnsatzBundle",
    "mixing_weight",
    "mean_flux_curvature",
    "tile_to_cylinder",
    "build_ansatz",
    "source_term",
    "assemble_bundle",
    "discrete_residual",
    "residual_mismatch",
    "write_source_series",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


@dataclass(frozen=True)
class AnsatzBundle:
    """Everything the perturbation bookkeeping needs at one instant."""

    g: np.ndarray              # mixing weight on the x1 axis, in (0, 1)
    dg: np.ndarray             # its x1 slope, positive
    profile_values: np.ndarray # 1-d profile sampled on the x1 axis
    u_tilde: Field
    h: Field
    t: float

    def check(self) -> list[str]:
        problems = []
        if not (np.all(self.g > 0.0) and np.all(self.g < 1.0)):
            problems.append("mixing weight leaves (0, 1)")
        if np.any(np.diff(self.g) < 0.0):
            problems.append("mixing weight is not increasing")
        return problems


def mixing_weight(state: ProfileState, x1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Profile rescaled affinely onto (0, 1) and its slope, on given points.

    Sampling goes through a cubic interpolant of the (usually finer)
    profile grid; outside that grid the weight saturates to 0/1 with
    zero slope.
    """
    if state.ur == state.ul:
        raise ValueError("degenerate end states: no rarefaction to rescale")
    spline = ProfileSpline(state)
    span = state.ur - state.ul
    g = (spline.value(x1) - state.ul) / span
    dg = spline.slope(x1) / span
    return g, dg


def mean_flux_curvature(d2f, a, b):
    """Average of f'' along the straight segment from b to a.

    Five-point Gauss-Legendre on the unit interval: exact whenever f''
    is a polynomial of degree <= 9, and spectrally accurate otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    acc = np.zeros(np.broadcast(a, b).shape)
    for theta, w in zip(_GL_NODES, _GL_WEIGHTS):
        acc += w * np.asarray(d2f(b + theta * (a - b)), dtype=float)
    return acc if acc.ndim else float(acc)


def tile_to_cylinder(state: PeriodicState, dspec: DomainSpec) -> np.ndarray:
    """Periodic extension of a torus state onto the cylinder grid.

    Alignment requirements (all exact index mappings, no interpolation):
    the torus direction-1 grid must be the half-cell-offset image of the
    cylinder x1 cells modulo the unit period, which needs an integer
    half-length and an integer number of x1 cells per period; transverse
    grids must coincide.
    """
    sizes = state.spec.sizes
    if sizes[1:] != dspec.n_torus:
        raise ValueError(f"transverse grids differ: {sizes[1:]} vs {dspec.n_torus}")
    if any(abs(o) > 1e-12 for o in state.spec.offsets[1:]):
        raise ValueError("transverse tiling needs zero-offset torus grids")
    if abs(state.spec.offsets[0] - 0.5) > 1e-12:
        raise ValueError("direction-1 tiling needs the half-cell-offset torus grid")
    m1 = sizes[0]
    if abs(m1 * dspec.dx1 - 1.0) > 1e-9 or abs(dspec.L - round(dspec.L)) > 1e-12:
        raise ValueError(
            f"cylinder grid (L={dspec.L}, dx1={dspec.dx1}) does not tile the unit period"
        )
    idx = np.arange(dspec.n1) % m1
    return state.values[idx]


def _x1_indices(n1: int, m1: int, shift: int = 0) -> np.ndarray:
    return (np.arange(n1) + shift) % m1


def build_ansatz(
    ul_state: PeriodicState,
    ur_state: PeriodicState,
    g: np.ndarray,
    dspec: DomainSpec,
) -> Field:
    """Pointwise convex combination of the tiled torus solutions."""
    if abs(ul_state.t - ur_state.t) > 1e-9:
        raise ValueError(f"time stamps differ: {ul_state.t} vs {ur_state.t}")
    Ul = tile_to_cylinder(ul_state, dspec)
    Ur = tile_to_cylinder(ur_state, dspec)
    gg = g.reshape((-1,) + (1,) * (dspec.n - 1))
    return Field(dspec, Ul * (1.0 - gg) + Ur * gg, t=ul_state.t)


def source_term(
    ul_state: PeriodicState,
    ur_state: PeriodicState,
    profile: ProfileState,
    flux: FluxSet,
    dspec: DomainSpec,
) -> Field:
    """Closed-form defect of the ansatz under the conservation law.

    Every term carries either a disturbance factor or the distance of
    the ansatz from the bare profile, so the defect inherits the
    exponential decay of the torus disturbances.
    """
    ts = (ul_state.t, ur_state.t, profile.t)
    if max(ts) - min(ts) > 1e-9:
        raise ValueError(f"time stamps differ: {ts}")
    grid = make_grid(dspec)
    g, dg = mixing_weight(profile, grid.x1)
    spline = ProfileSpline(profile)
    prof = spline.value(grid.x1)

    bshape = (-1,) + (1,) * (dspec.n - 1)
    gg, dgg, pp = g.reshape(bshape), dg.reshape(bshape), prof.reshape(bshape)

    Ul = tile_to_cylinder(ul_state, dspec)
    Ur = tile_to_cylinder(ur_state, dspec)
    utild = Ul * (1.0 - gg) + Ur * gg

    m1 = ul_state.spec.sizes[0]
    idx = _x1_indices(dspec.n1, m1)
    wl = ul_state.w
    wr = ur_state.w

    mix = np.zeros_like(utild)
    for axis in range(dspec.n):
        dwl = spectral_derivative(wl, axis)[idx]
        dwr = spectral_derivative(wr, axis)[idx]
        mix += mean_flux_curvature(flux.d2f[axis], Ul, utild) * dwl
        mix -= mean_flux_curvature(flux.d2f[axis], Ur, utild) * dwr
    h = (Ur - Ul) * gg * (1.0 - gg) * mix

    curv1 = mean_flux_curvature(flux.d2f[0], pp, utild)
    h += (Ur - Ul) * curv1 * (utild - pp) * dgg

    ddiff = spectral_derivative(wr - wl, 0)[idx]
    h -= 2.0 * ddiff * dgg

    return Field(dspec, h, t=ul_state.t)


def assemble_bundle(
    ul_state: PeriodicState,
    ur_state: PeriodicState,
    profile: ProfileState,
    flux: FluxSet,
    dspec: DomainSpec,
) -> AnsatzBundle:
    grid = make_grid(dspec)
    g, dg = mixing_weight(profile, grid.x1)
    prof = ProfileSpline(profile).value(grid.x1)
    u_tilde = build_ansatz(ul_state, ur_state, g, dspec)
    h = source_term(ul_state, ur_state, profile, flux, dspec)
    return AnsatzBundle(
        g=g, dg=dg, profile_values=prof, u_tilde=u_tilde, h=h, t=u_tilde.t
    )


def discrete_residual(
    prev: AnsatzBundle, mid: AnsatzBundle, nxt: AnsatzBundle, flux: FluxSet
) -> Field:
    """Finite-difference defect of the stored ansatz snapshots.

    Time derivative by the centered difference of the bracketing
    snapshots, space derivatives by the second-order grid operators.
    """
    dt_lo = mid.t - prev.t
    dt_hi = nxt.t - mid.t
    if abs(dt_lo - dt_hi) > 1e-9 * max(dt_lo, dt_hi):
        raise ValueError("need equispaced snapshots for the centered difference")
    u = mid.u_tilde
    res = (nxt.u_tilde.values - prev.u_tilde.values) / (dt_lo + dt_hi)
    for axis in range(u.spec.n):
        fval = u.with_values(np.asarray(flux.f[axis](u.values), dtype=float))
        res = res + gradient(fval)[axis].values
    res = res - laplacian(u).values
    return u.with_values(res)


def residual_mismatch(
    prev: AnsatzBundle, mid: AnsatzBundle, nxt: AnsatzBundle, flux: FluxSet
) -> float:
    """Max distance between the finite-difference defect and the closed form."""
    res = discrete_residual(prev, mid, nxt, flux)
    return float(np.max(np.abs(res.values - mid.h.values)))


def write_source_series(bundles, path) -> None:
    """CSV time series of the defect's L^1, L^2 and sup norms."""
    from .domain import lp_norm

    with open(path, "w") as fh:
        fh.write("t,h_l1,h_l2,h_linf\n")
        for b in bundles:
            fh.write(
                f"{b.t:.17g},{lp_norm(b.h, 1):.17g},"
                f"{lp_norm(b.h, 2):.17g},{lp_norm(b.h, np.inf):.17g}\n"
            )
