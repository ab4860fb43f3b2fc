"""Config-driven experiment runner.

Subcommands: simulate, profile, periodic, decompose, gn-study,
counterexample, rates, validate.  Configs are flat key = value text
(dotted prefixes group related keys, '#' starts a comment); every run
writes its artifacts plus a manifest (config hash, versions, wall time,
file digests) and a gnuplot script, so results stay inspectable as
plain data.  Exit codes: 0 ok, 1 config error, 2 numerical abort
(CFL or tail guard), 3 rate acceptance failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .ansatz import write_source_series
from .decomp import check_membership, decompose, dump_components, norm_bound_ratio, reconstruct
from .domain import DomainSpec, Field, lp_norm, make_grid, write_snapshot
from .errors import ConfigError, NumericalAbort
from .fluxes import flux_from_name
from .ineqlab import (
    dilated_gn_ratio,
    dilated_sobolev_ratio,
    dilation_slope,
    gaussian_bump,
    gn_ratio,
    hat_bump,
    interpolation_ratio,
)
from .mdsolver import SolverConfig, run as run_solver, trig_polynomial, validate_config, write_norm_table
from .periodic import TorusSpec, fit_exponential_decay, solve_periodic, w_sup_norms, write_periodic_series
from .profile1d import evolve_profile, inviscid_rarefaction, make_initial_state, oleinik_bound, profile_to_field, write_profile_series
from .rates import (
    exponent_ordering,
    fit_power_law,
    verify_apriori,
    verify_main_theorem,
    write_rate_report,
)

__all__ = ["parse_config", "load_config", "run_experiment", "validate", "main"]


class RatesFailure(RuntimeError):
    """A rate check came out 'fail' (CLI exit code 3)."""


# --- config ------------------------------------------------------------------

def parse_config(text: str) -> dict[str, str]:
    """Flat key = value lines; '#' comments; later keys win."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def load_config(path) -> dict[str, str]:
    with open(path) as fh:
        return parse_config(fh.read())


def _floats(s: str) -> list[float]:
    return [float(tok) for tok in s.replace(";", ",").split(",") if tok.strip()]


def _modes(s: str) -> tuple[tuple[float, ...], ...]:
    """'k1,k2,amp; k1,k2,amp' -> ((k1,k2,amp), ...)."""
    rows = []
    for chunk in s.split(";"):
        chunk = chunk.strip()
        if chunk:
            rows.append(tuple(float(tok) for tok in chunk.split(",")))
    return tuple(rows)


def _v0_from_spec(s: str):
    s = s.strip().lower()
    if s in ("", "none", "0"):
        return None
    if s.startswith("gaussian:"):
        amp, center, width = (float(x) for x in s.split(":", 1)[1].split(","))
        return lambda x: amp * np.exp(-(((np.asarray(x) - center) / width) ** 2))
    raise ConfigError(f"unknown v0 spec '{s}' (use none or gaussian:amp,center,width)")


def _snapshot_times(spec: str, t_end: float) -> tuple[float, ...]:
    """'auto' = fine prefix + log-spaced decades; or an explicit list."""
    spec = spec.strip().lower()
    if spec in ("", "auto"):
        prefix = list(np.arange(0.1, min(1.0, t_end), 0.1))
        decades = list(np.geomspace(max(t_end / 100.0, 1.0), t_end, 33))
        times = sorted(set(round(t, 6) for t in prefix + decades + [t_end]))
        return tuple(t for t in times if 0 < t <= t_end)
    if spec.startswith("geometric:"):
        t0, ratio = (float(x) for x in spec.split(":", 1)[1].split(","))
        times = []
        t = t0
        while t <= t_end * (1 + 1e-9):
            times.append(min(t, t_end))
            t *= ratio
        return tuple(times)
    return tuple(sorted(set(float(x) for x in _floats(spec))))


def solver_config_from_dict(cfg: dict[str, str]) -> SolverConfig:
    try:
        dim = int(cfg.get("dim", "2"))
        n_torus = tuple(int(x) for x in cfg.get("n_torus", "20").split(","))
        spec = DomainSpec(n=dim, L=float(cfg.get("L", "80")),
                          n1=int(cfg.get("n1", "3200")), n_torus=n_torus)
        flux = flux_from_name(cfg.get("flux", "burgers"), dim)
        t_end = float(cfg.get("t_end", "100"))
        return SolverConfig(
            spec=spec,
            flux=flux,
            ul=float(cfg.get("ul", "-0.5")),
            ur=float(cfg.get("ur", "0.5")),
            w0_modes=_modes(cfg.get("w0_modes", "")),
            v0=_v0_from_spec(cfg.get("v0", "none")),
            t_end=t_end,
            snapshot_times=_snapshot_times(cfg.get("snapshots", "auto"), t_end),
            cfl=float(cfg.get("cfl", "0.4")),
            tail_threshold=float(cfg.get("tail_threshold", "0.25")),
            dt=float(cfg["dt"]) if "dt" in cfg else None,
            profile_refine=int(cfg.get("profile_refine", "1")),
            store_fields=cfg.get("store_fields", "false").lower() in ("1", "true", "yes"),
        )
    except (ValueError, KeyError) as e:
        raise ConfigError(str(e)) from e


# --- artifact helpers ---------------------------------------------------------

def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _Outputs:
    def __init__(self, outdir, cfg_text: str, seed: int):
        os.makedirs(outdir, exist_ok=True)
        self.outdir = outdir
        self.cfg_text = cfg_text
        self.seed = seed
        self.t0 = time.time()
        self.files: list[str] = []

    def path(self, name: str) -> str:
        self.files.append(name)
        return os.path.join(self.outdir, name)

    def finish(self, extra: dict | None = None) -> str:
        manifest = {
            "version": __version__,
            "numpy": np.__version__,
            "config_sha256": hashlib.sha256(self.cfg_text.encode()).hexdigest(),
            "seed": self.seed,
            "wall_seconds": time.time() - self.t0,
            "files": {
                name: _sha256(os.path.join(self.outdir, name)) for name in self.files
            },
        }
        if extra:
            manifest.update(extra)
        path = os.path.join(self.outdir, "manifest.json")
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2)
        return path


_PLOT_HEADER = (
    'set datafile separator ","\n'
    "set logscale xy\n"
    "set key left bottom\n"
    'set xlabel "1 + t"\n'
)


def _write_decay_plot(path, csv_name: str, columns: dict[str, int], guides: dict[str, float]):
    """Gnuplot script: log-log decay curves plus predicted-slope guide lines."""
    lines = [_PLOT_HEADER, f'set ylabel "norm"\n']
    plots = []
    for label, col in columns.items():
        plots.append(f'"{csv_name}" using (1+$1):{col} with linespoints title "{label}"')
    for label, slope in guides.items():
        plots.append(f"x**({slope}) title \"guide {label}: slope {slope}\"")
    lines.append("plot " + ", \\\n     ".join(plots) + "\n")
    with open(path, "w") as fh:
        fh.writelines(lines)


# --- experiments ---------------------------------------------------------------

def _exp_simulate(cfg: dict[str, str], out: _Outputs, rng: np.random.Generator) -> int:
    sc = solver_config_from_dict(cfg)
    traj = run_solver(sc)
    write_norm_table(traj, out.path("norms.csv"))

    window = tuple(_floats(cfg["rates.window"])) if "rates.window" in cfg else None
    dist = traj.series["phi_linf"] + traj.series["ansatz_minus_profile_linf"]
    report = {"main_rate": verify_main_theorem(traj.times, dist, window)}
    fits = {}
    for p, col in ((1.0, "phi_l1"), (2.0, "phi_l2"), (4.0, "phi_l4"), (np.inf, "phi_linf")):
        report[f"phi_l{p:g}" if not np.isinf(p) else "phi_linf"] = verify_apriori(
            traj.times, traj.series[col], p, "phi", window)
        if not (p == 1.0):
            fits[p] = report["phi_linf" if np.isinf(p) else f"phi_l{p:g}"]["fit"]["exponent"]
    w = window or (traj.times[-1] / 10.0, traj.times[-1])
    fits[1.0] = fit_power_law(traj.times, traj.series["phi_l1"], w).exponent
    for p, col in ((2.0, "grad_phi_l2"), (4.0, "grad_phi_l4")):
        report[f"grad_phi_l{p:g}"] = verify_apriori(traj.times, traj.series[col], p,
                                                    "grad_phi", window)
    report["ordering"] = exponent_ordering(fits)
    report["max_principle_violation"] = traj.max_principle_violation
    report["boundary_mismatch"] = traj.boundary_mismatch
    write_rate_report(report, out.path("rates.json"))
    _write_decay_plot(
        out.path("plots.gp"), "norms.csv",
        {"|phi|_1": 2, "|phi|_2": 3, "|phi|_4": 4, "|phi|_inf": 5,
         "|grad phi|_2": 6, "|u-profile|_inf": 8},
        {"phi_inf": -0.5, "phi_2": -0.25, "grad_phi_2": -0.75},
    )
    out.finish({"experiment": "simulate", "dt_steps": len(traj.times)})
    failed = [k for k, v in report.items()
              if isinstance(v, dict) and v.get("status") == "fail"]
    if failed:
        raise RatesFailure(f"rate checks failed: {', '.join(failed)}")
    return 0


def _exp_profile(cfg: dict[str, str], out: _Outputs, rng) -> int:
    L = float(cfg.get("L", "120"))
    n1 = int(cfg.get("n1", "4800"))
    ul, ur = float(cfg.get("ul", "-0.5")), float(cfg.get("ur", "0.5"))
    flux = flux_from_name(cfg.get("flux", "burgers"), 1)
    t_end = float(cfg.get("t_end", "100"))
    snaps = _snapshot_times(cfg.get("snapshots", "geometric:1,2"), t_end)
    p0 = make_initial_state(L, n1, ul, ur)
    states = evolve_profile(p0, flux, t_end, cfl=float(cfg.get("cfl", "0.4")),
                            snapshot_times=snaps)
    write_profile_series(states, flux, out.path("profile_series.csv"))
    last = states[-1]
    write_snapshot(profile_to_field(last), out.path("profile_final.field"))
    exact = inviscid_rarefaction(last.x1, last.t, flux, ul, ur)
    summary = {
        "t_final": last.t,
        "sup_distance_to_fan": float(np.max(np.abs(last.values - exact))),
        "oleinik_product": oleinik_bound(last)[1],
    }
    with open(out.path("profile_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    _write_decay_plot(out.path("plots.gp"), "profile_series.csv",
                      {"max_slope": 2, "slope_l2": 5}, {"slope": -1.0})
    out.finish({"experiment": "profile"})
    return 0


def _exp_periodic(cfg: dict[str, str], out: _Outputs, rng) -> int:
    sizes = tuple(int(x) for x in cfg.get("sizes", "32,32").split(","))
    tspec = TorusSpec(sizes=sizes)
    flux = flux_from_name(cfg.get("flux", "burgers"), len(sizes))
    ubar = float(cfg.get("ubar", "-0.5"))
    t_end = float(cfg.get("t_end", "0.5"))
    dt = float(cfg["dt"]) if "dt" in cfg else None
    modes = _modes(cfg.get("w0_modes", "1,1,0.1"))
    w0 = trig_polynomial(modes, tspec.coordinates())
    snaps = _snapshot_times(cfg.get("snapshots", ""), t_end) or tuple(
        np.linspace(t_end / 100.0, t_end, 100))
    states = solve_periodic(w0, ubar, flux, t_end, snaps, spec=tspec, dt=dt)
    write_periodic_series(states, out.path("periodic_series.csv"))
    ts = np.array([s.t for s in states])
    sups = np.array([w_sup_norms(s)[0] for s in states])
    w1inf = np.array([max(w_sup_norms(s)) for s in states])
    inside = (sups >= 1e-10) & (sups <= 1e-2)
    report = {"sup_initial": float(sups[0]), "sup_final": float(sups[-1])}
    if int(np.sum(inside)) >= 4:
        lo, hi = float(np.min(ts[inside])), float(np.max(ts[inside]))
        alpha, r2 = fit_exponential_decay(ts, w1inf, (lo, hi))
        report.update({"alpha": alpha, "rate_2alpha": 2 * alpha, "r2": r2,
                       "window": [lo, hi]})
    with open(out.path("periodic_decay.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    with open(out.path("plots.gp"), "w") as fh:
        fh.write('set datafile separator ","\nset logscale y\n'
                 'plot "periodic_series.csv" using 1:2 with lines title "sup|w|",'
                 ' "" using 1:3 with lines title "sup|grad w|"\n')
    out.finish({"experiment": "periodic"})
    return 0


def _random_cylinder_field(spec: DomainSpec, rng: np.random.Generator,
                           n_modes: int = 5) -> Field:
    grid = make_grid(spec)
    mesh = np.meshgrid(grid.x1, *grid.torus, indexing="ij")
    vals = np.zeros(spec.shape)
    for _ in range(n_modes):
        amp = rng.standard_normal()
        term = np.full(spec.shape, amp)
        decay = np.exp(-((mesh[0] / (0.5 * spec.L)) ** 2))
        term = term * decay * np.cos(
            rng.integers(0, 3) * np.pi * mesh[0] / spec.L + rng.uniform(0, 2 * np.pi))
        for ax in range(1, spec.n):
            k = int(rng.integers(0, 4))
            term = term * np.cos(2 * np.pi * k * mesh[ax] + rng.uniform(0, 2 * np.pi))
        vals += term
    return Field(spec, vals)


def _exp_decompose(cfg: dict[str, str], out: _Outputs, rng: np.random.Generator) -> int:
    dim = int(cfg.get("dim", "3"))
    spec = DomainSpec(n=dim, L=float(cfg.get("L", "2")), n1=int(cfg.get("n1", "16")),
                      n_torus=tuple(int(x) for x in cfg.get("n_torus", "8,8").split(",")[: dim - 1]))
    n_fields = int(cfg.get("n_fields", "50"))
    worst = {"reconstruction": 0.0, "membership": 0.0, "ratio": 0.0}
    for _ in range(n_fields):
        f = _random_cylinder_field(spec, rng)
        d = decompose(f)
        rec = reconstruct(d)
        scale = max(1e-300, float(np.max(np.abs(f.values))))
        worst["reconstruction"] = max(
            worst["reconstruction"],
            float(np.max(np.abs(rec.values - f.values))) / scale)
        worst["membership"] = max(worst["membership"],
                                  check_membership(d)["max_slice_average"] / scale)
        for m in (0, 1):
            for p in (1.0, 2.0, np.inf):
                r = norm_bound_ratio(f, d, m, p)
                if np.isfinite(r):
                    worst["ratio"] = max(worst["ratio"], r)
    worst["ratio_bound"] = 4.0 ** (spec.n - 1)
    with open(out.path("decomposition_suite.json"), "w") as fh:
        json.dump(worst, fh, indent=2)
    sample = _random_cylinder_field(spec, rng)
    dump_components(decompose(sample), out.outdir)
    out.files.append("decomposition.json")
    out.finish({"experiment": "decompose", "n_fields": n_fields})
    return 0


def _exp_gn_study(cfg: dict[str, str], out: _Outputs, rng: np.random.Generator) -> int:
    dim = int(cfg.get("dim", "2"))
    spec = DomainSpec(n=dim, L=float(cfg.get("L", "4")), n1=int(cfg.get("n1", "64")),
                      n_torus=tuple(int(x) for x in cfg.get("n_torus", "16").split(",")[: dim - 1]))
    n_fields = int(cfg.get("n_fields", "40"))
    j, m = int(cfg.get("j", "0")), int(cfg.get("m", "1"))
    p, q, r = (float(cfg.get(k, d)) for k, d in (("p", "2"), ("q", "1"), ("r", "2")))
    rows = []
    for i in range(n_fields):
        f = _random_cylinder_field(spec, rng)
        res = gn_ratio(f, j, m, p, q, r)
        interp = interpolation_ratio(f, max(p, 2.0), q)
        rows.append((i, max(v for v in res["ratios"].values()), interp["ratio"]))
    with open(out.path("gn_ratios.csv"), "w") as fh:
        fh.write("field,gn_ratio_max,interpolation_ratio\n")
        for row in rows:
            fh.write(f"{row[0]},{row[1]:.17g},{row[2]:.17g}\n")
    summary = {
        "gn_ratio_max": max(r[1] for r in rows),
        "interpolation_ratio_max": max(r[2] for r in rows),
        "exponents": {"j": j, "m": m, "p": p, "q": q, "r": r},
    }
    with open(out.path("gn_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    out.finish({"experiment": "gn-study", "n_fields": n_fields})
    return 0


def _exp_counterexample(cfg: dict[str, str], out: _Outputs, rng) -> int:
    n = int(cfg.get("n", "2"))
    ds = _floats(cfg.get("dilations", "1,2,4,8,16,32,64"))
    profile = {"gaussian": gaussian_bump, "hat": hat_bump}[cfg.get("profile", "gaussian")]
    thetas = _floats(cfg.get("thetas", "0,0.3333333333333333,0.6666666666666666,1"))
    sob = [dilated_sobolev_ratio(d, profile, n) for d in ds]
    with open(out.path("sobolev_scaling.csv"), "w") as fh:
        fh.write("d,measured,predicted,ratio\n")
        for row in sob:
            fh.write(f"{row['d']:.17g},{row['measured']:.17g},{row['predicted']:.17g},"
                     f"{row['measured'] / row['predicted']:.17g}\n")
    summary = {
        "sobolev_slope": dilation_slope(ds, [r["measured"] for r in sob]),
        "sobolev_slope_predicted": (n - 1.0) / n,
        "C_at_d1": sob[0]["measured"],
        "theta_slopes": {},
    }
    for theta in thetas:
        vals = [dilated_gn_ratio(d, theta, profile)["measured"] for d in ds]
        summary["theta_slopes"][f"{theta:.6g}"] = {
            "measured": dilation_slope(ds, vals),
            "predicted": 0.5 * (3.0 * theta - 1.0),
        }
    with open(out.path("counterexample_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    with open(out.path("plots.gp"), "w") as fh:
        fh.write('set datafile separator ","\nset logscale xy\n'
                 'plot "sobolev_scaling.csv" using 1:2 title "measured", '
                 f'x**({(n-1.0)/n}) title "guide"\n')
    out.finish({"experiment": "counterexample"})
    return 0


def _exp_rates(cfg: dict[str, str], out: _Outputs, rng) -> int:
    src = cfg.get("input", "")
    if not src or not os.path.exists(src):
        raise ConfigError(f"rates experiment needs input = <norms.csv>, got '{src}'")
    data = np.genfromtxt(src, delimiter=",", names=True)
    times = data["t"]
    window = tuple(_floats(cfg["rates.window"])) if "rates.window" in cfg else None
    report = {"main_rate": verify_main_theorem(times, data["u_minus_profile_linf"], window)}
    for p, col in ((1.0, "phi_l1"), (2.0, "phi_l2"), (4.0, "phi_l4"), (np.inf, "phi_linf")):
        name = "phi_linf" if np.isinf(p) else f"phi_l{p:g}"
        report[name] = verify_apriori(times, data[col], p, "phi", window)
    for p in (2.0, 4.0):
        report[f"grad_phi_l{p:g}"] = verify_apriori(
            times, data[f"grad_phi_l{p:g}"], p, "grad_phi", window)
    write_rate_report(report, out.path("rates.json"))
    out.finish({"experiment": "rates", "input": src})
    failed = [k for k, v in report.items()
              if isinstance(v, dict) and v.get("status") == "fail"]
    if failed:
        raise RatesFailure(f"rate checks failed: {', '.join(failed)}")
    return 0


def validate(cfg: dict[str, str]) -> list[str]:
    """Dry-run validation of a simulate config; returns findings."""
    try:
        sc = solver_config_from_dict(cfg)
    except ConfigError as e:
        return [str(e)]
    findings = validate_config(sc)
    for key in ("rates.grad_p",):
        if key in cfg:
            for p in _floats(cfg[key]):
                if p < 2.0:
                    findings.append(
                        f"gradient rates are only predicted for p >= 2, got p = {p}")
    return findings


_EXPERIMENTS = {
    "simulate": _exp_simulate,
    "profile": _exp_profile,
    "periodic": _exp_periodic,
    "decompose": _exp_decompose,
    "gn-study": _exp_gn_study,
    "counterexample": _exp_counterexample,
    "rates": _exp_rates,
}


def run_experiment(cfg: dict[str, str], outdir, seed: int = 0) -> int:
    kind = cfg.get("experiment", "simulate")
    if kind not in _EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{kind}' "
                          f"(choose from {sorted(_EXPERIMENTS)})")
    cfg_text = "\n".join(f"{k} = {v}" for k, v in sorted(cfg.items()))
    out = _Outputs(outdir, cfg_text, seed)
    rng = np.random.default_rng(seed)
    return _EXPERIMENTS[kind](cfg, out, rng)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rarelab",
        description="numerical experiments for rarefaction waves under periodic "
                    "perturbations on the cylinder")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*_EXPERIMENTS, "validate"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=(name != "validate") or True,
                        help="flat key=value config file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--jobs", type=int, default=1,
                        help="worker cap (results are identical for any value)")
        sp.add_argument("--seed", type=int, default=0, help="corpus seed")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            findings = validate(cfg)
            if findings:
                for f in findings:
                    print(f"violation: {f}")
                return 1
            print("no violations")
            return 0
        cfg.setdefault("experiment", args.command)
        if cfg["experiment"] != args.command:
            raise ConfigError(
                f"config says experiment = {cfg['experiment']}, "
                f"but the {args.command} subcommand was invoked")
        return run_experiment(cfg, args.out, seed=args.seed)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except NumericalAbort as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return 2
    except RatesFailure as e:
        print(f"acceptance failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
