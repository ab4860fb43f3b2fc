import numpy as np
import pytest

from rarelab.domain import DomainSpec, Field
from rarelab.errors import ConfigError, NumericalAbort
from rarelab.fluxes import burgers, cubic, linear_flux
from rarelab.mdsolver import (
    SolverConfig,
    perturbation_field,
    run,
    trig_polynomial,
    validate_config,
    write_norm_table,
    NORM_COLUMNS,
)

FLUX = burgers(2)


def small_config(**kw):
    base = dict(
        spec=DomainSpec(n=2, L=20, n1=400, n_torus=(10,)),
        flux=FLUX,
        ul=-0.5,
        ur=0.5,
        w0_modes=((1, 1, 0.1),),
        t_end=5.0,
        snapshot_times=(1.0, 5.0),
        profile_refine=1,
    )
    base.update(kw)
    return SolverConfig(**base)


class TestValidation:
    def test_reference_style_config_clean(self):
        assert validate_config(small_config()) == []

    def test_fan_speed_bound(self):
        cfg = small_config(t_end=50.0, snapshot_times=(50.0,))
        found = validate_config(cfg)
        assert any("fan" in msg for msg in found)

    def test_constant_mode_rejected(self):
        found = validate_config(small_config(w0_modes=((0, 0, 0.1),)))
        assert any("zero-average" in msg for msg in found)

    def test_bad_cfl_and_threshold(self):
        assert any("cfl" in m for m in validate_config(small_config(cfl=0.7)))
        assert any("tail" in m for m in validate_config(small_config(tail_threshold=2.0)))

    def test_grid_alignment(self):
        cfg = small_config(spec=DomainSpec(n=2, L=20, n1=414, n_torus=(10,)))
        assert any("unit period" in m for m in validate_config(cfg))

    def test_convexity_on_working_range(self):
        cfg = small_config(flux=cubic(2), ul=-0.5, ur=0.5)
        assert any("a0" in m or "f_1''" in m for m in validate_config(cfg))

    def test_run_raises_on_invalid(self):
        with pytest.raises(ConfigError):
            run(small_config(cfl=0.9))


class TestTrigPolynomial:
    def test_reference_mode(self):
        xs = (np.array([0.25]), np.array([0.25]))
        val = trig_polynomial([(1, 1, 0.1)], xs)
        assert val[0, 0] == pytest.approx(0.1)

    def test_zero_wavenumber_factor_skipped(self):
        xs = (np.array([0.25]), np.array([0.1]))
        val = trig_polynomial([(1, 0, 2.0)], xs)
        assert val[0, 0] == pytest.approx(2.0)


class TestZeroDisturbance:
    @pytest.fixture(scope="class")
    def traj(self):
        return run(small_config(w0_modes=(), t_end=5.0, snapshot_times=(5.0,)))

    def test_perturbation_at_roundoff(self, traj):
        # same-grid backbone: the cylinder run reproduces the 1-d profile
        assert traj.series["phi_linf"][-1] < 1e-12

    def test_max_principle(self, traj):
        assert traj.max_principle_violation <= 1e-10

    def test_boundary_exact(self, traj):
        assert traj.boundary_mismatch == 0.0


class TestPerturbedRun:
    @pytest.fixture(scope="class")
    def traj(self):
        return run(small_config(store_fields=True))

    def test_initial_perturbation_vanishes(self):
        cfg = small_config(snapshot_times=(0.0, 1.0), store_fields=True)
        traj = run(cfg)
        assert traj.times[0] == 0.0
        assert traj.series["phi_linf"][0] < 1e-13

    def test_range_stays_inside_data_range(self, traj):
        assert traj.max_principle_violation <= 1e-10
        for i in range(len(traj.times)):
            assert traj.series["max_u"][i] <= 0.6 + 1e-10
            assert traj.series["min_u"][i] >= -0.6 - 1e-10

    def test_perturbation_field_matches_series(self, traj):
        u = traj.u[-1]
        bundle = traj.bundles[-1]
        phi = perturbation_field(u, bundle)
        assert np.max(np.abs(phi.values)) == pytest.approx(
            traj.series["phi_linf"][-1], rel=1e-12)

    def test_perturbation_field_examples(self, traj):
        u = traj.u[-1]
        bundle = traj.bundles[-1]
        same = perturbation_field(bundle.u_tilde, bundle)
        assert np.max(np.abs(same.values)) == 0.0
        shifted = Field(u.spec, bundle.u_tilde.values + 0.25, u.t)
        assert np.allclose(perturbation_field(shifted, bundle).values, 0.25)

    def test_time_mismatch_rejected(self, traj):
        u = traj.u[-1]
        with pytest.raises(ValueError):
            perturbation_field(Field(u.spec, u.values, u.t + 1.0), traj.bundles[-1])

    def test_v0_sets_initial_perturbation(self):
        v0 = lambda x: 0.02 * np.exp(-((x - 3.0) ** 2))
        cfg = small_config(v0=v0, snapshot_times=(0.0,), t_end=1.0,
                           store_fields=True)
        traj = run(cfg)
        grid_x1 = np.linspace(-20 + 0.05, 20 - 0.05, 400)
        expect = v0(grid_x1)
        got = traj.phi[0].values[:, 0]
        assert np.max(np.abs(got - expect)) < 1e-12


class TestDeterminism:
    def test_bitwise_identical_norm_tables(self):
        cfg = small_config(t_end=2.0, snapshot_times=(1.0, 2.0))
        a = run(cfg)
        b = run(cfg)
        for key in a.series:
            assert np.array_equal(a.series[key], b.series[key]), key


class TestAborts:
    def test_cfl_abort(self):
        with pytest.raises(NumericalAbort) as exc:
            run(small_config(dt=1.0))
        assert exc.value.reason == "cfl"

    def test_tail_abort(self):
        cfg = small_config(tail_threshold=1e-12, tail_floor=0.0,
                           snapshot_times=(1.0,), t_end=1.0)
        with pytest.raises(NumericalAbort) as exc:
            run(cfg)
        assert exc.value.reason == "tail"


class TestNormTable:
    def test_csv_columns(self, tmp_path):
        traj = run(small_config(t_end=1.0, snapshot_times=(0.5, 1.0)))
        path = tmp_path / "norms.csv"
        write_norm_table(traj, path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == ",".join(NORM_COLUMNS)
        assert len(rows) == 3
        values = [float(tok) for tok in rows[1].split(",")]
        assert len(values) == len(NORM_COLUMNS)
