import numpy as np
import pytest

from hamlearn import dynamics as dyn
from hamlearn.errors import ConfigError, DomainError


def test_phase_state_validation():
    s = dyn.PhaseState([1.0, 2.0], [0.5, -0.5], 0.1)
    assert s.dim == 2
    with pytest.raises(ConfigError):
        dyn.PhaseState([1.0], [0.5, 0.5])
    with pytest.raises(ConfigError):
        dyn.PhaseState([np.nan], [0.5])


def test_mass_matrix_positive():
    with pytest.raises(ConfigError):
        dyn.MassMatrix(np.array([1.0, 0.0]))
    assert np.allclose(dyn.coulomb_pair().mass.inv_diag, [1, 1, 1, 2, 2, 2])


class TestEvalPotential:
    def test_sho(self):
        assert dyn.eval_potential(dyn.harmonic_oscillator(), np.array([2.0])) == 2.0

    def test_double_well_at_zero(self):
        # expansion -1 + 2q + 3q^2 - 4q^3 + q^4 at q=0
        assert dyn.eval_potential(dyn.double_well(), np.array([0.0])) == -1.0

    def test_double_well_at_one(self):
        assert dyn.eval_potential(dyn.double_well(), np.array([1.0])) == 1.0

    def test_double_well_matches_expansion(self):
        spec = dyn.double_well()
        for q in np.linspace(-1.5, 3.5, 23):
            expanded = -1 + 2 * q + 3 * q**2 - 4 * q**3 + q**4
            assert dyn.eval_potential(spec, np.array([q])) == pytest.approx(expanded, rel=1e-12)

    def test_coulomb_unit_separation(self):
        q = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        v = dyn.eval_potential(dyn.coulomb_pair(), q)
        assert v == pytest.approx(-1.0 / (4 * np.pi), rel=1e-12)
        assert v == pytest.approx(-0.0795775, abs=1e-7)

    def test_central_force_value(self):
        v = dyn.eval_potential(dyn.central_force(), np.array([2.0, 0.0, 0.0]))
        assert v == pytest.approx(0.5 + 0.125, rel=1e-12)

    def test_singularities(self):
        cf = dyn.central_force()
        with pytest.raises(DomainError):
            dyn.eval_potential(cf, np.zeros(3))
        with pytest.raises(DomainError):
            dyn.eval_potential(cf, np.array([10.0, 0.0, 0.0]))
        with pytest.raises(DomainError):
            dyn.eval_potential(dyn.coulomb_pair(), np.array([1.0, 2.0, 3.0, 1.0, 2.0, 3.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            dyn.eval_potential(dyn.harmonic_oscillator(), np.array([1.0, 2.0]))


class TestEvalForce:
    def test_sho(self):
        assert dyn.eval_force(dyn.harmonic_oscillator(), np.array([3.0]))[0] == -3.0

    def test_double_well_at_zero(self):
        # derivative of -1 + 2q + 3q^2 - 4q^3 + q^4 at 0 is 2
        assert dyn.eval_force(dyn.double_well(), np.array([0.0]))[0] == -2.0

    def test_force_matches_central_difference(self):
        # 100 random in-domain points per system, norm-wise relative error <= 1e-6
        rng = np.random.default_rng(42)
        cases = [
            (dyn.harmonic_oscillator(), lambda: rng.uniform(-5, 5, 1)),
            (dyn.double_well(), lambda: rng.uniform(-1.5, 3.5, 1)),
            (dyn.central_force(), lambda: rng.uniform(-2, 2, 3) + np.array([3.0, 0, 0])),
            (dyn.coulomb_pair(), lambda: rng.normal(0, 1, 6)),
        ]
        eps = 1e-5
        for spec, draw in cases:
            checked = 0
            while checked < 100:
                q = draw()
                try:
                    f = dyn.eval_force(spec, q)
                except DomainError:
                    continue
                fd = np.empty_like(q)
                for j in range(q.size):
                    qp = q.copy()
                    qp[j] += eps
                    qm = q.copy()
                    qm[j] -= eps
                    fd[j] = -(dyn.eval_potential(spec, qp) - dyn.eval_potential(spec, qm)) / (2 * eps)
                assert np.linalg.norm(f - fd) <= 1e-6 * max(np.linalg.norm(fd), 1e-8), spec.kind
                checked += 1


class TestIntegrators:
    def test_rk4_single_step_vs_exact(self):
        spec = dyn.harmonic_oscillator()
        s1 = dyn.rk4_step(spec, dyn.PhaseState([0.0], [1.0]), 0.01)
        assert abs(s1.q[0] - np.sin(0.01)) < 1e-10
        assert abs(s1.p[0] - np.cos(0.01)) < 1e-10

    def test_zero_step_is_identity(self):
        spec = dyn.double_well()
        s = dyn.PhaseState([0.3], [-0.7])
        for stepper in (dyn.rk4_step, dyn.stormer_verlet_step):
            s1 = stepper(spec, s, 0.0)
            assert np.array_equal(s1.q, s.q) and np.array_equal(s1.p, s.p)

    def _global_errors(self, method, hs):
        spec = dyn.harmonic_oscillator()
        errs = []
        for h in hs:
            n = round(6.4 / h)
            traj = dyn.simulate(spec, dyn.PhaseState([0.0], [1.0]), h, n, method)
            qe, pe = dyn.sho_exact(0.0, 1.0, n * h)
            errs.append(float(np.hypot(traj.qs[-1, 0] - qe, traj.ps[-1, 0] - pe)))
        return errs

    def test_rk4_fourth_order(self):
        errs = self._global_errors(dyn.RK4, [0.04, 0.02])
        assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.25)

    def test_verlet_second_order(self):
        errs = self._global_errors(dyn.VERLET, [0.04, 0.02])
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.25)

    def test_verlet_energy_drift_sho(self):
        spec = dyn.harmonic_oscillator()
        traj = dyn.simulate(spec, dyn.PhaseState([0.0], [1.0]), 0.001, 10**4, dyn.VERLET)
        H = dyn.total_energy(spec, traj.qs, traj.ps)
        assert np.max(np.abs(H - H[0])) <= 1e-6

    def test_verlet_energy_halving(self):
        spec = dyn.harmonic_oscillator()

        def drift(h):
            traj = dyn.simulate(spec, dyn.PhaseState([0.0], [1.0]), h, round(3.0 / h), dyn.VERLET)
            H = dyn.total_energy(spec, traj.qs, traj.ps)
            return np.max(np.abs(H - H[0]))

        assert drift(0.02) / drift(0.01) == pytest.approx(4.0, rel=0.25)

    def test_verlet_energy_bounded_all_systems(self):
        # representative in-domain initial conditions for every benchmark
        cases = [
            (dyn.harmonic_oscillator(), [0.0], [1.0]),
            (dyn.double_well(), [3.0], [0.0]),
            (dyn.central_force(), [2.0, 0.5, -0.3], [0.2, 0.4, 0.1]),
            (dyn.coulomb_pair(), [0.0, 0.0, 0.0, 1.5, 0.0, 0.0], [0.0, 0.2, 0.0, 0.0, -0.3, 0.1]),
        ]
        for spec, q0, p0 in cases:
            traj = dyn.simulate(spec, dyn.PhaseState(q0, p0), 0.001, 10**4, dyn.VERLET)
            H = dyn.total_energy(spec, traj.qs, traj.ps)
            assert np.max(np.abs(H - H[0])) <= 1e-5 * abs(H[0]), spec.kind

    def test_free_particle_drift(self):
        spec = dyn.free_particle(2)
        s = dyn.PhaseState([0.0, 1.0], [2.0, -1.0])
        s1 = dyn.stormer_verlet_step(spec, s, 0.5)
        assert np.array_equal(s1.p, s.p)
        assert np.allclose(s1.q, s.q + 0.5 * s.p, rtol=0, atol=0)


class TestSimulate:
    def test_sho_circles(self):
        spec = dyn.harmonic_oscillator()
        traj = dyn.simulate(spec, dyn.PhaseState([0.0], [1.0]), 0.01, 1000, dyn.RK4)
        radius = traj.qs[:, 0] ** 2 + traj.ps[:, 0] ** 2
        assert np.max(np.abs(radius - 1.0)) <= 1e-8

    def test_radius_i_circles(self):
        spec = dyn.harmonic_oscillator()
        for i in (1, 5, 10):
            traj = dyn.simulate(spec, dyn.PhaseState([0.0], [float(i)]), 0.01, 200, dyn.RK4)
            radius = np.sqrt(traj.qs[:, 0] ** 2 + traj.ps[:, 0] ** 2)
            assert np.max(np.abs(radius - i)) <= 1e-7 * i

    def test_single_step_length(self):
        traj = dyn.simulate(dyn.harmonic_oscillator(), dyn.PhaseState([0.0], [1.0]), 0.01, 1)
        assert len(traj) == 2

    def test_time_grid(self):
        traj = dyn.simulate(dyn.harmonic_oscillator(), dyn.PhaseState([0.0], [1.0]), 0.01, 50)
        t = traj.times
        expected = 0.01 * np.arange(51)
        assert np.max(np.abs(t - expected)) <= 1e-12 * np.maximum(np.abs(expected), 1.0).max()

    def test_deterministic(self):
        spec = dyn.double_well()
        a = dyn.simulate(spec, dyn.PhaseState([0.3], [0.4]), 0.001, 500, dyn.RK4)
        b = dyn.simulate(spec, dyn.PhaseState([0.3], [0.4]), 0.001, 500, dyn.RK4)
        assert np.array_equal(a.qs, b.qs) and np.array_equal(a.ps, b.ps)

    def test_domain_error_reports_step(self):
        spec = dyn.central_force()
        ic = dyn.PhaseState([9.5, 0.0, 0.0], [5.0, 0.0, 0.0])
        with pytest.raises(DomainError, match="step"):
            dyn.simulate(spec, ic, 1.0, 10, dyn.RK4)

    def test_bad_args(self):
        spec = dyn.harmonic_oscillator()
        ic = dyn.PhaseState([0.0], [1.0])
        with pytest.raises(ConfigError):
            dyn.simulate(spec, ic, 0.01, 0)
        with pytest.raises(ConfigError):
            dyn.simulate(spec, ic, -0.01, 5)
        with pytest.raises(ConfigError):
            dyn.simulate(spec, ic, 0.01, 5, "euler")

    def test_batch_matches_single(self):
        spec = dyn.coulomb_pair()
        rng = np.random.default_rng(0)
        q0 = rng.normal(size=(4, 6))
        p0 = rng.normal(size=(4, 6))
        batch = dyn.simulate_many(spec, q0, p0, 0.001, 300, dyn.VERLET)
        for j in range(4):
            single = dyn.simulate(spec, dyn.PhaseState(q0[j], p0[j]), 0.001, 300, dyn.VERLET)
            assert np.array_equal(batch[j].qs, single.qs)
            assert np.array_equal(batch[j].ps, single.ps)


class TestReduceToRadial:
    def test_orthogonal(self):
        traj = dyn.Trajectory(
            np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]),
            np.array([[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]]),
            0.1,
        )
        rad = dyn.reduce_to_radial(traj, dyn.MassMatrix(np.ones(3)))
        assert rad.r[0] == 1.0 and rad.rdot[0] == 0.0 and rad.ell == 1.0

    def test_radial_motion(self):
        traj = dyn.Trajectory(
            np.array([[1.0, 0.0, 0.0], [1.2, 0.0, 0.0]]),
            np.array([[2.0, 0.0, 0.0], [2.0, 0.0, 0.0]]),
            0.1,
        )
        rad = dyn.reduce_to_radial(traj, dyn.MassMatrix(np.ones(3)))
        assert rad.r[0] == 1.0 and rad.rdot[0] == 2.0 and rad.ell == 0.0

    def test_angular_momentum_conserved(self):
        spec = dyn.central_force()
        ic = dyn.PhaseState([1.0, 0.3, -0.2], [0.1, 0.5, 0.2])
        traj = dyn.simulate(spec, ic, 0.001, 5000, dyn.RK4)
        ell = dyn.angular_momentum(traj)
        assert np.max(np.abs(ell - ell[0])) <= 1e-6 * ell[0]

    def test_rdot_matches_finite_difference(self):
        spec = dyn.central_force()
        ic = dyn.PhaseState([1.0, 0.3, -0.2], [0.1, 0.5, 0.2])
        h = 0.001
        traj = dyn.simulate(spec, ic, h, 2000, dyn.RK4)
        rad = dyn.reduce_to_radial(traj, spec.mass)
        fd = (rad.r[2:] - rad.r[:-2]) / (2 * h)
        assert np.max(np.abs(rad.rdot[1:-1] - fd)) <= 5 * h**2 * np.max(np.abs(rad.rdot))

    def test_requires_3d(self):
        traj = dyn.simulate(dyn.harmonic_oscillator(), dyn.PhaseState([0.0], [1.0]), 0.01, 5)
        with pytest.raises(ConfigError):
            dyn.reduce_to_radial(traj, dyn.MassMatrix(np.ones(1)))


def test_total_energy_kinetic_convention():
    # H = p^T M^-1 p / 2 + V(q)
    spec = dyn.coulomb_pair()
    q = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    p = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    expected = 0.5 * (1.0 + 2.0) + (-1.0 / (4 * np.pi))
    assert dyn.total_energy(spec, q, p) == pytest.approx(expected, rel=1e-12)
