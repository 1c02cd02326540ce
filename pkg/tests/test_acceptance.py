"""Acceptance suite: one test per release criterion, desk scale.

Each test prints a PASS/FAIL line so a full run doubles as the acceptance
report.  The experiment tests retrain from fixed seeds and take minutes;
run them with `pytest tests/test_acceptance.py -v -s`.
"""

import time

import numpy as np
import pytest

from hamlearn import dynamics as dyn
from hamlearn import experiments as ex
from hamlearn import neural as nn
from hamlearn import sindy
from hamlearn.cli import main
from hamlearn.errors import AllPrunedError

RESULTS = []


def report(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
    RESULTS.append(line)
    print("\n" + line)
    assert ok, line


@pytest.fixture(scope="module")
def sho_result():
    spec = ex.default_spec("sho", scale="desk", seed=0)
    return ex.run_experiment(spec, quiet=True)


class TestCriterion1SHO:
    def test_sho_recovery(self, sho_result):
        res = sho_result
        cm = sindy.coefficient_map(res.fit, res.library)
        beta2 = cm.get("q^2", 0.0)
        pruned = "q" not in cm and "q^3" not in cm
        ok = abs(beta2 - 0.5) <= 0.05 and pruned and res.wall_time <= 300
        report(
            1,
            ok,
            f"sho beta(q^2)={beta2:.4f} (|err|={abs(beta2-0.5):.4f} <= 0.05), "
            f"q/q^3 pruned={pruned}, wall={res.wall_time:.0f}s <= 300s",
        )


class TestCriterion2DoubleWell:
    @pytest.mark.parametrize("variant", ["t1", "t2", "t3"])
    def test_double_well_recovery(self, variant):
        spec = ex.default_spec("double-well", scale="desk", seed=0, variant=variant)
        res = ex.run_experiment(spec, quiet=True)
        cm = sindy.coefficient_map(res.fit, res.library)
        errs = res.comparison.errors
        within = all(errs[k] <= 0.05 for k in ("q", "q^2", "q^3", "q^4"))
        pruned = "q^5" not in cm and "q^6" not in cm
        ok = within and pruned and not res.comparison.missing and res.wall_time <= 600
        report(
            2,
            ok,
            f"double-well {variant}: errors "
            + ", ".join(f"{k}={errs[k]:.4f}" for k in ("q", "q^2", "q^3", "q^4"))
            + f" (<= 0.05), q^5/q^6 pruned={pruned}, wall={res.wall_time:.0f}s <= 600s",
        )


class TestCriterion3CentralForce:
    def test_central_force_recovery(self):
        spec = ex.default_spec("central-force", scale="desk", seed=0)
        res = ex.run_experiment(spec, quiet=True)
        cm = sindy.coefficient_map(res.fit, res.library)
        errs = res.comparison.errors
        ok = (
            errs["r^-1"] <= 0.10
            and errs["(10-r)^-1"] <= 0.10
            and errs["r^-2"] <= 0.10
            and not res.comparison.spurious
            and not res.comparison.missing
            and res.wall_time <= 1800
        )
        report(
            3,
            ok,
            f"central-force: err(r^-1)={errs['r^-1']:.4f}, err((10-r)^-1)={errs['(10-r)^-1']:.4f}, "
            f"err(r^-2 vs own l^2/2={res.extras['ell_sq_half']:.4f})={errs['r^-2']:.4f} (<= 0.10), "
            f"spurious={list(res.comparison.spurious) or 'none'}, wall={res.wall_time:.0f}s <= 1800s",
        )


class TestCriterion4CoulombDistance:
    def test_distance_recovery(self):
        spec = ex.default_spec("coulomb-distance", scale="desk", seed=0)
        res = ex.run_experiment(spec, quiet=True)
        cm = sindy.coefficient_map(res.fit, res.library)
        truth = -1.0 / (4 * np.pi)
        beta1 = cm.get("r^-1", 0.0)
        pruned = "r^-2" not in cm and "r^-3" not in cm
        err = abs(beta1 - truth) / abs(truth)
        ok = err <= 0.10 and pruned and res.wall_time <= 1800
        report(
            4,
            ok,
            f"coulomb-distance: beta(r^-1)={beta1:.5f} vs {truth:.5f} (err={err:.4f} <= 0.10), "
            f"r^-2/r^-3 pruned={pruned}, wall={res.wall_time:.0f}s <= 1800s",
        )


class TestCriterion5CoulombDifference:
    def test_difference_recovery(self):
        spec = ex.default_spec("coulomb-difference", scale="desk", seed=0)
        res = ex.run_experiment(spec, quiet=True)
        cm = sindy.coefficient_map(res.fit, res.library)
        truth = -1.0 / (4 * np.pi)
        beta1 = cm.get("r^-1", 0.0)
        err = abs(beta1 - truth) / abs(truth)
        ok = err <= 0.25 and res.final_loss <= 0.05 and res.wall_time <= 3600
        report(
            5,
            ok,
            f"coulomb-difference: beta(r^-1)={beta1:.5f} vs {truth:.5f} (err={err:.4f} <= 0.25), "
            f"final loss={res.final_loss:.4f} <= 0.05, wall={res.wall_time:.0f}s <= 3600s",
        )


class TestCriterion6DerivativeExactness:
    def _grad_input_check(self, net, rng, n_points=100):
        worst = 0.0
        eps = 1e-5
        d = net.raw_input_dim
        for _ in range(n_points):
            q = rng.normal(0.5, 1.0, d)
            g = nn.grad_input(net, q)
            fd = np.empty(d)
            for j in range(d):
                qp, qm = q.copy(), q.copy()
                qp[j] += eps
                qm[j] -= eps
                fd[j] = (nn.forward(net, qp) - nn.forward(net, qm)) / (2 * eps)
            worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-8))
        return worst

    def _param_check(self, net, rng, n_params=60):
        d = net.raw_input_dim
        qs = rng.normal(0.5, 0.8, (16, d))
        ps = rng.normal(0.0, 1.0, (16, d))
        corpus = [dyn.Trajectory(qs[:8], ps[:8], 1.0), dyn.Trajectory(qs[8:], ps[8:], 1.0)]
        Q, U = nn.stack_transitions(corpus)
        _, grad = nn.loss_param_gradient_from_stacked(net, Q, U)
        flat = []
        for li in range(net.n_layers):
            for idx in np.ndindex(net.weights[li].shape):
                flat.append(("w", li, idx))
            for j in range(net.biases[li].size):
                flat.append(("b", li, j))
        sel = rng.choice(len(flat), size=min(n_params, len(flat)), replace=False)
        worst = 0.0
        eps = 6e-6
        for si in sel:
            kind, li, idx = flat[si]
            arr = net.weights[li] if kind == "w" else net.biases[li]
            g = grad.weights[li][idx] if kind == "w" else grad.biases[li][idx]
            save = arr[idx]
            arr[idx] = save + eps
            lp = nn.loss_from_stacked(net, Q, U)
            arr[idx] = save - eps
            lm = nn.loss_from_stacked(net, Q, U)
            arr[idx] = save
            fd = (lp - lm) / (2 * eps)
            if abs(fd) < 1e-12 and abs(g) < 1e-12:
                continue
            worst = max(worst, abs(g - fd) / max(abs(fd), 1e-10))
        return worst

    def test_derivative_exactness_all_architectures(self):
        t0 = time.perf_counter()
        # every architecture the benchmark experiments use
        architectures = [
            ((1, 16, 16, 1), (nn.TANH,) * 2, nn.IDENTITY, nn.OUT_IDENTITY),
            ((1, 16, 16, 1), (nn.ELU,) * 2, nn.IDENTITY, nn.OUT_IDENTITY),
            ((1, 16, 16, 1), (nn.SOFTPLUS,) * 2, nn.IDENTITY, nn.OUT_EXP),
            ((3,) + (16,) * 8 + (1,), (nn.TANH,) * 8, nn.PAIR_DIFFERENCE, nn.OUT_IDENTITY),
            ((1,) + (8,) * 8 + (1,), (nn.TANH,) * 8, nn.PAIR_DISTANCE, nn.OUT_IDENTITY),
        ]
        rng = np.random.default_rng(2024)
        worst_g, worst_p = 0.0, 0.0
        for dims, acts, transform, out in architectures:
            net = nn.init_network(dims, acts, transform, out, seed=6)
            for b in net.biases:
                b += rng.normal(0, 0.2, b.shape)
            worst_g = max(worst_g, self._grad_input_check(net, rng))
            worst_p = max(worst_p, self._param_check(net, rng))
        wall = time.perf_counter() - t0
        ok = worst_g <= 1e-6 and worst_p <= 1e-5 and wall <= 60
        report(
            6,
            ok,
            f"grad_input worst rel err={worst_g:.2e} <= 1e-6; "
            f"loss gradient worst rel err={worst_p:.2e} <= 1e-5; wall={wall:.1f}s <= 60s",
        )


class TestCriterion7StlsqOracle:
    def _best_subset_objective(self, X, y, lam):
        J = X.shape[1]
        best = float(np.dot(y, y))
        for bits in range(1, 2**J):
            mask = np.array([(bits >> j) & 1 for j in range(J)], dtype=bool)
            beta = sindy.ols(X[:, mask], y)
            r = y - X[:, mask] @ beta
            best = min(best, float(np.dot(r, r)) + lam**2 * int(mask.sum()))
        return best

    def test_stlsq_oracle_equivalence(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(777)
        lam = 0.5
        hits = 0
        trials = 200
        for _ in range(trials):
            X = rng.normal(size=(20, 5))
            beta_star = np.zeros(5)
            support = rng.choice(5, size=rng.integers(1, 4), replace=False)
            beta_star[support] = rng.uniform(0.5, 2.0, support.size) * rng.choice([-1, 1], support.size)
            y = X @ beta_star + 0.1 * rng.normal(size=20)
            try:
                fit = sindy.stlsq(X, y, lam)
                obj = fit.residual_norm**2 + lam**2 * int(fit.active.sum())
            except AllPrunedError:
                obj = float(np.dot(y, y))
            if obj <= 1.10 * self._best_subset_objective(X, y, lam):
                hits += 1
        # lambda = 0 must reduce to plain least squares
        X = rng.normal(size=(30, 5))
        y = rng.normal(size=30)
        delta = np.max(np.abs(sindy.stlsq(X, y, 0.0).beta - sindy.ols(X, y)))
        wall = time.perf_counter() - t0
        ok = hits >= 0.95 * trials and delta <= 1e-10 and wall <= 60
        report(
            7,
            ok,
            f"stlsq within 10% of best-subset optimum in {hits}/{trials} trials (>= 190); "
            f"stlsq(lambda=0) vs ols max diff={delta:.2e} <= 1e-10; wall={wall:.1f}s <= 60s",
        )


class TestCriterion8IntegratorOrders:
    def test_convergence_slopes(self):
        t0 = time.perf_counter()
        spec = dyn.harmonic_oscillator()
        hs = [0.04, 0.02, 0.01, 0.005]

        def final_errors(method):
            errs = []
            for h in hs:
                n = round(6.4 / h)
                traj = dyn.simulate(spec, dyn.PhaseState([0.0], [1.0]), h, n, method)
                qe, pe = dyn.sho_exact(0.0, 1.0, n * h)
                errs.append(float(np.hypot(traj.qs[-1, 0] - qe, traj.ps[-1, 0] - pe)))
            return errs

        slope_rk4 = np.polyfit(np.log(hs), np.log(final_errors(dyn.RK4)), 1)[0]
        slope_verlet = np.polyfit(np.log(hs), np.log(final_errors(dyn.VERLET)), 1)[0]
        wall = time.perf_counter() - t0
        ok = abs(slope_rk4 - 4.0) <= 0.2 and abs(slope_verlet - 2.0) <= 0.2 and wall <= 60
        report(
            8,
            ok,
            f"RK4 slope={slope_rk4:.3f} (4.0 +/- 0.2), Verlet slope={slope_verlet:.3f} "
            f"(2.0 +/- 0.2); wall={wall:.1f}s <= 60s",
        )


class TestCriterion9Determinism:
    def test_byte_identical_pipeline(self, tmp_path, sho_result):
        outs = []
        for sub in ("run1", "run2"):
            out = tmp_path / sub
            code = main(["--seed", "0", "--scale", "desk", "--out", str(out), "experiment", "sho"])
            assert code == 0
            outs.append(out)
        compared = []
        identical = True
        for name in ("model.json", "fit_report.json", "fit_report.txt", "comparison.csv",
                     "loss_history_stage1.csv", "plot_potential.csv"):
            b1 = (outs[0] / name).read_bytes()
            b2 = (outs[1] / name).read_bytes()
            compared.append(name)
            identical = identical and b1 == b2
        report(
            9,
            identical,
            f"two seeded desk sho pipelines byte-identical across {len(compared)} files "
            f"(model + reports + plots)",
        )
