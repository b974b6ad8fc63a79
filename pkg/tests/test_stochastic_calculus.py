"""
随机积分测试
Itô/Stratonovich 积分、括号、Riemann 和、Σ* 截断和与跳表示
"""

import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import math
import unittest

import numpy as np

from src.finite_chain_core.form import build_form
from src.finite_chain_core.jumps import JumpFunction, kernel_apply
from src.finite_chain_core.model import FunctionDomainError, random_symmetric_chain, reference_chain
from src.finite_chain_core.nakao import dirichlet_trace
from src.finite_chain_core.paths import PathSample, make_rng, simulate_chain_paths
from src.finite_chain_core.traces import TraceMismatchError, density_trace, increment_trace, maf_trace
from src.levy_models.model import LevyModel
from src.levy_models.sampler import TruncationPolicy, sample_levy_path
from src.stochastic_calculus.brackets import CompensatorEvaluator, angle_bracket, square_bracket
from src.stochastic_calculus.integrals import (
    dirichlet_integral, ito_integral, midpoint_riemann_sum, riemann_approx, stieltjes_integral,
    stratonovich_integral,
)
from src.stochastic_calculus.phi_functions import (
    PHI_REGISTRY, derivative_check, get_phi, jump_correction_trace,
)
from src.stochastic_calculus.starred import (
    ConvergenceReport, TruncationSchedule, jump_representation, starred_sum,
)

U3 = np.array([0.0, 1.0, 2.0])
F3 = np.array([1.0, 0.0, 1.0])


def killed_path() -> PathSample:
    return PathSample(x0=1, event_times=np.array([0.2, 0.5]), event_states=np.array([0, 1]),
                      horizon=1.0, zeta=0.8, killed=True, grid=np.array([0.0, 1.0]), n_states=3)


def sample_paths(model, count: int = 30, T: float = 2.0, seed: int = 7):
    return simulate_chain_paths(model, np.arange(count) % model.n, T, make_rng(seed))


class TestPhiFunctions(unittest.TestCase):
    """Φ 注册表"""

    def test_derivatives(self):
        """解析梯度与 Hessian 与中心差分一致"""
        rng = make_rng(1)
        for name, phi in PHI_REGISTRY.items():
            K = phi.arity or 2
            with self.subTest(phi=name):
                self.assertLess(derivative_check(phi, rng.normal(size=(8, K))), 1e-6)

    def test_unknown_phi(self):
        with self.assertRaises(KeyError):
            get_phi("sinh")
        with self.assertRaises(ValueError):
            get_phi("product").value(np.ones((2, 3)))

    def test_left_correction_of_x2_is_jump_square(self):
        """Φ(x)=x² 的 Itô 修正为 Σ(Δu)²，中点修正恒为 0"""
        path = killed_path()
        phi = get_phi("x2")
        left = jump_correction_trace(phi, [U3], path, weight="left")
        self.assertAlmostEqual(left.final, 1.0 + 1.0 + 1.0, places=14)
        mid = jump_correction_trace(phi, [U3], path, weight="midpoint")
        self.assertLess(mid.sup_norm(), 1e-14)


class TestIntegrals(unittest.TestCase):
    """路径级积分"""

    def setUp(self):
        self.model = reference_chain()
        self.phi = JumpFunction.from_function(U3)

    def test_ito_integral_of_one_is_identity(self):
        for path in sample_paths(self.model) + [killed_path()]:
            M = maf_trace(self.model, self.phi, path)
            with self.subTest(x0=path.x0, killed=path.killed):
                self.assertLess(ito_integral(np.ones(3), M, path).sup_distance(M), 1e-14)

    def test_ito_integral_requirements(self):
        path = killed_path()
        M = maf_trace(self.model, self.phi, path)
        with self.assertRaises(FunctionDomainError):
            ito_integral(np.array([1.0, 0.0, 1.0, 1.0]), M, path)
        with self.assertRaises(TraceMismatchError):
            ito_integral(F3, increment_trace(U3, path), path)

    def test_ito_integral_is_martingale_transform(self):
        """∫f dM^u 的跳为 f(X_{s−})Δu，连续部分为 −∫f·Lu ds"""
        path = killed_path()
        M = maf_trace(self.model, self.phi, path)
        I = ito_integral(F3, M, path)
        # 跳：1→0 权 f(1)=0；0→1 权 f(0)=1，Δu=1；1→∂ 权 0
        jumps = 1.0
        # 连续：−∫ f·Lu，f·Lu = (1, 0, −0.5)，区间 [0.2,0.5) 在状态 0
        drift = -0.3
        self.assertAlmostEqual(I.final, jumps + drift, places=13)

    def test_stratonovich_routes_agree(self):
        """括号路线与中点权路线一致（不一致时函数本身会抛错）"""
        rng = make_rng(2)
        model = random_symmetric_chain(5, rng)
        phi = JumpFunction.random(5, rng)
        f = rng.normal(size=5)
        for path in sample_paths(model, 20):
            M = maf_trace(model, phi, path)
            S = stratonovich_integral(f, M, path)
            with self.subTest(x0=path.x0):
                Mf = increment_trace(f, path)
                expected = ito_integral(f, M, path) + 0.5 * square_bracket(Mf, M, path)
                self.assertLess(S.sup_distance(expected), 1e-12)

    def test_dirichlet_integral_of_constant(self):
        """∫1 dA = A；f(∂)=c 的平移处理下 f ≡ 1（含 ∂）同样给出 A"""
        for path in sample_paths(self.model, 15) + [killed_path()]:
            A = dirichlet_trace(self.model, self.phi, path, "A")
            for f in (np.ones(3), np.ones(4)):
                with self.subTest(x0=path.x0, f_len=f.size):
                    self.assertLess(dirichlet_integral(self.model, f, self.phi, path).sup_distance(A), 1e-12)

    def test_stieltjes_against_density(self):
        """∫f d(∫g ds) = ∫fg ds"""
        path = killed_path()
        g = np.array([0.5, -1.0, 2.0])
        A = density_trace(path, g)
        self.assertLess(stieltjes_integral(F3, A, path).sup_distance(density_trace(path, F3 * g)), 1e-14)

    def test_riemann_approximation_converges(self):
        """细网格的 Riemann 和逼近 Itô 积分（同一网格单元内两次跳的路径除外）"""
        model = reference_chain()
        coarse, fine = [], []
        for path in sample_paths(model, 40, T=1.0):
            M = maf_trace(model, self.phi, path)
            ito = ito_integral(F3, M, path)
            coarse.append(riemann_approx(F3, M, path, 4).sup_distance(ito))
            fine.append(riemann_approx(F3, M, path, 4096).sup_distance(ito))
        coarse, fine = np.array(coarse), np.array(fine)
        self.assertLess(np.median(fine), 1e-2)
        self.assertGreaterEqual(np.mean(fine <= coarse), 0.9)
        with self.assertRaises(ValueError):
            riemann_approx(F3, M, path, 0)

    def test_midpoint_sum_of_constant_integrand(self):
        path = killed_path()
        A = density_trace(path, np.array([1.0, 1.0, 1.0]))
        self.assertAlmostEqual(A.final, 0.8, places=14)
        self.assertAlmostEqual(midpoint_riemann_sum(np.ones(4), A, path, 10), 0.8, places=12)


class TestBrackets(unittest.TestCase):
    """括号过程"""

    def test_square_bracket_is_sum_of_squared_jumps(self):
        model = reference_chain()
        path = killed_path()
        M = maf_trace(model, JumpFunction.from_function(U3), path)
        self.assertAlmostEqual(square_bracket(M, M, path).final, 3.0, places=14)

    def test_angle_bracket_chain(self):
        """链上 ⟨M_φ⟩ = ∫N(φ²) ds"""
        model = reference_chain()
        phi = JumpFunction.from_function(U3)
        path = killed_path()
        ev = CompensatorEvaluator(model)
        expected = density_trace(path, kernel_apply(model, phi.product(phi)))
        self.assertLess(angle_bracket(ev, phi, phi, path).sup_distance(expected), 1e-14)

    def test_levy_density_indicator(self):
        """Lévy 上 N1{|h|>1} 与位置无关，径向表格与逐点求积一致"""
        model = LevyModel(1, alpha=1.0)
        ev = CompensatorEvaluator(model)
        psi = lambda x, y: (np.abs(y - x)[:, 0] > 1.0).astype(float)
        states = np.array([[0.0], [0.7], [2.0]])
        direct = ev.density(psi, states=states, points=[1.0])
        np.testing.assert_allclose(direct, 2.0 / math.pi, rtol=1e-8)
        table = ev.density(psi, states=states, radial=True, points=[1.0])
        np.testing.assert_allclose(table, 2.0 / math.pi, rtol=1e-6)

    def test_backend_mismatch(self):
        ev = CompensatorEvaluator(reference_chain())
        path = sample_levy_path(LevyModel(1, alpha=1.0), [0.0], 1.0, TruncationPolicy(0.5), 3)
        with self.assertRaises(TraceMismatchError):
            angle_bracket(ev, JumpFunction.from_function(U3), None, path)


class TestStarred(unittest.TestCase):
    """Σ* 与跳表示"""

    def test_schedule_for_chain(self):
        """k_min 使 2^k 超过 1/min|φ|"""
        phi = JumpFunction(np.array([[0.0, 0.25], [-1.0, 0.0]]))
        schedule = TruncationSchedule.for_chain(phi)
        self.assertEqual(schedule.k_min, 3)
        self.assertEqual(schedule.k_max, 13)
        self.assertEqual(schedule.levels[0], 8.0)

    def test_schedule_validation(self):
        for kwargs in (dict(k_min=3, k_max=2), dict(tolerance=0.0), dict(window=0)):
            with self.subTest(**kwargs):
                with self.assertRaises(ValueError):
                    TruncationSchedule(**kwargs)

    def test_chain_converges_at_first_level(self):
        model = reference_chain()
        path = sample_paths(model, 1)[0]
        _, report = jump_representation(path, JumpFunction.from_function(U3))
        self.assertTrue(report.converged)
        self.assertEqual(report.first_stable_level, report.levels[0])
        self.assertEqual(len(report.rows()), 1)
        self.assertTrue(report.rows()[0]["stable"])

    def test_jump_representation_matches_definition(self):
        """Ā 的跳表示与 A + ½K 逐路径一致，含被杀死的路径"""
        rng = make_rng(19)
        for model in (reference_chain(), random_symmetric_chain(6, rng)):
            form = build_form(model)
            phi = JumpFunction.random(model.n, rng)
            paths = sample_paths(model, 20) + ([killed_path()] if model.n == 3 else [])
            for path in paths:
                trace, report = jump_representation(path, phi)
                with self.subTest(model=model.name, x0=path.x0, killed=path.killed):
                    self.assertTrue(report.converged)
                    self.assertLess(trace.sup_distance(dirichlet_trace(model, phi, path, "Abar", form=form)),
                                    1e-10)

    def test_weighted_representation(self):
        """∫f dĀ：Itô 对左权，Stratonovich 对中点杀死权"""
        model = reference_chain()
        form = build_form(model)
        phi = JumpFunction.random(3, make_rng(29))
        for path in sample_paths(model, 20) + [killed_path()]:
            for mode, killing in (("ito", "left"), ("stratonovich", "midpoint")):
                trace, _ = jump_representation(path, phi, mode, f=F3, killing_weight=killing)
                definition = dirichlet_integral(model, F3, phi, path, mode, variant="Abar", form=form)
                with self.subTest(x0=path.x0, mode=mode, killed=path.killed):
                    self.assertLess(trace.sup_distance(definition), 1e-10)

    def test_unconverged_is_reported(self):
        path = killed_path()
        schedule = TruncationSchedule(k_min=0, k_max=1)
        _, report = starred_sum("none", None, JumpFunction.from_function(U3), path, schedule)
        self.assertFalse(report.converged)
        self.assertIsNone(report.first_stable_level)
        self.assertEqual(len(report.rows()), 2)
        self.assertIsInstance(report, ConvergenceReport)

    def test_invalid_weights(self):
        path = killed_path()
        phi = JumpFunction.from_function(U3)
        with self.assertRaises(ValueError):
            starred_sum("right", None, phi, path, TruncationSchedule())
        with self.assertRaises(ValueError):
            jump_representation(path, phi, killing_weight="right")

    def test_levy_starred_sum_of_increments(self):
        """Lévy 路径上 Σ*(u(X_s) − u(X_{s−})) 等于 u(X_t) − u(X_0)"""
        model = LevyModel(1, alpha=1.0)
        path = sample_levy_path(model, [0.0], 1.0, TruncationPolicy(0.01), 5)
        u = lambda x: np.exp(-np.asarray(x, dtype=float)[..., 0] ** 2)
        trace, report = starred_sum("none", None, lambda x, y: u(y) - u(x), path,
                                    TruncationSchedule(k_max=40))
        self.assertTrue(report.converged)
        increment = path.function_values(u, path.state_at(path.horizon))[0] - u(np.zeros((1, 1)))[0]
        self.assertLess(abs(trace.final - increment), 1e-6)


if __name__ == "__main__":
    unittest.main()
