"""
Lévy 模型测试
Cauchy 过程的闭式常数、求积、截断抽样与检验函数
"""

import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import math
import unittest

import numpy as np

from src.finite_chain_core.paths import make_rng
from src.levy_models.model import LevyModel, LevyModelError, QuadratureError, power_tail, stable_constant
from src.levy_models.quadrature import (
    KernelDivergenceError, char_exponent, kernel_integral, small_jump_error, tail_mass,
)
from src.levy_models.sampler import (
    JumpSizeSampler, TruncationPolicy, ensemble_pre_states, sample_jump_ensemble, sample_levy_path,
)
from src.levy_models.test_functions import (
    holder_radial, lipschitz_bump, make_test_function, smooth_gauss,
)


def cauchy() -> LevyModel:
    return LevyModel(1, alpha=1.0, name="cauchy")


class TestLevyModel(unittest.TestCase):
    """模型构造与闭式常数"""

    def test_cauchy_constants(self):
        """A(1,−1) = 1/π，λ(1) = 2/π，σ²(0.1) = 0.2/π"""
        model = cauchy()
        self.assertAlmostEqual(model.A_const, 1.0 / math.pi, places=14)
        self.assertAlmostEqual(stable_constant(1, 1.0), 1.0 / math.pi, places=14)
        self.assertAlmostEqual(tail_mass(model, 1.0), 2.0 / math.pi, places=12)
        self.assertAlmostEqual(small_jump_error(model, 0.1) / (0.2 / math.pi), 1.0, places=7)

    def test_small_jump_closed_form(self):
        """σ²(ε) = |S^{N−1}|·A·ε^{2−α}/(2−α)"""
        for dim, alpha in [(1, 0.5), (1, 1.5), (2, 1.0), (3, 1.2)]:
            model = LevyModel(dim, alpha=alpha)
            for eps in (0.1, 0.01):
                with self.subTest(dim=dim, alpha=alpha, eps=eps):
                    closed = model.sphere * model.A_const * eps ** (2 - alpha) / (2 - alpha)
                    self.assertAlmostEqual(small_jump_error(model, eps) / closed, 1.0, places=6)

    def test_invalid_models(self):
        cases = [
            dict(dim=0, alpha=1.0),
            dict(dim=1, alpha=2.0),
            dict(dim=1, alpha=0.0),
            dict(dim=1),
            dict(dim=1, alpha=1.0, radial_density=lambda r: r ** -2.0),
        ]
        for kwargs in cases:
            with self.subTest(**{k: v for k, v in kwargs.items() if k != "radial_density"}):
                with self.assertRaises(LevyModelError):
                    LevyModel(**kwargs)

    def test_radial_table_reproduces_cauchy(self):
        """对数-对数插值的纯幂律密度与闭式一致"""
        r = np.geomspace(1e-3, 1e3, 61)
        model = LevyModel.from_dict({"kind": "radial", "dim": 1, "r": r.tolist(),
                                     "f": (r ** -2.0 / math.pi).tolist()}, name="tabulated")
        self.assertFalse(model.is_stable)
        self.assertAlmostEqual(tail_mass(model, 1.0) / (2.0 / math.pi), 1.0, places=6)
        self.assertFalse(model.tail_condition)

    def test_radial_small_jump_error(self):
        """表格化 Cauchy 密度的 σ²(ε) 走求积分支，含表外的幂律外推"""
        r = np.geomspace(1e-3, 1e3, 61)
        model = LevyModel.from_dict({"kind": "radial", "dim": 1, "r": r.tolist(),
                                     "f": (r ** -2.0 / math.pi).tolist()}, name="tabulated")
        for eps in (0.1, 0.05, 1e-4):
            with self.subTest(eps=eps):
                self.assertAlmostEqual(small_jump_error(model, eps) / (2.0 * eps / math.pi), 1.0, places=6)

    def test_power_tail(self):
        self.assertAlmostEqual(power_tail(lambda s: math.exp(2.0 * s), 0.0, -1.0), 0.5, places=12)
        self.assertAlmostEqual(power_tail(lambda s: math.exp(-s), 1.0, 1.0), math.exp(-1.0), places=12)
        self.assertEqual(power_tail(lambda s: 0.0, 0.0, 1.0), 0.0)
        with self.assertRaises(QuadratureError):
            power_tail(lambda s: 1.0, 0.0, -1.0)

    def test_non_integrable_density_rejected(self):
        """∫(|h|²∧1)ν(dh) 发散的密度被拒绝"""
        with self.assertRaises(LevyModelError):
            LevyModel(1, radial_density=lambda r: np.asarray(r, dtype=float) ** -3.0)

    def test_density_domain(self):
        with self.assertRaises(LevyModelError):
            cauchy().density(0.0)


class TestQuadrature(unittest.TestCase):
    """特征指数与核积分"""

    def test_char_exponent_matches_closed_form(self):
        """ψ(ξ) = |ξ|^α"""
        for dim, alpha, rtol in [(1, 1.0, 1e-6), (1, 1.5, 1e-6), (2, 1.0, 1e-5)]:
            model = LevyModel(dim, alpha=alpha)
            for s in (0.5, 1.0, 2.0):
                xi = np.zeros(dim)
                xi[0] = s
                with self.subTest(dim=dim, alpha=alpha, xi=s):
                    value = char_exponent(model, xi, method="quadrature")
                    self.assertLess(abs(value - s ** alpha), rtol * s ** alpha)

    def test_truncated_exponent_is_smaller(self):
        """截断后的指数 ψ_ε < ψ，且随 ε → 0 趋近 ψ"""
        model = cauchy()
        full = char_exponent(model, 1.0)
        coarse = char_exponent(model, 1.0, epsilon=0.1)
        fine = char_exponent(model, 1.0, epsilon=0.01)
        self.assertLess(coarse, fine)
        self.assertLess(fine, full)
        self.assertLess(full - fine, 0.01)

    def test_closed_form_requires_stable(self):
        with self.assertRaises(LevyModelError):
            char_exponent(cauchy(), 1.0, method="closed", epsilon=0.1)

    def test_kernel_integral_indicator(self):
        """N 1{|h|>1} = λ(1) = 2/π，与起点无关"""
        model = cauchy()
        psi = lambda x, y: (np.abs(y - x)[:, 0] > 1.0).astype(float)
        for x in (0.0, 3.0):
            with self.subTest(x=x):
                value = kernel_integral(model, psi, [x], epsilon=0.0, points=[1.0])
                self.assertAlmostEqual(value, 2.0 / math.pi, places=8)

    def test_kernel_divergence_detected(self):
        """常数检验函数在 0 附近不可积"""
        psi = lambda x, y: np.ones(x.shape[0])
        with self.assertRaises(KernelDivergenceError):
            kernel_integral(cauchy(), psi, [0.0])


class TestSampler(unittest.TestCase):
    """截断抽样"""

    def test_radii_law(self):
        """|h| > ε，且 P(|h| > 2ε) = 2^{−α}"""
        model = LevyModel(1, alpha=1.5)
        sampler = JumpSizeSampler(model, 0.1)
        self.assertAlmostEqual(sampler.rate, tail_mass(model, 0.1), places=12)
        radii = sampler.radii(make_rng(3), 40000)
        self.assertTrue(np.all(radii >= 0.1))
        p = 2.0 ** -1.5
        stderr = math.sqrt(p * (1 - p) / radii.size)
        self.assertLess(abs(np.mean(radii > 0.2) - p), 4 * stderr)

    def test_radial_sampler_matches_stable(self):
        """表格化密度的抽样器与 α-稳定抽样器同分布（比较尾部概率）"""
        r = np.geomspace(1e-3, 1e3, 61)
        model = LevyModel.from_dict({"kind": "radial", "dim": 1, "r": r.tolist(),
                                     "f": (r ** -2.0 / math.pi).tolist()})
        radii = JumpSizeSampler(model, 0.1, knots=512).radii(make_rng(5), 40000)
        stderr = math.sqrt(0.25 / radii.size)
        self.assertLess(abs(np.mean(radii > 0.2) - 0.5), 4 * stderr)

    def test_path_is_reproducible(self):
        model = cauchy()
        policy = TruncationPolicy(0.05)
        a = sample_levy_path(model, [0.0], 1.0, policy, 9)
        b = sample_levy_path(model, [0.0], 1.0, policy, 9)
        np.testing.assert_array_equal(a.event_times, b.event_times)
        np.testing.assert_array_equal(a.jumps, b.jumps)
        np.testing.assert_allclose(a.event_states[-1], np.sum(a.jumps, axis=0))
        self.assertFalse(a.killed)

    def test_compensated_path_has_diffusion(self):
        path = sample_levy_path(cauchy(), [0.0], 1.0, TruncationPolicy(0.05, compensate=True), 4)
        self.assertIsNotNone(path.diffusion_values)
        self.assertEqual(path.diffusion_values.shape[1], 1)

    def test_policy_validation(self):
        with self.assertRaises(LevyModelError):
            TruncationPolicy(0.0)
        self.assertEqual(TruncationPolicy(0.1).halved().epsilon, 0.05)
        with self.assertRaises(LevyModelError):
            sample_levy_path(cauchy(), [0.0, 0.0], 1.0, TruncationPolicy(0.1), 1)

    def test_ensemble_counts(self):
        """每条路径的跳数均值为 λ(ε)T"""
        model = cauchy()
        owner, h = sample_jump_ensemble(model, 2.0, 0.5, 20000, make_rng(8))
        counts = np.bincount(owner, minlength=20000)
        rate = 2.0 * tail_mass(model, 0.5)
        self.assertLess(abs(counts.mean() - rate), 4 * math.sqrt(rate / 20000))
        self.assertTrue(np.all(np.abs(h) > 0.5))

    def test_ensemble_pre_states(self):
        owner = np.array([0, 0, 1, 1, 1])
        h = np.array([[1.0], [2.0], [5.0], [-1.0], [0.5]])
        pre = ensemble_pre_states([0.0], owner, h)
        np.testing.assert_allclose(pre[:, 0], [0.0, 1.0, 0.0, 5.0, 4.0])


class TestTestFunctions(unittest.TestCase):
    """径向检验函数"""

    def test_gradient_matches_finite_difference(self):
        x = np.array([[0.3, -0.4], [1.2, 0.5]])
        for func in (smooth_gauss(), holder_radial("sin", 0.8)):
            with self.subTest(func=func.name):
                grad = func.gradient(x)
                step = 1e-6
                for d in range(2):
                    e = np.zeros(2)
                    e[d] = step
                    fd = (func(x + e) - func(x - e)) / (2 * step)
                    np.testing.assert_allclose(grad[:, d], fd, rtol=1e-6, atol=1e-8)

    def test_hessian_at_origin(self):
        np.testing.assert_allclose(smooth_gauss().hessian(np.zeros((1, 2)))[0], -2.0 * np.eye(2))
        self.assertTrue(np.isnan(holder_radial().hessian(np.zeros((1, 1)))[0, 0, 0]))

    def test_lipschitz_bump(self):
        np.testing.assert_allclose(lipschitz_bump()(np.array([[0.0], [0.5], [2.0]])), [1.0, 0.5, 0.0])

    def test_holder_beta_must_be_below_alpha(self):
        with self.assertRaises(LevyModelError):
            holder_radial("id", 1.2, alpha=1.0)
        with self.assertRaises(LevyModelError):
            make_test_function({"test_function": "holder_radial", "F": "cosh"})
        with self.assertRaises(LevyModelError):
            make_test_function({"test_function": "unknown"})


if __name__ == "__main__":
    unittest.main()
