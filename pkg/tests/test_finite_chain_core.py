"""
有限链核心测试
参考链 R3 的闭式数值、Dirichlet 形式恒等式、半群预言机与 Nakao 三条路线
"""

import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import math
import unittest

import numpy as np

from src.finite_chain_core.form import (
    bracket_measure, build_form, energy, generator_apply, truncation_energy_gap,
)
from src.finite_chain_core.jumps import JumpFunction, kernel_apply
from src.finite_chain_core.model import (
    CEMETERY, ChainModel, ChainModelError, FunctionDomainError, broken_chain,
    random_symmetric_chain, reference_chain,
)
from src.finite_chain_core.nakao import (
    NAKAO_ROUTES, dirichlet_trace, gamma_of_integral_explicit, gamma_solve, nakao_density,
    nakao_integral_density, nakao_integral_trace,
)
from src.finite_chain_core.paths import (
    PathError, PathSample, make_rng, simulate_chain_path, simulate_chain_paths, stream_seed,
)
from src.finite_chain_core.semigroup import (
    expected_compensator, expected_jump_sum, integrated_semigroup_apply, semigroup_apply,
    transition_matrix,
)
from src.finite_chain_core.traces import (
    AFTrace, TraceMismatchError, increment_trace, jump_sum_trace, maf_trace,
)
from src.stochastic_calculus.brackets import CompensatorEvaluator, angle_bracket, square_bracket

U3 = np.array([0.0, 1.0, 2.0])


def killed_path() -> PathSample:
    """R3 上手工构造的被杀死路径：1 →(0.2) 0 →(0.5) 1 →(0.8) ∂"""
    return PathSample(x0=1, event_times=np.array([0.2, 0.5]), event_states=np.array([0, 1]),
                      horizon=1.0, zeta=0.8, killed=True, grid=np.array([0.0, 1.0]), n_states=3)


def random_chains(count: int = 5, seed: int = 3):
    rng = make_rng(seed)
    return [random_symmetric_chain(int(n), rng) for n in rng.integers(3, 9, size=count)]


class TestChainModel(unittest.TestCase):
    """链模型构造与校验"""

    def test_reference_chain_is_symmetric(self):
        """R3 满足细致平衡"""
        model = reference_chain()
        self.assertEqual(model.n, 3)
        self.assertTrue(model.is_symmetric)
        np.testing.assert_allclose(model.total_rates, [1.0, 2.5, 0.5])

    def test_from_dict_uses_state_labels(self):
        """q 三元组可以用状态名引用"""
        doc = {"states": ["a", "b", "c"], "m": [1, 1, 2],
               "q": [["a", "b", 1.0], ["b", "a", 1.0], ["b", "c", 1.0], ["c", "b", 0.5]],
               "k": [0, 0.5, 0]}
        model = ChainModel.from_dict(doc, name="labelled")
        np.testing.assert_array_equal(model.q, reference_chain().q)
        self.assertEqual(model.to_dict()["states"], ["a", "b", "c"])

    def test_balance_violation_names_pair(self):
        """细致平衡违规在严格模式下报错，消息指出状态对"""
        q = np.array(reference_chain().q)
        q[0, 1] = 1.001
        with self.assertRaises(ChainModelError) as ctx:
            ChainModel([1.0, 1.0, 2.0], q, [0.0, 0.5, 0.0])
        self.assertIn("(0,1)", str(ctx.exception).replace(" ", ""))

        broken = broken_chain(reference_chain())
        self.assertFalse(broken.strict)
        self.assertEqual(broken.balance_violations(), [("0", "1")])

    def test_invalid_inputs(self):
        """m 非正、负速率、对角线非零、形状不符均被拒绝"""
        cases = [
            ([1.0, 0.0], [[0, 1], [1, 0]], None),
            ([1.0, 1.0], [[0, -1], [-1, 0]], None),
            ([1.0, 1.0], [[1, 1], [1, 0]], None),
            ([1.0, 1.0], [[0, 1], [1, 0]], [0.0]),
        ]
        for m, q, k in cases:
            with self.subTest(m=m, q=q, k=k):
                with self.assertRaises(ChainModelError):
                    ChainModel(m, q, k)

    def test_extend_requires_zero_at_cemetery(self):
        """扩展到 E_∂ 时 f(∂) 必须为 0"""
        model = reference_chain()
        np.testing.assert_array_equal(model.extend(U3), [0, 1, 2, 0])
        with self.assertRaises(FunctionDomainError):
            model.extend([0, 1, 2, 1])
        with self.assertRaises(FunctionDomainError):
            model.extend([0, 1])

    def test_random_chains_are_symmetric(self):
        """随机链按构造满足细致平衡"""
        for model in random_chains():
            with self.subTest(model=model.name):
                self.assertTrue(model.is_symmetric)


class TestForm(unittest.TestCase):
    """Dirichlet 形式与能量"""

    def setUp(self):
        self.model = reference_chain()
        self.form = build_form(self.model)
        self.phi_u = JumpFunction.from_function(U3)

    def test_reference_values(self):
        """R3 上 E(u,u)=2.5，Lu=(1,−½,−½)，μ_⟨u⟩=(1,2.5,1)，e(M^u)=2.25"""
        self.assertAlmostEqual(self.form.bilinear(U3, U3), 2.5, places=12)
        np.testing.assert_allclose(generator_apply(self.form, U3), [1.0, -0.5, -0.5], atol=1e-14)
        np.testing.assert_allclose(bracket_measure(self.model, self.phi_u), [1.0, 2.5, 1.0], atol=1e-14)
        self.assertAlmostEqual(energy(self.model, self.phi_u), 2.25, places=12)

    def test_energy_identity(self):
        """e(M^u) = E(u,u) − ½∫u²dκ"""
        for model in [self.model] + random_chains():
            u = make_rng(17).normal(size=model.n)
            form = build_form(model)
            with self.subTest(model=model.name):
                expected = form.bilinear(u, u) - 0.5 * float(form.kappa @ u ** 2)
                self.assertAlmostEqual(energy(model, JumpFunction.from_function(u)), expected, places=12)

    def test_form_is_minus_m_times_generator(self):
        """对称性：E = −diag(m)L"""
        for model in random_chains():
            form = build_form(model)
            with self.subTest(model=model.name):
                np.testing.assert_allclose(form.E, -model.m[:, None] * form.L, atol=1e-12)
                np.testing.assert_allclose(form.E, form.E.T, atol=1e-12)

    def test_kernel_of_phi_u_is_generator(self):
        """N(φ_u) = Lu"""
        np.testing.assert_allclose(kernel_apply(self.model, self.phi_u), self.form.L @ U3, atol=1e-14)

    def test_truncation_energy_gap(self):
        """截断水平足够粗时全部能量来自小跳，足够细时差为 0"""
        self.assertAlmostEqual(truncation_energy_gap(self.model, self.phi_u, 0.5), 2.25, places=12)
        self.assertEqual(truncation_energy_gap(self.model, self.phi_u, 1e6), 0.0)


class TestJumpFunction(unittest.TestCase):
    """跳函数变换"""

    def test_phi_u_structure(self):
        """φ_u(x,y)=u(y)−u(x)，φ_u(x,∂)=−u(x)，ψ_K = 0"""
        phi = JumpFunction.from_function(U3)
        self.assertEqual(phi.body[0, 2], 2.0)
        np.testing.assert_array_equal(phi.boundary, -U3)
        self.assertEqual(phi.reversal_kernel().max_abs(), 0.0)
        np.testing.assert_array_equal(phi.evaluate([1, 2], [0, CEMETERY]), [-1.0, -2.0])

    def test_antisymmetrized_keeps_boundary(self):
        phi = JumpFunction.random(4, make_rng(5))
        bar = phi.antisymmetrized()
        np.testing.assert_allclose(bar.body, -bar.body.T)
        np.testing.assert_array_equal(bar.boundary, phi.boundary)

    def test_diagonal_rejected(self):
        with self.assertRaises(ChainModelError):
            JumpFunction(np.eye(3))


class TestSemigroup(unittest.TestCase):
    """半群与精确期望"""

    def test_transition_matrix_is_substochastic(self):
        model = reference_chain()
        P = transition_matrix(model, 0.7)
        self.assertTrue(np.all(P >= -1e-15))
        self.assertTrue(np.all(P.sum(axis=1) <= 1.0 + 1e-12))
        np.testing.assert_array_equal(semigroup_apply(model, 0.0, U3), U3)

    def test_integrated_semigroup_routes_agree(self):
        """分块矩阵指数与 Gauss–Legendre 求积一致"""
        for model in random_chains(3):
            F = make_rng(9).normal(size=model.n)
            with self.subTest(model=model.name):
                np.testing.assert_allclose(integrated_semigroup_apply(model, 1.3, F),
                                           integrated_semigroup_apply(model, 1.3, F, nodes=24),
                                           atol=1e-10)

    def test_martingale_oracle(self):
        """E[Σφ] = E[∫N(φ)ds]，对随机 φ（含边界）成立"""
        rng = make_rng(23)
        for model in [reference_chain()] + random_chains(3):
            phi = JumpFunction.random(model.n, rng)
            with self.subTest(model=model.name):
                np.testing.assert_allclose(expected_jump_sum(model, phi, 2.0),
                                           expected_compensator(model, phi, 2.0), atol=1e-10)


class TestPaths(unittest.TestCase):
    """路径模拟与变换"""

    def test_same_seed_same_path(self):
        model = reference_chain()
        a = simulate_chain_path(model, 0, 5.0, make_rng(stream_seed(1, "x")))
        b = simulate_chain_path(model, 0, 5.0, make_rng(stream_seed(1, "x")))
        np.testing.assert_array_equal(a.event_times, b.event_times)
        c = simulate_chain_path(model, 0, 5.0, make_rng(stream_seed(1, "y")))
        self.assertFalse(a.n_events == c.n_events and np.array_equal(a.event_times, c.event_times))

    def test_killed_path_jump_pairs(self):
        """杀死跳的 post 为墓地"""
        pre, post = killed_path().jump_pairs()
        np.testing.assert_array_equal(pre, [1, 0, 1])
        np.testing.assert_array_equal(post, [0, 1, CEMETERY])

    def test_conservative_chain_never_killed(self):
        model = ChainModel([1.0, 1.0, 2.0], reference_chain().q)
        paths = simulate_chain_paths(model, [0, 1, 2] * 50, 3.0, 11)
        self.assertFalse(any(p.killed for p in paths))

    def test_reversal(self):
        """反转两次回到原路径"""
        path = PathSample(x0=0, event_times=np.array([0.3, 0.7]), event_states=np.array([1, 2]),
                          horizon=1.0, grid=np.array([0.0, 1.0]), n_states=3)
        rev = path.reversed()
        self.assertEqual(rev.x0, 2)
        np.testing.assert_allclose(rev.event_times, [0.3, 0.7])
        np.testing.assert_array_equal(rev.event_states, [1, 0])
        back = rev.reversed()
        np.testing.assert_allclose(back.event_times, path.event_times)
        np.testing.assert_array_equal(back.event_states, path.event_states)
        with self.assertRaises(PathError):
            killed_path().reversed()

    def test_holding_time_and_killing_at_state_1(self):
        """R3 在状态 1 的停留时间为 Exp(2.5)：均值 0.4，首跳为杀死的概率 0.2"""
        model = reference_chain()
        n = 4000
        paths = simulate_chain_paths(model, [1] * n, 20.0, make_rng(stream_seed(7, "holding")))
        holding = np.array([p.jump_times()[0] for p in paths])
        killed_first = np.array([p.killed and p.n_events == 0 for p in paths], dtype=float)

        stderr = holding.std(ddof=1) / math.sqrt(n)
        self.assertLess(abs(holding.mean() - 0.4), 4 * stderr)
        self.assertLess(abs(killed_first.mean() - 0.2), 4 * math.sqrt(0.2 * 0.8 / n))

    def test_invalid_path(self):
        with self.assertRaises(PathError):
            PathSample(x0=0, event_times=np.array([0.5, 0.4]), event_states=np.array([1, 0]),
                       horizon=1.0, n_states=3)


class TestTraces(unittest.TestCase):
    """加法泛函轨迹"""

    def test_fukushima_on_killed_path(self):
        """u(X_t)−u(X_0) = M^u + ∫Lu ds，在手工路径上数值精确"""
        model = reference_chain()
        path = killed_path()
        phi = JumpFunction.from_function(U3)
        inc = increment_trace(U3, path)
        self.assertAlmostEqual(inc.final, -1.0, places=14)
        self.assertAlmostEqual(jump_sum_trace(phi, path).final, -1.0, places=14)
        M = maf_trace(model, phi, path)
        self.assertAlmostEqual(M.final, -1.05, places=12)
        self.assertEqual(M.kind, "martingale")

    def test_dirichlet_process_of_phi_u_is_increment(self):
        """φ_u 的 Dirichlet 过程 A = M^u + Γ(M^u) 就是 u(X_t)−u(X_0)"""
        model = reference_chain()
        path = killed_path()
        A = dirichlet_trace(model, JumpFunction.from_function(U3), path, "A")
        self.assertLess(A.sup_distance(increment_trace(U3, path)), 1e-12)

    def test_splice_additivity(self):
        """拼接路径上的加法泛函等于两段之和（第二段可被杀死）"""
        model = reference_chain()
        rng = make_rng(stream_seed(5, "splice"))
        phi = JumpFunction.random(model.n, rng)
        traces = {
            "maf": lambda p: maf_trace(model, phi, p),
            "increment": lambda p: increment_trace(U3, p),
            "jump_sum": lambda p: jump_sum_trace(phi, p),
        }
        checked = 0
        while checked < 20:
            first = simulate_chain_path(model, int(rng.integers(3)), 1.0, rng)
            if first.killed:
                continue
            second = simulate_chain_path(model, int(first.state_at(1.0)[0]), 1.5, rng)
            whole = first.splice(second)
            self.assertAlmostEqual(whole.horizon, 2.5)
            self.assertEqual(whole.killed, second.killed)
            for name, trace in traces.items():
                with self.subTest(path=checked, trace=name):
                    self.assertAlmostEqual(trace(whole).final, trace(first).final + trace(second).final,
                                           places=12)
            checked += 1

    def test_splice_requires_matching_state(self):
        path = PathSample(x0=0, event_times=np.array([0.3]), event_states=np.array([1]),
                          horizon=1.0, n_states=3)
        other = PathSample(x0=2, event_times=np.array([]), event_states=np.array([], dtype=int),
                           horizon=1.0, n_states=3)
        with self.assertRaises(PathError):
            path.splice(other)
        with self.assertRaises(PathError):
            killed_path().splice(other)

    def test_maf_mean_matches_oracle(self):
        """Monte Carlo 的 E[Σφ] 与 E[M_T] 落在精确预言机的 4 倍标准误内"""
        model = reference_chain()
        rng = make_rng(stream_seed(11, "oracle"))
        phi = JumpFunction.random(model.n, rng)
        T, x0, n = 2.0, 0, 4000
        paths = simulate_chain_paths(model, [x0] * n, T, rng)
        sums = np.array([jump_sum_trace(phi, p).final for p in paths])
        martingale = np.array([maf_trace(model, phi, p).final for p in paths])

        expected_sum = expected_jump_sum(model, phi, T)[x0]
        expected_mart = expected_sum - expected_compensator(model, phi, T)[x0]
        self.assertAlmostEqual(expected_mart, 0.0, places=10)
        for name, samples, target in (("jump_sum", sums, expected_sum), ("maf", martingale, expected_mart)):
            with self.subTest(trace=name):
                stderr = samples.std(ddof=1) / math.sqrt(n)
                self.assertLess(abs(samples.mean() - target), 4 * stderr)

    def test_square_minus_angle_bracket_has_zero_mean(self):
        """[M,M] − ⟨M,M⟩ 是鞅，均值为 0"""
        model = reference_chain()
        rng = make_rng(stream_seed(13, "brackets"))
        phi = JumpFunction.random(model.n, rng)
        ev = CompensatorEvaluator(model)
        gaps = []
        for path in simulate_chain_paths(model, [0, 1, 2] * 1000, 1.5, rng):
            M = maf_trace(model, phi, path)
            gaps.append(square_bracket(M, M, path).final - angle_bracket(ev, phi, phi, path).final)
        gaps = np.array(gaps)
        self.assertLess(abs(gaps.mean()), 4 * gaps.std(ddof=1) / math.sqrt(gaps.size))

    def test_value_at_interpolates(self):
        trace = AFTrace.from_parts(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 0.0]),
                                   np.array([0.5, -1.0]), "raw-sum")
        np.testing.assert_allclose(trace.values, [0.0, 1.5, 0.5])
        np.testing.assert_allclose(trace.value_at([0.5, 1.5]), [0.25, 1.0])

    def test_mismatched_paths(self):
        a = AFTrace.zeros(np.array([0.0, 1.0]))
        b = AFTrace.zeros(np.array([0.0, 0.5, 1.0]))
        with self.assertRaises(TraceMismatchError):
            a.sup_distance(b)
        with self.assertRaises(TraceMismatchError):
            AFTrace.zeros(np.array([0.0]), kind="unknown")


class TestNakao(unittest.TestCase):
    """Nakao 算子"""

    def test_gamma_of_phi_u(self):
        """γ(M^u) 的密度 Lw − w 等于 Lu"""
        model = reference_chain()
        np.testing.assert_allclose(nakao_density(model, JumpFunction.from_function(U3)),
                                   [1.0, -0.5, -0.5], atol=1e-12)

    def test_explicit_formula_matches_solve(self):
        """Γ(g∗M) 的显式公式与 E1 求解路线逐点一致"""
        rng = make_rng(31)
        for model in random_chains():
            phi = JumpFunction.random(model.n, rng)
            g = rng.normal(size=model.n)
            with self.subTest(model=model.name):
                np.testing.assert_allclose(nakao_density(model, phi.weighted(g)),
                                           gamma_of_integral_explicit(model, g, phi), atol=1e-10)

    def test_gamma_of_K_vanishes(self):
        """ψ_K 对称且无边界，γ(ψ_K) = 0"""
        rng = make_rng(37)
        for model in random_chains(10, seed=41):
            phi = JumpFunction.random(model.n, rng)
            with self.subTest(model=model.name):
                self.assertLess(np.max(np.abs(gamma_solve(model, phi.reversal_kernel()))), 1e-12)

    def test_routes_agree_pathwise(self):
        """definition、explicit、stieltjes 三条路线逐路径一致，∫f dΓ(K) ≡ 0"""
        rng = make_rng(43)
        for model in random_chains(3):
            phi = JumpFunction.random(model.n, rng)
            f = rng.normal(size=model.n)
            form = build_form(model)
            for path in simulate_chain_paths(model, np.arange(20) % model.n, 2.0, rng):
                traces = [nakao_integral_trace(model, f, phi, path, route, form) for route in NAKAO_ROUTES]
                with self.subTest(model=model.name, x0=path.x0):
                    for other in traces[1:]:
                        self.assertLess(traces[0].sup_distance(other), 1e-10)
                    zero = nakao_integral_trace(model, f, phi.reversal_kernel(), path, "definition", form)
                    self.assertLess(zero.sup_norm(), 1e-12)

    def test_routes_disagree_on_broken_chain(self):
        """不满足细致平衡时 definition 与 explicit 路线分离"""
        model = broken_chain(reference_chain(), offset=0.5)
        phi = JumpFunction.from_function(U3)
        f = np.array([1.0, 0.0, 1.0])
        gap = np.max(np.abs(nakao_integral_density(model, f, phi, "definition")
                            - nakao_integral_density(model, f, phi, "explicit")))
        self.assertGreater(gap, 1e-6)


if __name__ == "__main__":
    unittest.main()
