"""
Lévy 后端上的统计检查
截断到 |h| > ε 的复合 Poisson 路径上，鞅部分的均值以 z 分数检验；
小跳截断的偏差由 σ²(ε) 给出上界，并要求上界随 ε 减半而缩小
"""

import logging
import math
from typing import Any, Callable, List, Sequence

import numpy as np
from scipy.stats import ks_2samp

from ..finite_chain_core.paths import PathSample
from ..finite_chain_core.traces import increment_trace, jump_trace, rate_trace
from ..levy_models.model import LevyModel
from ..levy_models.quadrature import char_exponent, kernel_integral, small_jump_error, tail_mass
from ..levy_models.sampler import (
    DIFFUSION_STEPS,
    JumpSizeSampler,
    TruncationPolicy,
    ensemble_pre_states,
    sample_jump_ensemble,
    sample_levy_path,
)
from ..levy_models.test_functions import TestFunction
from ..stochastic_calculus.brackets import CompensatorEvaluator
from ..stochastic_calculus.integrals import ito_integral, stieltjes_integral, stratonovich_integral
from ..stochastic_calculus.phi_functions import PhiFunction, jump_correction_trace
from .specs import (
    CheckSpec,
    ResidualReport,
    SuiteEnvironment,
    SuiteError,
    check_rng,
    mean_and_stderr,
    statistical_report,
    z_score,
)

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-3

# 两样本 KS 检验 1% 水平的临界系数
KS_CRITICAL_1PCT = 1.628

# 闭式特征指数比对的相对容差
CLOSED_FORM_RTOL = 1e-6

BUDGET_RADII = 513


# ---- 公共工具 ----

def _epsilon(spec: CheckSpec) -> float:
    return float(spec.option("epsilon", DEFAULT_EPSILON))


def _starts(model: LevyModel, spec: CheckSpec) -> List[np.ndarray]:
    """起点组，缺省为 {0, e_1}"""
    starts = spec.option("starts")
    if starts is None:
        e1 = np.zeros(model.dim)
        e1[0] = 1.0
        return [np.zeros(model.dim), e1]
    return [np.atleast_1d(np.asarray(s, dtype=float)) for s in starts]


def _paths(model: LevyModel, spec: CheckSpec, root: int,
           policy: TruncationPolicy) -> List[PathSample]:
    rng = check_rng(root, spec)
    sampler = JumpSizeSampler(model, policy.epsilon)
    starts = _starts(model, spec)
    return [sample_levy_path(model, starts[i % len(starts)], spec.horizon, policy, rng, sampler=sampler)
            for i in range(spec.paths)]


def _generator_on_segments(ev: CompensatorEvaluator, u: TestFunction,
                           paths: Sequence[PathSample]) -> List[np.ndarray]:
    """
    L_εu(x) = ∫_{|h|>ε}(u(x+h) − u(x))ν(dh) 在各路径断点区间上的值

    u 与 ν 都旋转不变，全部路径共用一张径向表
    """
    states = [p.segment_states() for p in paths]
    values = ev.density(lambda x, y: u(y) - u(x), states=np.vstack(states), radial=True)
    return np.split(values, np.cumsum([len(s) for s in states])[:-1])


def _stack(us: Sequence[TestFunction]) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: np.column_stack([u(x) for u in us])


def truncation_budget(model: LevyModel, epsilon: float, T: float, us: Sequence[TestFunction],
                      phi: PhiFunction = None, top: float = 1.0) -> float:
    """
    小跳截断造成的偏差上界

    Φ∘u 的 Hessian 在 |x| ≤ top 上有界时取 ½·sup‖D²(Φ∘u)‖·σ²(ε)·T；
    否则退回 Hölder 估计 sup|∇Φ|·C·(σ²(ε)T)^{h/2}

    Args:
        model: Lévy 模型
        epsilon: 截断半径
        T: 观察期
        us: 检验函数
        phi: Φ，缺省为恒等（只有一个 u）
        top: 半径上限（通常为路径访问到的最大 |x|）

    Returns:
        偏差上界
    """
    sigma2T = small_jump_error(model, epsilon) * T
    radii = np.linspace(0.0, max(top, 1e-12), BUDGET_RADII)
    points = np.zeros((radii.size, model.dim))
    points[:, 0] = radii
    Y = _stack(us)(points)
    if phi is None:
        gradient, hessian = np.ones_like(Y), np.zeros(Y.shape + (Y.shape[1],))
    else:
        gradient, hessian = phi.gradient(Y), phi.hessian(Y)
    slopes = np.column_stack([np.linalg.norm(u.gradient(points), axis=1) for u in us])
    curvature = np.column_stack([u.hessian_norm_on_radii(radii, model.dim) for u in us])

    with np.errstate(invalid="ignore"):
        norm = np.einsum("skl,sk,sl->s", np.abs(hessian), slopes, slopes) \
            + np.sum(np.abs(gradient) * curvature, axis=1)
    bound = float(np.max(norm))
    if math.isfinite(bound):
        return 0.5 * bound * sigma2T
    lipschitz = float(np.max(np.sum(np.abs(gradient), axis=1)))
    holder = min(u.holder_exponent for u in us)
    constant = max(u.holder_constant for u in us)
    return lipschitz * constant * sigma2T ** (holder / 2.0)


def _max_radius(paths: Sequence[PathSample]) -> float:
    return float(max(np.max(np.linalg.norm(p.segment_states(), axis=1)) for p in paths))


# ---- 检查 ----

def check_fukushima(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """
    u(X_t) − u(X_0) = M^u_t + N^u_t，N^u_t = ∫_0^t L_εu(X_s)ds

    路径缺省带布朗补偿，代替被丢弃的小跳；M^u 由抽到的跳对 (X_{s−}, X_s) 上 u 的增量减去 N^u 得到。
    统计量为 M^u_T 的均值（应为 0）；u(X_T) − u(X_0) − M^u_T − N^u_T 的均值须落在截断预算内
    """
    model = env.levy(spec.model)
    u = env.role(spec, "u", model)
    epsilon = _epsilon(spec)
    compensate = bool(spec.option("compensate", True))
    steps = int(spec.option("diffusion_steps", DIFFUSION_STEPS))
    policy = TruncationPolicy(epsilon, compensate=compensate, diffusion_steps=steps)
    paths = _paths(model, spec, root, policy)
    rates = _generator_on_segments(CompensatorEvaluator(model, epsilon), u, paths)

    martingale, residuals = [], []
    for path, rate in zip(paths, rates):
        pre, post = path.jump_pairs()
        N = rate_trace(path, rate)
        M = (jump_trace(path, u(post) - u(pre)) - N).with_kind("martingale")
        martingale.append(M.final)
        residuals.append((increment_trace(u, path) - M - N).final)

    top = _max_radius(paths)
    budget = truncation_budget(model, epsilon, spec.horizon, [u], top=top)
    budget_half = truncation_budget(model, epsilon / 2.0, spec.horizon, [u], top=top)
    residual_mean, residual_stderr = mean_and_stderr(residuals)
    slack = 4.0 * residual_stderr if math.isfinite(residual_stderr) else 0.0
    return statistical_report(spec, martingale, details={
        "epsilon": epsilon,
        "compensate": compensate,
        "budget": budget,
        "budget_half": budget_half,
        "residual_mean": residual_mean,
        "residual_stderr": residual_stderr,
    }, max_resid=float(np.max(np.abs(residuals))),
        extra_ok=abs(residual_mean) <= budget + slack)


def check_ito_formula(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """
    广义 Itô 公式

    ito / stratonovich：截断路径上逐路径组装两边，统计量为 Σ_k ∫Φ_k(u(X_{s−}))dM^{u_k} 的均值；
    continuous：带布朗补偿的路径上，Φ(u) 连续部分对
    Σ_k Φ_k(u)Δ^c u_k + ½Σ_{k,l}Φ_{kl}(u)∇u_k·∇u_l(σ²(ε)/N)Δt 的残差均值
    """
    mode = spec.option("mode", "ito")
    model = env.levy(spec.model)
    phi = env.role(spec, "phi")
    us = env.roles(spec, "u", model)
    epsilon = _epsilon(spec)
    if mode == "continuous":
        return _continuous_chain_rule(spec, model, phi, us, epsilon, root)
    if mode not in ("ito", "stratonovich"):
        raise SuiteError(f"{spec.name}: 未知模式 {mode}")

    paths = _paths(model, spec, root, TruncationPolicy(epsilon))
    ev = CompensatorEvaluator(model, epsilon)
    rates = [_generator_on_segments(ev, u, paths) for u in us]
    stack = _stack(us)
    composite = lambda x: phi.value(stack(x))
    partials = [lambda x, k=k: phi.gradient(stack(x))[:, k] for k in range(len(us))]
    weight = "left" if mode == "ito" else "midpoint"

    martingale, residuals = [], []
    for i, path in enumerate(paths):
        rhs = jump_correction_trace(phi, us, path, weight)
        total = 0.0
        for k, u in enumerate(us):
            N = rate_trace(path, rates[k][i])
            M = (increment_trace(u, path) - N).with_kind("martingale")
            ito = ito_integral(partials[k], M, path)
            total += ito.final
            integral = ito if mode == "ito" else stratonovich_integral(partials[k], M, path)
            rhs = rhs + integral + stieltjes_integral(partials[k], N, path)
        residuals.append(increment_trace(composite, path).sup_distance(rhs))
        martingale.append(total)

    top = _max_radius(paths)
    budget = truncation_budget(model, epsilon, spec.horizon, us, phi, top)
    budget_half = truncation_budget(model, epsilon / 2.0, spec.horizon, us, phi, top)
    return statistical_report(spec, martingale, details={
        "mode": mode,
        "phi": phi.name,
        "epsilon": epsilon,
        "pathwise_max": float(np.max(residuals)),
        "budget": budget,
        "budget_half": budget_half,
    }, max_resid=float(np.max(residuals)), extra_ok=budget_half <= budget)


def _continuous_chain_rule(spec: CheckSpec, model: LevyModel, phi: PhiFunction,
                           us: Sequence[TestFunction], epsilon: float, root: int) -> ResidualReport:
    steps = int(spec.option("diffusion_steps", DIFFUSION_STEPS))
    paths = _paths(model, spec, root, TruncationPolicy(epsilon, compensate=True, diffusion_steps=steps))
    variance = small_jump_error(model, epsilon) / model.dim
    stack = _stack(us)
    composite = lambda x: phi.value(stack(x))

    samples = []
    for path in paths:
        X = path.segment_states()
        U = stack(X)
        dt = np.diff(path.breakpoints)
        d_phi = increment_trace(composite, path).increments
        du = np.column_stack([increment_trace(u, path).increments for u in us])
        G = np.stack([u.gradient(X) for u in us], axis=1)
        first = np.einsum("sk,sk->s", phi.gradient(U), du)
        second = 0.5 * np.einsum("skl,skn,sln->s", phi.hessian(U), G, G) * variance * dt
        samples.append(float(np.sum(d_phi - first - second)))

    return statistical_report(spec, samples, details={
        "mode": "continuous",
        "phi": phi.name,
        "epsilon": epsilon,
        "diffusion_variance": variance,
        "diffusion_steps": steps,
    })


def _jump_test(kind: str, threshold: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    if kind == "indicator":
        return lambda x, y: (np.linalg.norm(y - x, axis=-1) > threshold).astype(float)
    if kind == "odd":
        return lambda x, y: np.sign((y - x)[..., 0]) * (np.linalg.norm(y - x, axis=-1) > threshold)
    raise SuiteError(f"未知跳检验函数: {kind}，可选 indicator、odd")


def check_levy_system(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """
    E_x[Σ_{s≤t}ψ(X_{s−},X_s)] = t·Nψ(x)

    ψ 取 1{|h|>c}（indicator）或 sign(h_1)1{|h|>c}（odd）；Nψ 由核求积给出
    """
    model = env.levy(spec.model)
    threshold = float(spec.option("threshold", 1.0))
    epsilon = float(spec.option("epsilon", threshold))
    kind = spec.option("test", "indicator")
    psi = _jump_test(kind, threshold)
    x0 = _starts(model, spec)[0]

    owner, h = sample_jump_ensemble(model, spec.horizon, epsilon, spec.paths, check_rng(root, spec))
    pre = ensemble_pre_states(x0, owner, h)
    sums = np.bincount(owner, weights=psi(pre, pre + h), minlength=spec.paths)
    expected = spec.horizon * kernel_integral(model, psi, x0, epsilon=epsilon, points=[threshold])

    details = {"test": kind, "threshold": threshold, "expected": expected}
    if kind == "indicator":
        details["closed_form"] = spec.horizon * tail_mass(model, max(threshold, epsilon))
    return statistical_report(spec, sums, expected, details=details)


def check_char_function(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """
    E cos⟨ξ, X_t⟩ = exp(−t·ψ_ε(ξ))，逐个 ξ 比较，报告 |z| 最大者；
    α-稳定模型另核对求积特征指数与 |ξ|^α
    """
    model = env.levy(spec.model)
    epsilon = _epsilon(spec)
    T = spec.horizon
    owner, h = sample_jump_ensemble(model, T, epsilon, spec.paths, check_rng(root, spec))
    totals = np.zeros((spec.paths, model.dim))
    np.add.at(totals, owner, h)

    worst, per_xi, closed_errors = None, [], []
    for s in spec.option("xi", [0.5, 1.0, 2.0]):
        xi = np.zeros(model.dim)
        xi[0] = float(s)
        expected = math.exp(-T * char_exponent(model, xi, "quadrature", epsilon=epsilon))
        samples = np.cos(totals @ xi)
        z = z_score(*mean_and_stderr(samples), expected)
        per_xi.append({"xi": float(s), "expected": expected, "z": z})
        if worst is None or abs(z) > abs(worst[2]):
            worst = (samples, expected, z)
        if model.is_stable:
            exact = abs(float(s)) ** model.alpha
            closed_errors.append(abs(char_exponent(model, xi, "quadrature") - exact) / exact)

    closed_max = max(closed_errors, default=0.0)
    return statistical_report(spec, worst[0], worst[1], details={
        "epsilon": epsilon,
        "per_xi": per_xi,
        "closed_form_rel_error": closed_max,
    }, extra_ok=closed_max < CLOSED_FORM_RTOL)


def check_stable_scaling(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """
    自相似性：X_t（截断 ε）与 t^{1/α}X_1（截断 ε·t^{−1/α}）同分布

    比较第一个坐标的两样本 KS 统计量与 1% 临界值
    """
    model = env.levy(spec.model)
    if not model.is_stable:
        raise SuiteError(f"{spec.name}: 自相似检查只适用于 α-稳定模型")
    epsilon = _epsilon(spec)
    t = float(spec.option("t", spec.horizon))
    scale = t ** (1.0 / model.alpha)
    n = spec.paths

    owner, h = sample_jump_ensemble(model, t, epsilon, n, check_rng(root, spec, 0))
    direct = np.bincount(owner, weights=h[:, 0], minlength=n)
    owner, h = sample_jump_ensemble(model, 1.0, epsilon / scale, n, check_rng(root, spec, 1))
    scaled = scale * np.bincount(owner, weights=h[:, 0], minlength=n)

    result = ks_2samp(direct, scaled)
    critical = KS_CRITICAL_1PCT * math.sqrt(2.0 * n / (n * n))
    return ResidualReport(
        name=spec.name, check=spec.check, backend=spec.backend, n_paths=n,
        max_resid=float(result.statistic), mean_resid=float(np.median(direct) - np.median(scaled)),
        passed=bool(result.statistic < critical),
        details={"t": t, "epsilon": epsilon, "ks_statistic": float(result.statistic),
                 "critical": critical, "pvalue": float(result.pvalue)},
    )
