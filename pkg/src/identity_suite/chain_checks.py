"""
链后端上的恒等式检查
每个检查沿精确模拟的链路径逐路径组装恒等式两边，残差以 sup 范数计；
对偶刻画与能量恒等式只用矩阵运算，不需要路径
"""

import logging
from itertools import combinations
from typing import Any, Dict, List, Optional

import numpy as np

from ..finite_chain_core.form import build_form, energy
from ..finite_chain_core.jumps import JumpFunction
from ..finite_chain_core.model import ChainModel, ChainModelError, random_symmetric_chain
from ..finite_chain_core.nakao import (
    NAKAO_ROUTES,
    dirichlet_trace,
    gamma_rhs,
    gamma_solve,
    nakao_density,
    nakao_integral_trace,
    nakao_trace,
)
from ..finite_chain_core.paths import PathSample, simulate_chain_paths, stationary_starts
from ..finite_chain_core.semigroup import (
    expected_compensator,
    expected_jump_sum,
    integrated_semigroup_apply,
)
from ..finite_chain_core.traces import increment_trace, jump_sum_trace, maf_trace
from ..stochastic_calculus.brackets import CompensatorEvaluator, angle_bracket, square_bracket
from ..stochastic_calculus.integrals import (
    dirichlet_integral,
    ito_integral,
    midpoint_riemann_sum,
    riemann_approx,
    stieltjes_integral,
    stratonovich_integral,
)
from ..stochastic_calculus.phi_functions import derivative_check, jump_correction_trace
from ..stochastic_calculus.starred import jump_representation
from .specs import (
    CheckSpec,
    ResidualReport,
    SuiteEnvironment,
    SuiteError,
    check_rng,
    mean_and_stderr,
    pathwise_report,
    statistical_report,
)

logger = logging.getLogger(__name__)

# 对偶刻画 t ↓ 0 的 Richardson 外推：起点与折半级数
RICHARDSON_T0 = 0.2
RICHARDSON_LEVELS = 7
SEMIGROUP_NODES = 16

# Φ 导数有限差分核对
FD_POINTS = 10
FD_TOLERANCE = 1e-6

RIEMANN_MESHES = (16, 64, 256)
# 全变差比较的浮点余量
RIEMANN_RTOL = 1e-9
RIEMANN_ATOL = 1e-14


# ---- 公共工具 ----

def _vector(model: ChainModel, f: Any) -> np.ndarray:
    """长度 n、f(∂)=0 的状态函数"""
    return model.extend(f)[: model.n]


def _paths(model: ChainModel, spec: CheckSpec, root: int,
           starts: Optional[np.ndarray] = None) -> List[PathSample]:
    """缺省从每个状态轮流出发"""
    if starts is None:
        starts = np.arange(spec.paths) % model.n
    return simulate_chain_paths(model, starts, spec.horizon, check_rng(root, spec))


def _jump_function(env: SuiteEnvironment, spec: CheckSpec, model: ChainModel,
                   root: int, role: str = "u") -> JumpFunction:
    """options.random_phi 为真时取随机跳函数，否则为 φ_u"""
    if spec.option("random_phi", False):
        return JumpFunction.random(model.n, check_rng(root, spec, 1),
                                   with_boundary=bool(spec.option("boundary", True)))
    return JumpFunction.from_function(_vector(model, env.role(spec, role, model)))


def richardson(values: List[float], ratio: float = 2.0) -> float:
    """
    Richardson 外推到 t = 0

    Args:
        values: F(t_0), F(t_0/ratio), F(t_0/ratio²), ...
        ratio: 相邻时间之比

    Returns:
        外推值
    """
    row = np.asarray(values, dtype=float)
    for k in range(1, row.size):
        factor = ratio ** k
        row = (factor * row[1:] - row[:-1]) / (factor - 1.0)
    return float(row[0])


# ---- 检查 ----

def check_fukushima(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """u(X_t) − u(X_0) − M^u_t − N^u_t，N^u = Γ(M^u)"""
    model = env.chain(spec.model)
    u = _vector(model, env.role(spec, "u", model))
    form = build_form(model)
    phi_u = JumpFunction.from_function(u)

    residuals = []
    for path in _paths(model, spec, root):
        decomposition = maf_trace(model, phi_u, path) + nakao_trace(model, phi_u, path, form)
        residuals.append(increment_trace(u, path).sup_distance(decomposition))

    return pathwise_report(spec, residuals, {
        "energy": energy(model, phi_u),
        "condition_number": form.condition_number,
    })


def check_ito_formula(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """
    广义 Itô 公式（ito 或 stratonovich 模式）

    Φ(u)(X_t) − Φ(u)(X_0) = Σ_k ∫Φ_k(u) dA^{u_k} + C_t，
    其中 Φ(u) 与 Φ_k(u) 在 ∂ 处分别取 Φ(0)、Φ_k(0)
    """
    mode = spec.option("mode", "ito")
    if mode not in ("ito", "stratonovich"):
        raise SuiteError(f"{spec.name}: 链后端没有连续部分，不支持模式 {mode}")
    model = env.chain(spec.model)
    phi = env.role(spec, "phi")
    us = [_vector(model, u) for u in env.roles(spec, "u", model)]
    form = build_form(model)

    U = np.column_stack(us)
    origin = np.zeros((1, len(us)))
    phi_of_u = np.append(phi.value(U), phi.value(origin))
    gradient, gradient_at_origin = phi.gradient(U), phi.gradient(origin)[0]
    partials = [np.append(gradient[:, k], gradient_at_origin[k]) for k in range(len(us))]
    jumps = [JumpFunction.from_function(u) for u in us]
    weight = "left" if mode == "ito" else "midpoint"

    fd_error = derivative_check(phi, check_rng(root, spec, 1).normal(size=(FD_POINTS, len(us))))
    if fd_error >= FD_TOLERANCE:
        logger.warning(f"{spec.name}: Φ={phi.name} 的导数与有限差分不一致 {fd_error:.3e}")

    residuals = []
    for path in _paths(model, spec, root):
        rhs = jump_correction_trace(phi, us, path, weight)
        for partial, phi_k in zip(partials, jumps):
            rhs = rhs + dirichlet_integral(model, partial, phi_k, path, mode, form=form)
        residuals.append(increment_trace(phi_of_u, path).sup_distance(rhs))

    return pathwise_report(spec, residuals, {"mode": mode, "phi": phi.name, "fd_error": fd_error},
                           extra_ok=fd_error < FD_TOLERANCE)


def check_leibniz_ibp(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """
    纯间断部分的 Leibniz 规则与 Fisk–Stratonovich 分部积分

    (i)   M^{uv} = ∫u_− dM^v + ∫v_− dM^u + [M^u,M^v] − ⟨M^u,M^v⟩
    (ii)  Γ(M^{uv}) = ∫u dΓ(M^v) + ∫v dΓ(M^u) + ⟨M^u,M^v⟩
    (iii) u(X_t)v(X_t) − u(X_0)v(X_0) = ∫u∘dA^v + ∫v∘dA^u
    (iv)  M^{uv} = ∫u∘dM^v + ∫v∘dM^u − ⟨M^u,M^v⟩
    """
    model = env.chain(spec.model)
    u = _vector(model, env.role(spec, "u", model))
    v = _vector(model, env.role(spec, "v", model))
    form = build_form(model)
    ev = CompensatorEvaluator(model)
    phi_u, phi_v = JumpFunction.from_function(u), JumpFunction.from_function(v)
    phi_uv = JumpFunction.from_function(u * v)

    parts: Dict[str, List[float]] = {"product_rule": [], "gamma_rule": [], "ibp": [],
                                     "stratonovich_rule": []}
    for path in _paths(model, spec, root):
        Mu, Mv = maf_trace(model, phi_u, path), maf_trace(model, phi_v, path)
        Muv = maf_trace(model, phi_uv, path)
        angle = angle_bracket(ev, phi_u, phi_v, path)

        product = ito_integral(u, Mv, path) + ito_integral(v, Mu, path) \
            + square_bracket(Mu, Mv, path) - angle
        gamma = nakao_integral_trace(model, u, phi_v, path, form=form) \
            + nakao_integral_trace(model, v, phi_u, path, form=form) + angle
        ibp = dirichlet_integral(model, u, phi_v, path, "stratonovich", form=form) \
            + dirichlet_integral(model, v, phi_u, path, "stratonovich", form=form)
        stratonovich = stratonovich_integral(u, Mv, path) + stratonovich_integral(v, Mu, path) - angle

        parts["product_rule"].append(Muv.sup_distance(product))
        parts["gamma_rule"].append(nakao_trace(model, phi_uv, path, form).sup_distance(gamma))
        parts["ibp"].append(increment_trace(u * v, path).sup_distance(ibp))
        parts["stratonovich_rule"].append(Muv.sup_distance(stratonovich))

    residuals = np.max(np.column_stack(list(parts.values())), axis=1)
    return pathwise_report(spec, residuals, {k: float(np.max(r)) for k, r in parts.items()})


def check_nakao_routes(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """∫f dΓ(M) 的定义式、显式与 Stieltjes 三条路线两两比较"""
    model = env.chain(spec.model)
    form = build_form(model)
    if spec.option("random_f", False):
        f = check_rng(root, spec, 2).normal(size=model.n)
    else:
        f = _vector(model, env.role(spec, "f", model))
    phi = _jump_function(env, spec, model, root)

    residuals = []
    for path in _paths(model, spec, root):
        traces = [nakao_integral_trace(model, f, phi, path, route, form) for route in NAKAO_ROUTES]
        residuals.append(max(a.sup_distance(b) for a, b in combinations(traces, 2)))
    return pathwise_report(spec, residuals, {"routes": list(NAKAO_ROUTES)})


def check_gamma_K_zero(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """
    Γ(K) = 0，K 的跳函数为 ψ_K = −1_{E×E}(φ+φ̄)

    报告 ‖γ(ψ_K)‖_∞、逐路径 sup|Γ(K)_t| 与 sup|∫f dΓ(K)|；
    options.instances 另取若干随机 (链, φ) 实例
    """
    model = env.chain(spec.model)
    form = build_form(model)
    phi = _jump_function(env, spec, model, root)
    psi_K = phi.reversal_kernel()
    f = _vector(model, env.role(spec, "f", model, default=np.ones(model.n)))

    gamma_norm = float(np.max(np.abs(gamma_solve(model, psi_K, form))))
    path_norms = [max(nakao_trace(model, psi_K, path, form).sup_norm(),
                      nakao_integral_trace(model, f, psi_K, path, form=form).sup_norm())
                  for path in _paths(model, spec, root)]

    rng = check_rng(root, spec, 2)
    instance_norms = []
    for _ in range(int(spec.option("instances", 0))):
        chain = random_symmetric_chain(int(rng.integers(3, 9)), rng)
        random_phi = JumpFunction.random(chain.n, rng, with_boundary=False)
        instance_norms.append(float(np.max(np.abs(gamma_solve(chain, random_phi.reversal_kernel())))))

    return pathwise_report(spec, [gamma_norm] + path_norms + instance_norms, {
        "gamma_norm": gamma_norm,
        "path_max": max(path_norms, default=0.0),
        "instance_max": max(instance_norms, default=0.0),
        "instances": len(instance_norms),
    })


def check_nakao_dual(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """
    对偶刻画 lim (1/t)E_{g·m}[Γ(Z)_t] = −½μ_{⟨M^g+M^{g,κ},Z⟩}(E)

    左边：Σ_x g(x)m(x)∫_0^t P_s(Lw − w)(x)ds / t，在 t_0, t_0/2, ... 上精确求值后外推；
    右边：−Σ_x g(x)b(x)，b 为 gamma_rhs
    """
    model = env.chain(spec.model)
    form = build_form(model)
    phiZ = _jump_function(env, spec, model, root)
    if spec.option("g", "basis") == "basis":
        gs = list(np.eye(model.n))
    else:
        gs = [_vector(model, env.role(spec, "g", model))]

    t0 = float(spec.option("t0", RICHARDSON_T0))
    times = [t0 / 2.0 ** j for j in range(int(spec.option("levels", RICHARDSON_LEVELS)))]
    nodes = int(spec.option("nodes", SEMIGROUP_NODES))
    density = nakao_density(model, phiZ, form)
    averages = [integrated_semigroup_apply(model, t, density, nodes=nodes) / t for t in times]
    b = gamma_rhs(model, phiZ)

    def lhs(g: np.ndarray) -> float:
        return richardson([float(np.sum(g * model.m * a)) for a in averages])

    residuals = [abs(lhs(g) + float(g @ b)) for g in gs]
    linearity = abs(lhs(2.0 * gs[0]) - 2.0 * lhs(gs[0]))
    return pathwise_report(spec, residuals, {
        "times": times,
        "rhs": [-float(g @ b) for g in gs],
        "linearity": linearity,
    })


def check_levy_system(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """
    链上的 Lévy 系统：E_x[Σ_{s≤t} φ(X_{s−},X_s)] = E_x[∫_0^t N(φ)(X_s)ds]

    两边的精确值由半群给出且必须一致；蒙特卡罗跳和与精确期望比较得 z 分数
    """
    model = env.chain(spec.model)
    phi = _jump_function(env, spec, model, root)
    T = spec.horizon
    expected = expected_jump_sum(model, phi, T)
    exact_gap = float(np.max(np.abs(expected - expected_compensator(model, phi, T))))

    samples = [jump_sum_trace(phi, path).final - expected[int(path.x0)]
               for path in _paths(model, spec, root)]
    return statistical_report(spec, samples, details={
        "expected": expected.tolist(),
        "exact_gap": exact_gap,
    }, extra_ok=exact_gap <= spec.tolerance)


def check_energy_identity(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """e(M^u) = E(u,u) − ½∫u²dκ，对配置的 u 与随机函数组逐个比较"""
    model = env.chain(spec.model)
    rng = check_rng(root, spec)
    battery = [(model, _vector(model, env.role(spec, "u", model)))]
    battery += [(model, rng.normal(size=model.n)) for _ in range(int(spec.option("random_functions", 0)))]
    for _ in range(int(spec.option("random_chains", 0))):
        chain = random_symmetric_chain(int(rng.integers(3, 9)), rng)
        battery.append((chain, rng.normal(size=chain.n)))

    residuals = []
    for chain, u in battery:
        form = build_form(chain)
        e = energy(chain, JumpFunction.from_function(u))
        residuals.append(abs(e - (form.bilinear(u, u) - 0.5 * float(np.sum(u ** 2 * form.kappa)))))

    u0 = battery[0][1]
    return pathwise_report(spec, residuals, {
        "energy": energy(model, JumpFunction.from_function(u0)),
        "dirichlet_form": build_form(model).bilinear(u0, u0),
    })


def check_odd_af(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """
    Stratonovich 跳修正 C_t 在时间反转下为奇加法泛函：C_t∘r_t + C_t = 0

    平稳起点 X_0 ~ m/|m|；Itô 形式的修正（左端权）作为对照统计量，不参与判定
    """
    model = env.chain(spec.model)
    if np.any(model.k > 0):
        raise ChainModelError(f"{spec.name}: 时间反转检查要求无杀死的链（k ≡ 0）")
    phi = env.role(spec, "phi")
    us = [_vector(model, u) for u in env.roles(spec, "u", model)]
    starts = stationary_starts(model, spec.paths, check_rng(root, spec, 1))

    residuals, contrast = [], []
    for path in _paths(model, spec, root, starts):
        backward = path.reversed()
        residuals.append(abs(jump_correction_trace(phi, us, path, "midpoint").final
                             + jump_correction_trace(phi, us, backward, "midpoint").final))
        contrast.append(abs(jump_correction_trace(phi, us, path, "left").final
                            + jump_correction_trace(phi, us, backward, "left").final))

    return pathwise_report(spec, residuals, {
        "contrast_max": float(np.max(contrast, initial=0.0)),
        "contrast_mean": float(np.mean(contrast)) if contrast else 0.0,
    })


def check_associativity(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """∫g d(∫f dΓ(M)) = ∫fg dΓ(M)；外层积分按 Stieltjes 和计算"""
    model = env.chain(spec.model)
    form = build_form(model)
    f = _vector(model, env.role(spec, "f", model))
    g = _vector(model, env.role(spec, "g", model))
    phi = _jump_function(env, spec, model, root)

    residuals, swaps = [], []
    for path in _paths(model, spec, root):
        outer = stieltjes_integral(g, nakao_integral_trace(model, f, phi, path, form=form), path)
        swapped = stieltjes_integral(f, nakao_integral_trace(model, g, phi, path, form=form), path)
        residuals.append(outer.sup_distance(nakao_integral_trace(model, f * g, phi, path, form=form)))
        swaps.append(outer.sup_distance(swapped))
    return pathwise_report(spec, residuals, {"swap_max": float(np.max(swaps, initial=0.0))})


def check_jump_representation(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """
    Ā 的跳表示与定义式逐路径比较

    f 缺省时比较 dirichlet_trace(Abar) 与 jump_representation；
    给出 f 时另比较 ∫f dĀ 的 Itô 形式（杀死权 f(X_{ζ−})）与 Stratonovich 形式（杀死权取中点）
    """
    model = env.chain(spec.model)
    form = build_form(model)
    phi = _jump_function(env, spec, model, root)
    f = spec.functions.get("f")
    f = None if f is None else _vector(model, env.function(f, model))

    residuals, unstable, killed = [], 0, 0
    for path in _paths(model, spec, root):
        trace, report = jump_representation(path, phi, "ito")
        gaps = [dirichlet_trace(model, phi, path, "Abar", form=form).sup_distance(trace)]
        if f is not None:
            for mode, killing_weight in (("ito", "left"), ("stratonovich", "midpoint")):
                weighted, _ = jump_representation(path, phi, mode, f=f, killing_weight=killing_weight)
                definition = dirichlet_integral(model, f, phi, path, mode, variant="Abar", form=form)
                gaps.append(definition.sup_distance(weighted))
        residuals.append(max(gaps))
        unstable += not report.converged
        killed += path.killed

    return pathwise_report(spec, residuals, {"unconverged": unstable, "killed_paths": killed},
                           extra_ok=unstable == 0)


def events_separated(path: PathSample, n: int) -> bool:
    """网格 n 的每个单元 (s_ℓ, s_{ℓ+1}] 至多含一次跳跃（杀死跳计入）"""
    times = path.jump_times()
    if times.size < 2:
        return True
    cells = np.ceil(times * n / path.horizon).astype(int)
    return bool(np.all(np.diff(cells) > 0))


def check_riemann(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """
    Riemann 和逼近 Itô 积分

    网格须逐级嵌套。对最粗网格下事件互相分离的路径，误差轨迹 riemann_approx − ito_integral
    只在含跳单元的跳后部分变化且符号固定，其全变差随网格加密不增；逐路径检查这一点，
    并要求分离路径上的平均全变差严格下降（已为 0 的级除外）。
    各级 sup 误差的中位数与中点 Riemann 和对 Stratonovich 积分的差只作为信息记录
    """
    model = env.chain(spec.model)
    f = _vector(model, env.role(spec, "f", model))
    phi = _jump_function(env, spec, model, root)
    meshes = [int(n) for n in spec.option("meshes", RIEMANN_MESHES)]
    if len(meshes) < 2 or meshes[0] < 1 or any(b <= a or b % a for a, b in zip(meshes[:-1], meshes[1:])):
        raise SuiteError(f"{spec.name}: 网格须为递增的嵌套序列（后一级是前一级的整数倍），实际 {meshes}")

    errors, variations, separated, midpoint_gaps = [], [], [], []
    for path in _paths(model, spec, root):
        M = maf_trace(model, phi, path)
        ito = ito_integral(f, M, path)
        gaps = [riemann_approx(f, M, path, n) - ito for n in meshes]
        errors.append([gap.sup_norm() for gap in gaps])
        variations.append([gap.total_variation() for gap in gaps])
        separated.append(events_separated(path, meshes[0]))
        stratonovich = stratonovich_integral(f, M, path)
        midpoint_gaps.append(abs(midpoint_riemann_sum(f, M, path, meshes[-1]) - stratonovich.final))

    errors = np.asarray(errors)
    separated = np.asarray(separated, dtype=bool)
    eligible = np.asarray(variations)[separated]
    slack = RIEMANN_RTOL * eligible[:, :-1] + RIEMANN_ATOL
    per_path = np.all(np.diff(eligible, axis=1) <= slack, axis=1)
    if eligible.shape[0]:
        mean_variation = eligible.mean(axis=0)
        decreasing = all(b < a or a == 0.0 for a, b in zip(mean_variation[:-1], mean_variation[1:]))
    else:
        mean_variation = np.full(len(meshes), np.nan)
        decreasing = False
    if not separated.any():
        logger.warning(f"{spec.name}: 没有事件分离的路径，无法判定")

    medians = np.median(errors, axis=0)
    finest = errors[:, -1]
    mean, stderr = mean_and_stderr(finest)

    return ResidualReport(
        name=spec.name, check=spec.check, backend=spec.backend, n_paths=int(finest.size),
        max_resid=float(np.max(finest)), mean_resid=mean, stderr=stderr,
        passed=bool(eligible.shape[0] > 0 and np.all(per_path) and decreasing),
        details={
            "meshes": meshes,
            "separated_paths": int(separated.sum()),
            "variation_monotone_paths": int(per_path.sum()),
            "mean_variation": mean_variation.tolist(),
            "median_errors": medians.tolist(),
            "finest_not_worse_fraction": float(np.mean(errors[:, -1] <= errors[:, 0])),
            "midpoint_vs_stratonovich_mean": float(np.mean(midpoint_gaps)),
        },
    )
