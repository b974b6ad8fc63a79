"""
路径级随机积分
Itô 积分 (f∗M)_t = ∫f(X_{s−})dM_s、Fisk–Stratonovich 积分 (f∗M) + ½[M^f, M]、
关于 Dirichlet 过程的两类积分以及 Riemann 和逼近
"""

import logging
from typing import Any, Optional

import numpy as np

from ..finite_chain_core.form import FormMatrices, build_form
from ..finite_chain_core.jumps import JumpFunction
from ..finite_chain_core.model import ChainModel, FunctionDomainError
from ..finite_chain_core.nakao import dirichlet_trace, nakao_integral_trace
from ..finite_chain_core.paths import PathSample
from ..finite_chain_core.traces import AFTrace, TraceMismatchError, maf_trace
from .brackets import square_bracket

logger = logging.getLogger(__name__)

# Stratonovich 两条路线的一致性容差（相对轨迹大小）
ROUTE_RTOL = 1e-12

INTEGRAL_MODES = ("ito", "stratonovich")


def _require_vanishing_at_cemetery(f: Any, path: PathSample):
    if path.cemetery_value(f) != 0.0:
        raise FunctionDomainError(f"被积函数要求 f(∂)=0，实际 f(∂)={path.cemetery_value(f)}")


def _breakpoint_weights(f: Any, trace: AFTrace, path: PathSample) -> tuple:
    """跳的权 f(X_{t−}) 与区间 [t_i, t_{i+1}) 上的权 f(X_{t_i})"""
    path_times = path.breakpoints
    if path_times.shape != trace.times.shape or not np.array_equal(path_times, trace.times):
        raise TraceMismatchError("轨迹的断点与路径不一致")
    before = path.function_values(f, path.state_before(trace.times))
    segment = path.function_values(f, path.segment_states())
    return before, segment


def ito_integral(f: Any, M: AFTrace, path: PathSample) -> AFTrace:
    """
    (f∗M)_t = ∫_0^t f(X_{s−}) dM_s

    跳贡献 f(X_{s−})ΔM_s，连续增量按区间左端状态加权（链上被积函数在区间内为常数）

    Args:
        f: 状态函数（链为向量，Lévy 为可调用对象），要求 f(∂)=0
        M: 鞅加法泛函轨迹
        path: M 所在路径

    Returns:
        martingale 类型的轨迹
    """
    if M.kind != "martingale":
        raise TraceMismatchError(f"Itô 积分的积分子必须是鞅，实际类型 {M.kind}")
    _require_vanishing_at_cemetery(f, path)
    before, segment = _breakpoint_weights(f, M, path)
    return M.weighted(before, segment, kind="martingale")


def stieltjes_integral(f: Any, A: AFTrace, path: PathSample, kind: str = "raw-sum") -> AFTrace:
    """∫_0^t f(X_{s−}) dA_s，对任意类型的轨迹逐路径求 Stieltjes 和"""
    before, segment = _breakpoint_weights(f, A, path)
    return A.weighted(before, segment, kind=kind)


def function_jumps(f: Any, path: PathSample, times: np.ndarray) -> np.ndarray:
    """Δf(X_t) = f(X_t) − f(X_{t−})"""
    return path.function_values(f, path.state_at(times)) - path.function_values(f, path.state_before(times))


def stratonovich_integral(f: Any, M: AFTrace, path: PathSample,
                          f_jump: Optional[np.ndarray] = None,
                          continuous_covariation: Optional[AFTrace] = None) -> AFTrace:
    """
    Fisk–Stratonovich 积分 ∫_0^t f(X_s)∘dM_s = (f∗M)_t + ½[M^f, M]_t

    同时按中点权 ½(f(X_s)+f(X_{s−})) 计算跳部分，两条路线必须一致

    Args:
        f: 状态函数，要求 f(∂)=0
        M: 鞅加法泛函轨迹
        path: 路径
        f_jump: 各断点处的 Δf(X_s)，缺省由 f 直接求出
        continuous_covariation: ⟨M^{f,c}, M^c⟩ 的轨迹（链上为 0）

    Returns:
        raw-sum 类型的轨迹
    """
    ito = ito_integral(f, M, path)
    times = M.times
    df = function_jumps(f, path, times) if f_jump is None else np.asarray(f_jump, dtype=float)
    Mf = AFTrace.from_parts(times, df, np.zeros(times.size - 1), "raw-sum")
    bracket_route = ito + 0.5 * square_bracket(Mf, M, path, continuous_covariation)

    before, segment = _breakpoint_weights(f, M, path)
    midpoint = M.weighted(before + 0.5 * df, segment, kind="raw-sum")
    if continuous_covariation is not None:
        midpoint = midpoint + 0.5 * continuous_covariation

    gap = bracket_route.sup_distance(midpoint)
    if gap > ROUTE_RTOL * max(1.0, bracket_route.sup_norm()):
        raise TraceMismatchError(f"Stratonovich 积分两条路线不一致: {gap:.3e}")
    return bracket_route.with_kind("raw-sum")


def riemann_approx(f: Any, M: AFTrace, path: PathSample, n: int) -> AFTrace:
    """
    Riemann 和 Σ_{ℓ<n} f(X_{ℓT/n})(M_{(ℓ+1)T/n ∧ t} − M_{ℓT/n ∧ t})

    结果在路径断点上求值：落在 (s_ℓ, s_{ℓ+1}] 中的跳取权 f(X_{s_ℓ})，
    区间增量按线性性在网格单元之间拆分

    Args:
        f: 状态函数
        M: 积分子轨迹
        path: 路径
        n: 网格单元数

    Returns:
        与 M 断点相同的轨迹
    """
    if n < 1:
        raise ValueError(f"网格单元数必须 ≥ 1，实际 {n}")
    T = path.horizon
    mesh = np.linspace(0.0, T, n + 1)
    weights = path.function_values(f, path.state_at(mesh[:-1]))
    cumulative = np.concatenate([[0.0], np.cumsum(weights * np.diff(mesh))])

    times = M.times
    cell = np.clip(np.ceil(times * n / T).astype(int) - 1, 0, n - 1)
    jump_weights = weights[cell]
    width = np.diff(times)
    rate = np.divide(M.increments, width, out=np.zeros_like(width), where=width > 0)
    W = np.interp(times, mesh, cumulative)
    return AFTrace.from_parts(times, M.jumps * jump_weights, rate * np.diff(W), "raw-sum")


def midpoint_riemann_sum(f: Any, A: AFTrace, path: PathSample, n: int) -> float:
    """中点 Riemann 和 Σ ½(f(X_{s_ℓ})+f(X_{s_{ℓ+1}}))(A_{s_{ℓ+1}} − A_{s_ℓ}) 在 T 处的值"""
    mesh = np.linspace(0.0, path.horizon, n + 1)
    values = path.function_values(f, path.state_at(mesh))
    increments = np.diff(A.value_at(mesh))
    return float(np.sum(0.5 * (values[:-1] + values[1:]) * increments))


def dirichlet_integral(model: ChainModel, f: Any, phiM: JumpFunction, path: PathSample,
                       mode: str = "ito", variant: str = "A",
                       form: Optional[FormMatrices] = None) -> AFTrace:
    """
    关于 Dirichlet 过程的积分

    Itô 型 ∫f(X_{s−})dA = (f∗M) + ∫f dΓ(M)，Stratonovich 型 ∫f∘dA = ∫f∘dM + ∫f dΓ(M)；
    variant="Abar" 时积分子为 Ā = A + ½K（Γ(K) = 0）。
    f(∂) = c ≠ 0 时按 ∫(f − c)dA + c·A 处理

    Args:
        model: 链模型
        f: 长度 n（f(∂)=0）或 n+1 的状态函数
        phiM: M 的跳函数
        path: 路径
        mode: ito 或 stratonovich
        variant: A 或 Abar
        form: 已构造的形式矩阵（可选）

    Returns:
        raw-sum 类型的轨迹
    """
    if mode not in INTEGRAL_MODES:
        raise ValueError(f"未知积分模式: {mode}，可选 {INTEGRAL_MODES}")
    form = build_form(model) if form is None else form
    values = np.asarray(f, dtype=float)
    c = float(values[model.n]) if values.shape == (model.n + 1,) else 0.0
    g = values[: model.n] - c

    phi_total = phiM if variant == "A" else phiM + 0.5 * phiM.reversal_kernel()
    M = maf_trace(model, phi_total, path)
    if mode == "ito":
        martingale_part = ito_integral(g, M, path)
    else:
        martingale_part = stratonovich_integral(g, M, path)
    result = martingale_part + nakao_integral_trace(model, g, phiM, path, "definition", form)
    if c != 0.0:
        result = result + c * dirichlet_trace(model, phiM, path, variant, form=form)
    return result.with_kind("raw-sum")
