"""
Nakao 算子与 Dirichlet 过程
γ(Z) 由 E1 线性方程求得，Γ(Z)_t = ∫_0^t (Lγ(Z) − γ(Z))(X_s) ds；
Nakao 积分 ∫f dΓ(M) 提供定义式、显式 Lévy 系统公式与 Stieltjes 三条路线
"""

import logging
from typing import Any, Optional

import numpy as np

from .form import FormMatrices, build_form
from .jumps import JumpFunction, kernel_apply
from .model import ChainModel, ChainModelError
from .paths import PathSample
from .traces import AFTrace, density_trace, maf_trace

logger = logging.getLogger(__name__)

NAKAO_ROUTES = ("definition", "explicit", "stieltjes")
DIRICHLET_VARIANTS = ("A", "Abar")


def _form(model: ChainModel, form: Optional[FormMatrices]) -> FormMatrices:
    return build_form(model) if form is None else form


def gamma_rhs(model: ChainModel, phiZ: JumpFunction) -> np.ndarray:
    """
    右端 b(x) = ½ μ_{⟨M^{e_x}+M^{e_x,κ}, Z⟩}(E)

    M^f+M^{f,κ} 的跳函数在 E×E 上为 f(y)−f(x)，在 (x,∂) 上为 −2f(x)（杀死跳计两次）
    """
    W = model.m[:, None] * model.q * phiZ.body
    return 0.5 * (W.sum(axis=0) - W.sum(axis=1)) - model.m * model.k * phiZ.boundary


def gamma_solve(model: ChainModel, phiZ: JumpFunction,
                form: Optional[FormMatrices] = None) -> np.ndarray:
    """
    求 w = γ(Z)：E1(w, e_x) = ½ μ_{⟨M^{e_x}+M^{e_x,κ}, Z⟩}(E) 对每个 x 成立

    Args:
        model: 链模型
        phiZ: Z 的跳函数
        form: 已构造的形式矩阵（可选）

    Returns:
        长度 n 的向量 w
    """
    form = _form(model, form)
    return form.solve_e1(gamma_rhs(model, phiZ))


def nakao_density(model: ChainModel, phiZ: JumpFunction,
                  form: Optional[FormMatrices] = None) -> np.ndarray:
    """Γ(Z) 的时间密度 Lw − w，w = γ(Z)"""
    form = _form(model, form)
    w = gamma_solve(model, phiZ, form)
    return form.L @ w - w


def nakao_trace(model: ChainModel, phiZ: JumpFunction, path: PathSample,
                form: Optional[FormMatrices] = None) -> AFTrace:
    """零能量连续加法泛函 Γ(Z)_t = ∫_0^t (Lw − w)(X_s) ds"""
    return density_trace(path, nakao_density(model, phiZ, form), kind="zero-energy")


def gamma_of_integral_explicit(model: ChainModel, g: Any, phi: JumpFunction) -> np.ndarray:
    """
    Γ(g∗M) 的密度的显式 Lévy 系统公式

    ½ Σ_y q(x,y)(g(x)φ(x,y) − g(y)φ(y,x)) + g(x)φ(x,∂)k(x)，在细致平衡下与 gamma_solve 路线一致

    Args:
        model: 链模型
        g: 状态函数
        phi: M 的跳函数

    Returns:
        长度 n 的密度向量
    """
    g = np.asarray(g, dtype=float)[: model.n]
    gphi = g[:, None] * phi.body
    return 0.5 * (model.q * (gphi - gphi.T)).sum(axis=1) + g * phi.boundary * model.k


def integral_bracket_density(model: ChainModel, f: Any, phiM: JumpFunction) -> np.ndarray:
    """
    ⟨M^{f,j}, M^j + K⟩ 的时间密度

    M^{f,j} 的跳为 f(y)−f(x)，M^j + K 在 E×E 上的跳为 −φ̄，故密度为
    Σ_y q(x,y)(f(y)−f(x))(−φ(y,x))
    """
    f = np.asarray(f, dtype=float)[: model.n]
    df = f[None, :] - f[:, None]
    return (model.q * df * -phiM.body.T).sum(axis=1)


def _checked_function(model: ChainModel, f: Any) -> np.ndarray:
    return model.extend(f)[: model.n]


def nakao_integral_density(model: ChainModel, f: Any, phiM: JumpFunction, route: str,
                           form: Optional[FormMatrices] = None) -> np.ndarray:
    """
    ∫f dΓ(M) 的时间密度

    Args:
        model: 链模型
        f: 状态函数，要求 f(∂)=0
        phiM: M 的跳函数
        route: definition | explicit | stieltjes
        form: 已构造的形式矩阵（可选）

    Returns:
        长度 n 的密度向量
    """
    f = _checked_function(model, f)
    if route == "definition":
        # Γ((f∘X_−)∗M) − ½⟨M^{f,j}, M^j + K⟩
        gamma_fm = nakao_density(model, phiM.weighted(f), form)
        return gamma_fm - 0.5 * integral_bracket_density(model, f, phiM)
    if route == "explicit":
        # ½N(1_{E×E}(φ−φ̄)) + φ(·,∂)k
        antisym = JumpFunction(phiM.body - phiM.body.T)
        return f * (0.5 * kernel_apply(model, antisym) + phiM.boundary * model.k)
    if route == "stieltjes":
        return f * nakao_density(model, phiM, form)
    raise ChainModelError(f"未知 Nakao 积分路线: {route}，可选 {NAKAO_ROUTES}")


def nakao_integral_trace(model: ChainModel, f: Any, phiM: JumpFunction, path: PathSample,
                         route: str = "definition",
                         form: Optional[FormMatrices] = None) -> AFTrace:
    """Nakao 积分 ∫_0^t f(X_s) dΓ(M)_s，三条路线逐路径一致"""
    if route == "stieltjes":
        f = _checked_function(model, f)
        gamma = nakao_trace(model, phiM, path, form)
        before = path.function_values(f, path.state_before(gamma.times))
        seg = path.function_values(f, path.segment_states())
        return gamma.weighted(before, seg, kind="zero-energy")
    density = nakao_integral_density(model, f, phiM, route, form)
    return density_trace(path, density, kind="zero-energy")


def dirichlet_trace(model: ChainModel, phiM: JumpFunction, path: PathSample,
                    variant: str = "A", ell: Optional[float] = None,
                    form: Optional[FormMatrices] = None) -> AFTrace:
    """
    Dirichlet 过程 A = M + Γ(M)，或 Ā = A + ½K

    Args:
        model: 链模型
        phiM: M 的跳函数
        path: 路径
        variant: "A" 或 "Abar"
        ell: 截断水平
        form: 已构造的形式矩阵（可选）

    Returns:
        dirichlet 类型的轨迹
    """
    if variant not in DIRICHLET_VARIANTS:
        raise ChainModelError(f"未知 Dirichlet 过程变体: {variant}")
    phi = phiM.truncate(ell)
    trace = maf_trace(model, phi, path) + nakao_trace(model, phi, path, form)
    if variant == "Abar":
        trace = trace + 0.5 * maf_trace(model, phi.reversal_kernel(), path)
    return trace.with_kind("dirichlet")
