"""
收敛表
sigma-eps：截断尾部质量与小跳方差随 ε 的变化；
riemann：Riemann 和误差随网格加密的变化；
starred：Σ* 逐级截断和的稳定过程
"""

import logging
from typing import Any, Dict

import numpy as np
import pandas as pd

from ..finite_chain_core.jumps import JumpFunction
from ..finite_chain_core.model import ChainModel
from ..finite_chain_core.paths import simulate_chain_paths
from ..finite_chain_core.traces import maf_trace
from ..levy_models.model import LevyModel
from ..levy_models.quadrature import small_jump_error, tail_mass
from ..levy_models.sampler import TruncationPolicy, sample_levy_path
from ..stochastic_calculus.integrals import ito_integral, riemann_approx
from ..stochastic_calculus.starred import TruncationSchedule, jump_representation, starred_sum
from .chain_checks import events_separated
from .specs import SuiteEnvironment, SuiteError

logger = logging.getLogger(__name__)

TABLE_KINDS = ("sigma-eps", "riemann", "starred")

DEFAULT_EPSILONS = (0.1, 0.05, 0.025)
DEFAULT_MESHES = (16, 64, 256)


def sigma_eps_table(model: LevyModel, epsilons: Any = DEFAULT_EPSILONS) -> pd.DataFrame:
    """
    λ(ε) 与 σ²(ε) 的表；α-稳定模型附闭式 σ²(ε) = |S^{N−1}|·A·ε^{2−α}/(2−α)

    Args:
        model: Lévy 模型
        epsilons: 截断半径列表

    Returns:
        DataFrame（epsilon, tail_mass, sigma2, closed_form）
    """
    rows = []
    for eps in epsilons:
        row = {"epsilon": float(eps), "tail_mass": tail_mass(model, eps),
               "sigma2": small_jump_error(model, eps)}
        if model.is_stable:
            a = model.alpha
            row["closed_form"] = model.sphere * model.A_const * eps ** (2.0 - a) / (2.0 - a)
        rows.append(row)
    return pd.DataFrame(rows)


def riemann_table(model: ChainModel, f: np.ndarray, phi: JumpFunction, n_paths: int, T: float,
                  rng: np.random.Generator, meshes: Any = DEFAULT_MESHES) -> pd.DataFrame:
    """
    每个网格的 sup|riemann_approx − ito_integral| 统计

    Args:
        model: 链模型
        f: 被积函数（f(∂)=0）
        phi: 积分子 M 的跳函数
        n_paths: 路径数
        T: 观察期
        rng: 随机数生成器
        meshes: 网格单元数列表

    Returns:
        DataFrame（mesh, median_error, mean_error, max_error, not_worse_fraction,
        separated_variation：最粗网格下事件分离路径上误差全变差的均值）
    """
    meshes = [int(n) for n in meshes]
    starts = np.arange(n_paths) % model.n
    errors, variations = [], []
    for path in simulate_chain_paths(model, starts, T, rng):
        M = maf_trace(model, phi, path)
        ito = ito_integral(f, M, path)
        gaps = [riemann_approx(f, M, path, n) - ito for n in meshes]
        errors.append([gap.sup_norm() for gap in gaps])
        if events_separated(path, meshes[0]):
            variations.append([gap.total_variation() for gap in gaps])
    errors = np.asarray(errors).reshape(len(starts), len(meshes))
    variations = np.asarray(variations).reshape(-1, len(meshes))

    not_worse = np.ones(len(meshes))
    not_worse[1:] = np.mean(errors[:, 1:] <= errors[:, :-1], axis=0)
    return pd.DataFrame({
        "mesh": meshes,
        "median_error": np.median(errors, axis=0),
        "mean_error": np.mean(errors, axis=0),
        "max_error": np.max(errors, axis=0),
        "not_worse_fraction": not_worse,
        "separated_variation": variations.mean(axis=0) if variations.size else np.full(len(meshes), np.nan),
    })


def starred_table(env: SuiteEnvironment, doc: Dict[str, Any], rng: np.random.Generator) -> pd.DataFrame:
    """
    单条路径上 Σ* 的逐级表，从首级到首个稳定级

    链：jump_representation 的截断报告；Lévy：φ_u(x,y) = u(y) − u(x) 的截断和，
    δ_stab 由 σ(ε)、‖u‖_∞ 与跳数确定
    """
    model = env.model(doc["model"])
    T = float(doc.get("horizon", 1.0))
    functions = doc.get("functions", {})
    if isinstance(model, ChainModel):
        u = model.extend(env.function(functions["u"], model))[: model.n]
        path = simulate_chain_paths(model, [int(doc.get("x0", 0))], T, rng)[0]
        _, report = jump_representation(path, JumpFunction.from_function(u), "ito")
    else:
        u = env.function(functions["u"], model)
        epsilon = float(doc.get("epsilon", 1e-3))
        x0 = np.zeros(model.dim)
        path = sample_levy_path(model, x0, T, TruncationPolicy(epsilon), rng)
        visited = path.function_values(u, path.state_at(path.breakpoints))
        schedule = TruncationSchedule.for_levy(model, epsilon, float(np.max(np.abs(visited))),
                                               path.n_events)
        _, report = starred_sum("none", None, lambda x, y: u(y) - u(x), path, schedule)
    rows = report.rows()
    if not rows:
        raise SuiteError("Σ* 表为空")
    return pd.DataFrame(rows).assign(converged=report.converged, tolerance=report.tolerance)


def build_table(env: SuiteEnvironment, doc: Dict[str, Any], rng: np.random.Generator) -> pd.DataFrame:
    """按 doc["kind"] 生成一张表"""
    kind = doc.get("kind")
    if kind == "sigma-eps":
        return sigma_eps_table(env.levy(doc["model"]), doc.get("epsilons", DEFAULT_EPSILONS))
    if kind == "riemann":
        model = env.chain(doc["model"])
        functions = doc.get("functions", {})
        f = model.extend(env.function(functions["f"], model))[: model.n]
        u = model.extend(env.function(functions["u"], model))[: model.n]
        return riemann_table(model, f, JumpFunction.from_function(u), int(doc.get("paths", 200)),
                             float(doc.get("horizon", 1.0)), rng, doc.get("meshes", DEFAULT_MESHES))
    if kind == "starred":
        return starred_table(env, doc, rng)
    raise SuiteError(f"未知表类型: {kind}，可选 {TABLE_KINDS}")
