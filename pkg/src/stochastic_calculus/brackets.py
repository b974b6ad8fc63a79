"""
平方括号与尖括号
[M,N]_t = ⟨M^c,N^c⟩_t + Σ ΔM_sΔN_s；⟨M_φ,M_ψ⟩_t = ∫_0^t N(φψ)(X_s) ds，
其中 N(φψ) 由 CompensatorEvaluator 按后端给出（链上为速率和，Lévy 上为核求积）
"""

import logging
from typing import Any, Callable, Optional, Union

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..finite_chain_core.jumps import JumpFunction, kernel_apply
from ..finite_chain_core.model import ChainModel
from ..finite_chain_core.paths import PathSample
from ..finite_chain_core.traces import AFTrace, TraceMismatchError, rate_trace
from ..levy_models.model import QUAD_RTOL, LevyModel
from ..levy_models.quadrature import kernel_integral

logger = logging.getLogger(__name__)

# 径向表格化时 |x| 方向的节点数
RADIAL_COMPENSATOR_KNOTS = 257

JumpMap = Union[JumpFunction, Callable[[np.ndarray, np.ndarray], np.ndarray]]


class CompensatorEvaluator:
    """x ↦ N(φψ)(x) 的求值器"""

    def __init__(self, model: Union[ChainModel, LevyModel], epsilon: float = 0.0,
                 rtol: float = QUAD_RTOL, knots: int = RADIAL_COMPENSATOR_KNOTS):
        """
        Args:
            model: 链模型或 Lévy 模型
            epsilon: Lévy 核的内截断半径（截断过程的 Lévy 系统只含 |h| > ε 的跳）
            rtol: 求积相对容差
            knots: 径向表格的节点数
        """
        self.model = model
        self.epsilon = float(epsilon)
        self.rtol = rtol
        self.knots = knots
        self.is_chain = isinstance(model, ChainModel)

    def density(self, phi: JumpMap, psi: Optional[JumpMap] = None,
                states: Optional[np.ndarray] = None, radial: bool = False,
                points: Optional[list] = None) -> np.ndarray:
        """
        N(φψ) 在给定状态上的值

        Args:
            phi: 跳函数（链为 JumpFunction，Lévy 为 ψ(x, y) 可调用对象）
            psi: 第二个跳函数，缺省表示只求 N(φ)
            states: 链上可省略（返回长度 n 的向量）；Lévy 上为 (S, N) 位置数组
            radial: φψ 与 ν 都旋转不变时按 |x| 表格化
            points: 径向断点

        Returns:
            数组
        """
        if self.is_chain:
            product = phi if psi is None else phi.product(psi)
            values = kernel_apply(self.model, product)
            if states is None:
                return values
            return np.append(values, 0.0)[np.asarray(states, dtype=int)]

        func = phi if psi is None else (lambda x, y: phi(x, y) * psi(x, y))
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if radial:
            return self._radial_table(func, np.linalg.norm(states, axis=1), points)
        unique, inverse = np.unique(states, axis=0, return_inverse=True)
        values = np.array([self._integral(func, x, points) for x in unique])
        return values[np.ravel(inverse)]

    def _integral(self, func: Callable, x: np.ndarray, points: Optional[list]) -> float:
        return kernel_integral(self.model, func, x, epsilon=self.epsilon,
                               points=points, rtol=self.rtol)

    def _radial_table(self, func: Callable, radii: np.ndarray,
                      points: Optional[list]) -> np.ndarray:
        """在 [0, max|x|] 上按平方分布取节点，单调三次插值"""
        top = float(np.max(radii, initial=0.0))
        if top == 0.0:
            value = self._integral(func, np.zeros(self.model.dim), points)
            return np.full(radii.shape, value)
        knots = top * np.linspace(0.0, 1.0, self.knots) ** 2
        axis = np.zeros(self.model.dim)
        table = []
        for r in knots:
            axis[0] = r
            breaks = sorted(set(points or []) | ({float(r)} if r > 0 else set()))
            table.append(self._integral(func, axis.copy(), breaks))
        return PchipInterpolator(knots, np.array(table))(radii)


def square_bracket(M: AFTrace, N: AFTrace, path: Optional[PathSample] = None,
                   continuous: Optional[AFTrace] = None) -> AFTrace:
    """
    [M,N]_t = ⟨M^c,N^c⟩_t + Σ_{s≤t} ΔM_sΔN_s

    Args:
        M, N: 同一路径上的轨迹
        path: 路径（可选，用于核对断点）
        continuous: 连续部分的协变差轨迹，链上缺省为 0

    Returns:
        bracket 类型的轨迹
    """
    M.check_compatible(N)
    if path is not None and not np.array_equal(path.breakpoints, M.times):
        raise TraceMismatchError("轨迹的断点与路径不一致")
    jumps = M.jumps * N.jumps
    trace = AFTrace.from_parts(M.times, jumps, np.zeros(M.times.size - 1), "bracket")
    if continuous is not None:
        trace = (trace + continuous).with_kind("bracket")
    return trace


def angle_bracket(ev: CompensatorEvaluator, phi: JumpMap, psi: Optional[JumpMap],
                  path: PathSample, **kwargs: Any) -> AFTrace:
    """
    ⟨M_φ, M_ψ⟩_t = ∫_0^t N(φψ)(X_s) ds

    链上精确；Lévy 上由核求积给出被积函数，在各断点区间左端取值

    Args:
        ev: 与路径后端一致的求值器
        phi, psi: 跳函数
        path: 路径
        **kwargs: 传给 ev.density 的 radial、points

    Returns:
        bracket 类型的轨迹
    """
    if ev.is_chain != path.is_chain:
        raise TraceMismatchError("求值器后端与路径不一致")
    states = path.segment_states()
    if ev.is_chain:
        rates = ev.density(phi, psi, states=states)
    else:
        rates = ev.density(phi, psi, states=states, **kwargs)
    return rate_trace(path, rates, kind="bracket")

