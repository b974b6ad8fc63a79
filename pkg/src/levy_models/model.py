"""
对称纯跳 Lévy 过程模型
α-稳定情形的 Lévy 密度为 A(N,−α)|h|^{−N−α}；一般情形由表格化的径向密度 f(r) 给出
"""

import json
import logging
import math
import warnings
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Union

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma as gamma_fn

logger = logging.getLogger(__name__)

# 求积的相对容差
QUAD_RTOL = 1e-8

# 对数半径 s = log r 上直接求积的窗口；窗口外按幂律尾部解析补齐
LOG_RADIUS_RANGE = (-120.0, 120.0)


class LevyModelError(Exception):
    """Lévy 模型相关错误"""
    pass


class QuadratureError(LevyModelError):
    """求积未收敛"""

    def __init__(self, message: str, achieved: float = math.nan):
        super().__init__(f"{message}（达到的相对容差 {achieved:.2e}）")
        self.achieved = achieved


class KernelDivergenceError(LevyModelError):
    """核积分在 0 附近不可积"""
    pass


def stable_constant(dim: int, alpha: float) -> float:
    """A(N,−α) = α Γ((N+α)/2) / (2^{1−α} π^{N/2} Γ(1−α/2))"""
    return alpha * gamma_fn((dim + alpha) / 2.0) / (
        2.0 ** (1.0 - alpha) * math.pi ** (dim / 2.0) * gamma_fn(1.0 - alpha / 2.0)
    )


def sphere_area(dim: int) -> float:
    """单位球面 S^{N−1} 的面积 2π^{N/2}/Γ(N/2)；N=1 时为 2（两个方向）"""
    return 2.0 * math.pi ** (dim / 2.0) / gamma_fn(dim / 2.0)


def checked_quad(func: Callable[[float], float], a: float, b: float,
                 rtol: float = QUAD_RTOL, atol: float = 1e-14, what: str = "积分",
                 **kwargs: Any) -> float:
    """
    scipy quad 的包装：出现 IntegrationWarning 且误差估计超出容差时抛出 QuadratureError

    Args:
        func: 被积函数
        a, b: 积分限（可为 ±inf）
        rtol: 相对容差
        atol: 绝对容差
        what: 错误信息中的积分名称
    """
    kwargs.setdefault("limit", 200)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        value, abserr = quad(func, a, b, epsabs=atol, epsrel=rtol, **kwargs)[:2]
    achieved = abserr / abs(value) if value != 0 else abserr
    if caught and abserr > max(rtol * abs(value), atol) * 10:
        raise QuadratureError(f"{what}未收敛: {caught[0].message}", achieved)
    return float(value)


def power_tail(func: Callable[[float], float], edge: float, step: float, what: str = "积分") -> float:
    """
    对数变量下窗口外的尾部积分，按 func 在 edge 之外几何衰减（即 r 上的幂律）计算

    Args:
        func: s = log r 上的被积函数
        edge: 窗口边界
        step: 向外的方向与步长（-1 为 r→0 一侧，+1 为 r→∞ 一侧）
        what: 错误信息中的积分名称

    Returns:
        ∫ func(s) ds，积分区间为 edge 向外到无穷
    """
    inner = func(edge)
    if inner == 0.0:
        return 0.0
    outer = func(edge + step)
    if outer == 0.0:
        return 0.0
    rate = math.log(inner / outer) / abs(step)
    if not rate > 0.0:
        raise QuadratureError(f"{what}发散: 被积函数在 s={edge + step:g} 之外不衰减", math.inf)
    return inner / rate


class LevyModel:
    """R^N 上旋转对称的纯跳 Lévy 过程"""

    def __init__(self, dim: int, alpha: Optional[float] = None,
                 radial_density: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 name: str = "levy"):
        """
        Args:
            dim: 维数 N ≥ 1
            alpha: 稳定指数 α ∈ (0,2)；与 radial_density 二选一
            radial_density: 径向 Lévy 密度 f(r)
            name: 模型名称
        """
        if int(dim) < 1:
            raise LevyModelError(f"维数必须 ≥ 1，实际 {dim}")
        if (alpha is None) == (radial_density is None):
            raise LevyModelError("alpha 与 radial_density 必须且只能给出一个")
        if alpha is not None and not 0.0 < alpha < 2.0:
            raise LevyModelError(f"稳定指数必须在 (0,2) 内，实际 {alpha}")

        self.dim = int(dim)
        self.alpha = None if alpha is None else float(alpha)
        self._radial = radial_density
        self.name = name
        self.sphere = sphere_area(self.dim)
        self.A_const = stable_constant(self.dim, self.alpha) if self.is_stable else math.nan
        self.tail_condition = True

        if not self.is_stable:
            self._check_integrability()

    @property
    def is_stable(self) -> bool:
        return self.alpha is not None

    def density(self, r: Any) -> np.ndarray:
        """径向 Lévy 密度 f(r)，r > 0"""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise LevyModelError("Lévy 密度只在 r > 0 上定义")
        if self.is_stable:
            return self.A_const * r ** (-self.dim - self.alpha)
        return np.asarray(self._radial(r), dtype=float)

    def radial_integral(self, power: float, lo: float, hi: float) -> float:
        """
        σ_{N−1} ∫_lo^hi r^power f(r) r^{N−1} dr

        α-稳定模型用闭式（发散时返回 inf）；其余在对数变量 s = log r 的有限窗口上求积，
        lo=0 与 hi=∞ 时窗口外的部分由 power_tail 补齐
        """
        if self.is_stable:
            exponent = power - self.alpha
            if lo == 0.0 and exponent <= 0 or math.isinf(hi) and exponent >= 0:
                return math.inf
            upper = 0.0 if math.isinf(hi) else hi ** exponent
            lower = 0.0 if lo == 0.0 else lo ** exponent
            return self.sphere * self.A_const * (upper - lower) / exponent

        def integrand(s: float) -> float:
            r = math.exp(s)
            return float(self.density(r)) * r ** (power + self.dim)

        what = f"{self.name} 径向积分"
        s_lo = math.log(lo) if lo > 0.0 else None
        s_hi = math.log(hi) if math.isfinite(hi) else None
        tails = 0.0
        if s_lo is None:
            s_lo = LOG_RADIUS_RANGE[0] if s_hi is None else min(LOG_RADIUS_RANGE[0], s_hi)
            tails += power_tail(integrand, s_lo, -1.0, what)
        if s_hi is None:
            s_hi = max(LOG_RADIUS_RANGE[1], s_lo)
            tails += power_tail(integrand, s_hi, 1.0, what)
        if s_hi <= s_lo:
            return self.sphere * tails
        return self.sphere * (checked_quad(integrand, s_lo, s_hi, what=what) + tails)

    def _check_integrability(self):
        """∫(|h|²∧1)ν(dh) < ∞，并记录尾部条件 ∫_1^∞ f(r)r^{N+1}dr < ∞"""
        try:
            near = self.radial_integral(2.0, 0.0, 1.0)
            far = self.radial_integral(0.0, 1.0, math.inf)
        except QuadratureError as e:
            raise LevyModelError(f"{self.name}: Lévy 测度不可积 ({e})") from e
        if not (math.isfinite(near) and math.isfinite(far)):
            raise LevyModelError(f"{self.name}: ∫(|h|²∧1)ν(dh) 发散")
        try:
            self.tail_condition = math.isfinite(self.radial_integral(2.0, 1.0, math.inf))
        except QuadratureError:
            self.tail_condition = False
        logger.info(f"{self.name}: 径向 Lévy 测度可积，尾部条件 {'成立' if self.tail_condition else '不成立'}")

    @classmethod
    def from_dict(cls, doc: Dict[str, Any], name: str = "levy") -> "LevyModel":
        """
        从 JSON 方言构建

        {"kind": "stable", "dim": N, "alpha": α} 或
        {"kind": "radial", "dim": N, "r": [...], "f": [...]}（对数-对数单调插值，两端按幂律外推）
        """
        kind = doc.get("kind")
        dim = int(doc.get("dim", 1))
        if kind == "stable":
            return cls(dim, alpha=float(doc["alpha"]), name=name)
        if kind == "radial":
            return cls(dim, radial_density=tabulated_density(doc["r"], doc["f"]), name=name)
        raise LevyModelError(f"未知 Lévy 模型类型: {kind}")

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "LevyModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), name=Path(path).stem)

    def __repr__(self) -> str:
        spec = f"alpha={self.alpha}" if self.is_stable else "radial"
        return f"LevyModel(name={self.name!r}, dim={self.dim}, {spec})"


def tabulated_density(r: Sequence[float], f: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    """
    表格化径向密度：log f 对 log r 做单调三次插值，表外按端点斜率做幂律外推

    Args:
        r: 严格递增的正半径
        f: 对应的正密度值
    """
    log_r = np.log(np.asarray(r, dtype=float))
    log_f = np.log(np.asarray(f, dtype=float))
    if log_r.size < 2 or np.any(np.diff(log_r) <= 0):
        raise LevyModelError("径向密度的 r 必须严格递增且至少两个点")
    interp = PchipInterpolator(log_r, log_f, extrapolate=False)
    slope_lo = (log_f[1] - log_f[0]) / (log_r[1] - log_r[0])
    slope_hi = (log_f[-1] - log_f[-2]) / (log_r[-1] - log_r[-2])

    def density(radius: np.ndarray) -> np.ndarray:
        s = np.log(np.asarray(radius, dtype=float))
        inside = interp(np.clip(s, log_r[0], log_r[-1]))
        out = np.where(s < log_r[0], log_f[0] + slope_lo * (s - log_r[0]),
                       np.where(s > log_r[-1], log_f[-1] + slope_hi * (s - log_r[-1]), inside))
        return np.exp(out)

    return density


def levy_density(model: LevyModel, r: float) -> float:
    """径向 Lévy 密度在 r 处的值；r ≤ 0 时报错"""
    if r <= 0:
        raise LevyModelError(f"半径必须为正，实际 r={r}")
    return float(model.density(r))
