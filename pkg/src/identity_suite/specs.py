"""
检查定义与残差报告
CheckSpec 描述一次检查（检查名、后端、模型、函数角色、路径数、观察期、容差）；
ResidualReport 汇总逐路径残差的最大值、均值、标准误与 z 分数；
SuiteEnvironment 按名称解析配置中的模型与函数
"""

import logging
import math
import traceback
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from ..finite_chain_core.model import ChainModel, random_symmetric_chain
from ..finite_chain_core.paths import make_rng, stream_seed
from ..levy_models.model import LevyModel
from ..levy_models.test_functions import TestFunction, make_test_function
from ..stochastic_calculus.phi_functions import PhiFunction, get_phi

logger = logging.getLogger(__name__)

BACKENDS = ("chain", "levy")
CHAIN_KINDS = ("chain", "random_chain")
LEVY_KINDS = ("stable", "radial")

# 逐路径检查的缺省容差与统计检查的缺省 z 上限
DEFAULT_TOLERANCE = 1e-9
DEFAULT_Z_MAX = 3.0

Model = Union[ChainModel, LevyModel]
FunctionLike = Union[np.ndarray, TestFunction, PhiFunction]


class SuiteError(Exception):
    """检查无法执行（引用缺失、后端不符等）"""
    pass


@dataclass(frozen=True)
class CheckSpec:
    """一次检查的完整描述"""

    name: str
    check: str
    backend: str
    model: str
    functions: Dict[str, str] = field(default_factory=dict)
    paths: int = 1000
    horizon: float = 1.0
    options: Dict[str, Any] = field(default_factory=dict)
    tolerance: float = DEFAULT_TOLERANCE
    z_max: float = DEFAULT_Z_MAX

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise SuiteError(f"{self.name}: 未知后端 {self.backend}")
        if not (self.tolerance > 0 and self.z_max > 0):
            raise SuiteError(f"{self.name}: 容差与 z 上限必须为正")
        if self.paths < 1 or not self.horizon > 0:
            raise SuiteError(f"{self.name}: 路径数与观察期必须为正")

    def option(self, key: str, default: Any = None) -> Any:
        return self.options.get(key, default)


@dataclass
class ResidualReport:
    """单个检查的残差统计"""

    name: str
    check: str
    backend: str
    n_paths: int
    max_resid: float = math.nan
    mean_resid: float = math.nan
    stderr: float = math.nan
    z: float = math.nan
    passed: bool = False
    seconds: Optional[float] = None
    error: Optional[Dict[str, Any]] = None
    details: Dict[str, Any] = field(default_factory=dict)

    def to_row(self, timings: bool = False) -> Dict[str, Any]:
        """CSV 行：name, backend, n_paths, max_resid, mean_resid, stderr, z, pass, seconds"""
        return {
            "name": self.name,
            "backend": self.backend,
            "n_paths": self.n_paths,
            "max_resid": self.max_resid,
            "mean_resid": self.mean_resid,
            "stderr": self.stderr,
            "z": self.z,
            "pass": self.passed,
            "seconds": round(self.seconds, 3) if timings and self.seconds is not None else None,
        }

    def to_dict(self, timings: bool = False) -> Dict[str, Any]:
        out = asdict(self)
        out["details"] = to_jsonable(self.details)
        for key in ("max_resid", "mean_resid", "stderr", "z"):
            out[key] = to_jsonable(out[key])
        if not timings:
            out["seconds"] = None
        return out


def to_jsonable(value: Any) -> Any:
    """numpy 标量/数组与非有限浮点数转成 JSON 可写的值"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


def format_error_message(error: Exception, include_traceback: bool = False) -> Dict[str, Any]:
    """
    格式化错误信息

    Args:
        error: 异常对象
        include_traceback: 是否包含堆栈跟踪

    Returns:
        格式化的错误信息字典
    """
    error_info = {
        "type": type(error).__name__,
        "message": str(error),
    }
    if include_traceback:
        error_info["traceback"] = traceback.format_exc()
    return error_info


# ---- 统计 ----

def mean_and_stderr(samples: Sequence[float]) -> tuple:
    """样本均值与标准误（样本数为 1 时标准误为 nan）"""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    mean = float(np.mean(x))
    stderr = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan
    return mean, stderr


def z_score(mean: float, stderr: float, expected: float = 0.0) -> float:
    """(mean − expected)/stderr；标准误为 0 时按差是否为 0 返回 0 或 inf"""
    gap = mean - expected
    if stderr == 0.0 or not math.isfinite(stderr):
        return 0.0 if gap == 0.0 else math.inf
    return gap / stderr


def pathwise_report(spec: CheckSpec, residuals: Sequence[float],
                    details: Optional[Dict[str, Any]] = None,
                    extra_ok: bool = True) -> ResidualReport:
    """
    逐路径检查：每条路径的残差都必须不超过容差

    Args:
        spec: 检查定义
        residuals: 每条路径（或每个实例）的 sup 残差
        details: 附加信息
        extra_ok: 附加判据（例如有限差分核对）

    Returns:
        ResidualReport
    """
    r = np.abs(np.asarray(residuals, dtype=float))
    mean, stderr = mean_and_stderr(r)
    max_resid = float(np.max(r)) if r.size else 0.0
    return ResidualReport(
        name=spec.name, check=spec.check, backend=spec.backend, n_paths=int(r.size),
        max_resid=max_resid, mean_resid=mean, stderr=stderr, z=math.nan,
        passed=bool(max_resid <= spec.tolerance and extra_ok and np.all(np.isfinite(r))),
        details=details or {},
    )


def statistical_report(spec: CheckSpec, samples: Sequence[float], expected: float = 0.0,
                       details: Optional[Dict[str, Any]] = None, max_resid: Optional[float] = None,
                       extra_ok: bool = True) -> ResidualReport:
    """
    统计检查：通过 ⇔ |z| ≤ z_max（且附加判据成立）

    Args:
        spec: 检查定义
        samples: 每条路径的统计量
        expected: 期望值
        details: 附加信息
        max_resid: 逐路径残差上界（缺省为 max|样本 − 期望|）
        extra_ok: 附加判据

    Returns:
        ResidualReport
    """
    x = np.asarray(samples, dtype=float)
    mean, stderr = mean_and_stderr(x)
    z = z_score(mean, stderr, expected)
    if max_resid is None:
        max_resid = float(np.max(np.abs(x - expected))) if x.size else 0.0
    return ResidualReport(
        name=spec.name, check=spec.check, backend=spec.backend, n_paths=int(x.size),
        max_resid=float(max_resid), mean_resid=mean - expected, stderr=stderr, z=z,
        passed=bool(abs(z) <= spec.z_max and extra_ok), details=details or {},
    )


def check_rng(root: int, spec: CheckSpec, index: int = 0) -> np.random.Generator:
    """检查专属的随机流：流名为检查名，新增检查不会扰动其他检查的路径"""
    return make_rng(stream_seed(root, spec.name, index))


# ---- 环境 ----

class SuiteEnvironment:
    """按名称解析模型与函数；解析结果按名称缓存"""

    def __init__(self, models: Dict[str, Dict[str, Any]], functions: Dict[str, Dict[str, Any]],
                 strict: bool = True):
        """
        Args:
            models: 模型名 → JSON 方言文档
            functions: 函数名 → JSON 方言文档
            strict: 链模型是否强制细致平衡
        """
        self.model_docs = models
        self.function_docs = functions
        self.strict = strict
        self._models: Dict[str, Model] = {}

    def model(self, ref: str) -> Model:
        if ref not in self._models:
            self._models[ref] = build_model(ref, self._doc(self.model_docs, ref, "模型"), self.strict)
        return self._models[ref]

    def chain(self, ref: str) -> ChainModel:
        model = self.model(ref)
        if not isinstance(model, ChainModel):
            raise SuiteError(f"模型 {ref} 不是链模型")
        return model

    def levy(self, ref: str) -> LevyModel:
        model = self.model(ref)
        if not isinstance(model, LevyModel):
            raise SuiteError(f"模型 {ref} 不是 Lévy 模型")
        return model

    def function(self, ref: str, model: Optional[Model] = None) -> FunctionLike:
        """链函数返回向量，Lévy 检验函数返回 TestFunction，Φ 返回 PhiFunction"""
        doc = self._doc(self.function_docs, ref, "函数")
        if "values" in doc:
            return np.asarray(doc["values"], dtype=float)
        if "phi" in doc:
            return get_phi(doc["phi"])
        if "test_function" in doc:
            alpha = model.alpha if isinstance(model, LevyModel) else None
            return make_test_function(doc, alpha)
        raise SuiteError(f"函数 {ref} 缺少 values / phi / test_function")

    def role(self, spec: CheckSpec, role: str, model: Optional[Model] = None,
             default: Any = None) -> Any:
        """检查定义中某个角色对应的函数；未配置时返回 default"""
        ref = spec.functions.get(role)
        if ref is None:
            if default is None:
                raise SuiteError(f"{spec.name}: 缺少函数角色 {role}")
            return default
        return self.function(ref, model)

    def roles(self, spec: CheckSpec, prefix: str, model: Optional[Model] = None) -> List[Any]:
        """以 prefix 开头的全部角色（u、u1、u2…），按角色名排序"""
        names = sorted(r for r in spec.functions if r.startswith(prefix))
        if not names:
            raise SuiteError(f"{spec.name}: 缺少函数角色 {prefix}")
        return [self.function(spec.functions[r], model) for r in names]

    @staticmethod
    def _doc(table: Dict[str, Dict[str, Any]], ref: str, what: str) -> Dict[str, Any]:
        if ref not in table:
            raise SuiteError(f"未定义的{what}: {ref}")
        return table[ref]


def build_model(name: str, doc: Dict[str, Any], strict: bool = True) -> Model:
    """
    由 JSON 方言构造模型

    Args:
        name: 模型名
        doc: kind 为 chain、random_chain、stable 或 radial 的文档
        strict: 链模型是否强制细致平衡

    Returns:
        ChainModel 或 LevyModel
    """
    kind = doc.get("kind")
    if kind == "chain":
        return ChainModel.from_dict(doc, name=name, strict=strict)
    if kind == "random_chain":
        return random_symmetric_chain(int(doc["n"]), make_rng(int(doc.get("seed", 0))),
                                      killing=bool(doc.get("killing", True)), name=name)
    if kind in LEVY_KINDS:
        return LevyModel.from_dict(doc, name=name)
    raise SuiteError(f"模型 {name}: 未知类型 {kind}")


def backend_of(doc: Dict[str, Any]) -> str:
    return "chain" if doc.get("kind") in CHAIN_KINDS else "levy"
