"""
运行配置解析
JSON 文档 → RunConfig；严格模式拒绝未知键，全部错误附 JSON Pointer 位置，
细致平衡违规在解析期报告并指名状态对
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from ..finite_chain_core.model import ChainModel, ChainModelError
from ..identity_suite.runner import CHECKS
from ..identity_suite.specs import (
    BACKENDS,
    CHAIN_KINDS,
    DEFAULT_TOLERANCE,
    DEFAULT_Z_MAX,
    LEVY_KINDS,
    CheckSpec,
    backend_of,
)
from ..identity_suite.tables import TABLE_KINDS
from ..levy_models.model import LevyModel, LevyModelError
from ..levy_models.test_functions import OUTER_FUNCTIONS, TEST_FUNCTION_NAMES
from ..stochastic_calculus.phi_functions import PHI_REGISTRY
from . import settings

logger = logging.getLogger(__name__)

TOP_KEYS = {"seed", "defaults", "models", "functions", "suite", "tables", "output"}
DEFAULT_KEYS = {"horizon", "paths"}
MODEL_KEYS = {
    "chain": {"kind", "states", "m", "q", "k"},
    "random_chain": {"kind", "n", "seed", "killing"},
    "stable": {"kind", "dim", "alpha"},
    "radial": {"kind", "dim", "r", "f"},
}
FUNCTION_KEYS = {
    "values": {"values"},
    "phi": {"phi"},
    "test_function": {"test_function", "F", "beta"},
}
CHECK_KEYS = {"name", "check", "backend", "model", "functions", "paths", "horizon", "options",
              "tolerance", "z_max"}
TABLE_KEYS = {"kind", "model", "functions", "epsilons", "meshes", "paths", "horizon", "epsilon", "x0"}
OUTPUT_KEYS = {"dir", "csv", "json"}


class ConfigError(Exception):
    """配置错误，携带 (JSON Pointer, 消息) 列表"""

    def __init__(self, errors: List[Tuple[str, str]]):
        self.errors = list(errors)
        super().__init__("\n".join(f"{pointer or '/'}: {message}" for pointer, message in self.errors))


@dataclass
class RunConfig:
    """校验通过的运行配置"""

    seed: int
    horizon: float
    paths: int
    models: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    functions: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    suite: List[CheckSpec] = field(default_factory=list)
    tables: List[Dict[str, Any]] = field(default_factory=list)
    output: Dict[str, str] = field(default_factory=dict)
    strict: bool = True
    warnings: List[Tuple[str, str]] = field(default_factory=list)


def pointer(*parts: Any) -> str:
    """RFC 6901 JSON Pointer"""
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in parts)


class _Collector:
    """收集错误与告警；非严格模式下未知键与细致平衡违规降级为告警"""

    def __init__(self, strict: bool):
        self.strict = strict
        self.errors: List[Tuple[str, str]] = []
        self.warnings: List[Tuple[str, str]] = []

    def error(self, where: str, message: str):
        self.errors.append((where, message))

    def soft(self, where: str, message: str):
        if self.strict:
            self.error(where, message)
        else:
            self.warnings.append((where, message))
            logger.warning(f"{where}: {message}")

    def keys(self, doc: Dict[str, Any], allowed: set, *where: Any):
        for key in sorted(set(doc) - allowed):
            self.soft(pointer(*where, key), f"未知键 {key!r}")


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _chain_size(doc: Dict[str, Any]) -> Optional[int]:
    if doc.get("kind") == "chain" and isinstance(doc.get("m"), list):
        return len(doc["m"])
    if doc.get("kind") == "random_chain" and _is_int(doc.get("n")):
        return doc["n"]
    return None


def _check_model(name: str, doc: Any, out: _Collector):
    where = ("models", name)
    if not isinstance(doc, dict):
        out.error(pointer(*where), "模型必须是对象")
        return
    kind = doc.get("kind")
    if kind not in MODEL_KEYS:
        out.error(pointer(*where, "kind"), f"未知模型类型 {kind!r}，可选 {sorted(MODEL_KEYS)}")
        return
    out.keys(doc, MODEL_KEYS[kind], *where)

    if kind == "chain":
        try:
            model = ChainModel.from_dict(doc, name=name, strict=False)
        except ChainModelError as e:
            out.error(pointer(*where), str(e))
            return
        violations = model.balance_violations()
        if violations:
            pairs = ", ".join(f"({x}, {y})" for x, y in violations)
            out.soft(pointer(*where, "q"), f"细致平衡 m(x)q(x,y) = m(y)q(y,x) 不成立，状态对: {pairs}")
    elif kind == "random_chain":
        if not (_is_int(doc.get("n")) and doc["n"] >= 2):
            out.error(pointer(*where, "n"), "n 必须是 ≥ 2 的整数")
        if "seed" in doc and not _is_int(doc["seed"]):
            out.error(pointer(*where, "seed"), "seed 必须是整数")
    else:
        try:
            LevyModel.from_dict(doc, name=name)
        except (LevyModelError, KeyError, TypeError, ValueError) as e:
            out.error(pointer(*where), f"Lévy 模型无效: {e}")


def _check_function(name: str, doc: Any, out: _Collector):
    where = ("functions", name)
    if not isinstance(doc, dict):
        out.error(pointer(*where), "函数必须是对象")
        return
    kinds = [k for k in FUNCTION_KEYS if k in doc]
    if len(kinds) != 1:
        out.error(pointer(*where), "必须且只能给出 values、phi、test_function 之一")
        return
    kind = kinds[0]
    out.keys(doc, FUNCTION_KEYS[kind], *where)
    if kind == "values":
        values = doc["values"]
        if not (isinstance(values, list) and values and all(_is_number(v) for v in values)):
            out.error(pointer(*where, "values"), "values 必须是非空数值列表")
    elif kind == "phi" and doc["phi"] not in PHI_REGISTRY:
        out.error(pointer(*where, "phi"), f"未知 Φ {doc['phi']!r}，可选 {sorted(PHI_REGISTRY)}")
    elif kind == "test_function":
        if doc["test_function"] not in TEST_FUNCTION_NAMES:
            out.error(pointer(*where, "test_function"),
                      f"未知检验函数 {doc['test_function']!r}，可选 {list(TEST_FUNCTION_NAMES)}")
        if "F" in doc and doc["F"] not in OUTER_FUNCTIONS:
            out.error(pointer(*where, "F"), f"未知外层函数 {doc['F']!r}，可选 {list(OUTER_FUNCTIONS)}")
        if "beta" in doc and not _is_number(doc["beta"]):
            out.error(pointer(*where, "beta"), "beta 必须是数值")


def _check_references(refs: Any, models: Dict[str, Any], functions: Dict[str, Any],
                      model_ref: Any, out: _Collector, *where: Any):
    if not isinstance(refs, dict):
        out.error(pointer(*where), "functions 必须是 角色 → 函数名 的对象")
        return
    size = _chain_size(models.get(model_ref, {})) if isinstance(model_ref, str) else None
    for role, ref in refs.items():
        if ref not in functions:
            out.error(pointer(*where, role), f"未定义的函数 {ref!r}")
            continue
        values = functions[ref].get("values") if isinstance(functions[ref], dict) else None
        if size is not None and isinstance(values, list) and len(values) not in (size, size + 1):
            out.error(pointer(*where, role), f"函数 {ref!r} 长度 {len(values)} 与模型状态数 {size} 不符")


def _check_spec(index: int, doc: Any, cfg: Dict[str, Any], out: _Collector,
                names: set) -> Optional[CheckSpec]:
    where = ("suite", index)
    if not isinstance(doc, dict):
        out.error(pointer(*where), "检查项必须是对象")
        return None
    out.keys(doc, CHECK_KEYS, *where)
    before = len(out.errors)

    name = doc.get("name")
    if not isinstance(name, str) or not name:
        out.error(pointer(*where, "name"), "name 必须是非空字符串")
    elif name in names:
        out.error(pointer(*where, "name"), f"检查名 {name!r} 重复")
    names.add(name)

    check = doc.get("check")
    if check not in CHECKS:
        out.error(pointer(*where, "check"), f"未知检查 {check!r}，可选 {sorted(CHECKS)}")

    models = cfg["models"]
    model_ref = doc.get("model")
    if model_ref not in models:
        out.error(pointer(*where, "model"), f"未定义的模型 {model_ref!r}")
        backend = doc.get("backend")
    else:
        backend = doc.get("backend", backend_of(models[model_ref]))
        if backend != backend_of(models[model_ref]):
            out.error(pointer(*where, "backend"), f"后端 {backend!r} 与模型 {model_ref!r} 的类型不符")
    if backend not in BACKENDS:
        out.error(pointer(*where, "backend"), f"未知后端 {backend!r}")
    elif check in CHECKS and backend not in CHECKS[check]:
        out.error(pointer(*where, "backend"), f"检查 {check} 不支持后端 {backend}")

    _check_references(doc.get("functions", {}), models, cfg["functions"], model_ref, out,
                      *where, "functions")

    for key, default in (("paths", cfg["paths"]), ("horizon", cfg["horizon"]),
                         ("tolerance", DEFAULT_TOLERANCE), ("z_max", DEFAULT_Z_MAX)):
        value = doc.get(key, default)
        valid = _is_int(value) if key == "paths" else _is_number(value)
        if not (valid and value > 0):
            out.error(pointer(*where, key), f"{key} 必须为正{'整数' if key == 'paths' else '数'}")
    options = doc.get("options", {})
    if not isinstance(options, dict):
        out.error(pointer(*where, "options"), "options 必须是对象")

    if len(out.errors) > before:
        return None
    options = dict(options)
    if check == "nakao_dual":
        options.setdefault("t0", settings.RICHARDSON_T0)
        options.setdefault("levels", settings.RICHARDSON_LEVELS)
    return CheckSpec(
        name=name, check=check, backend=backend, model=model_ref,
        functions=dict(doc.get("functions", {})),
        paths=doc.get("paths", cfg["paths"]), horizon=float(doc.get("horizon", cfg["horizon"])),
        options=options, tolerance=float(doc.get("tolerance", DEFAULT_TOLERANCE)),
        z_max=float(doc.get("z_max", DEFAULT_Z_MAX)),
    )


def _check_table(index: int, doc: Any, cfg: Dict[str, Any], out: _Collector):
    where = ("tables", index)
    if not isinstance(doc, dict):
        out.error(pointer(*where), "表必须是对象")
        return
    out.keys(doc, TABLE_KEYS, *where)
    if doc.get("kind") not in TABLE_KINDS:
        out.error(pointer(*where, "kind"), f"未知表类型 {doc.get('kind')!r}，可选 {list(TABLE_KINDS)}")
    model_ref = doc.get("model")
    if model_ref not in cfg["models"]:
        out.error(pointer(*where, "model"), f"未定义的模型 {model_ref!r}")
        return
    kind = cfg["models"][model_ref].get("kind")
    if doc.get("kind") == "sigma-eps" and kind not in LEVY_KINDS:
        out.error(pointer(*where, "model"), "sigma-eps 表需要 Lévy 模型")
    if doc.get("kind") == "riemann" and kind not in CHAIN_KINDS:
        out.error(pointer(*where, "model"), "riemann 表需要链模型")
    _check_references(doc.get("functions", {}), cfg["models"], cfg["functions"], model_ref, out,
                      *where, "functions")


def parse_config(document: Union[str, Dict[str, Any]], strict: bool = True) -> RunConfig:
    """
    解析并校验运行配置

    Args:
        document: JSON 文本或已解析的字典
        strict: 严格模式（拒绝未知键与不满足细致平衡的链）

    Returns:
        RunConfig（缺省值已填充：T=DEFAULT_HORIZON，路径数=DEFAULT_PATHS）

    Raises:
        ConfigError: 全部错误及其 JSON Pointer
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise ConfigError([("", f"JSON 格式错误: {e}")]) from e
    if not isinstance(document, dict):
        raise ConfigError([("", "配置文档必须是 JSON 对象")])

    out = _Collector(strict)
    out.keys(document, TOP_KEYS)

    seed = document.get("seed")
    if not (_is_int(seed) and seed >= 0):
        out.error(pointer("seed"), "必须给出非负整数 seed")

    defaults = document.get("defaults", {})
    if not isinstance(defaults, dict):
        out.error(pointer("defaults"), "defaults 必须是对象")
        defaults = {}
    out.keys(defaults, DEFAULT_KEYS, "defaults")
    horizon = defaults.get("horizon", settings.DEFAULT_HORIZON)
    paths = defaults.get("paths", settings.DEFAULT_PATHS)
    if not (_is_number(horizon) and horizon > 0):
        out.error(pointer("defaults", "horizon"), "horizon 必须为正数")
    if not (_is_int(paths) and paths > 0):
        out.error(pointer("defaults", "paths"), "paths 必须为正整数")

    cfg: Dict[str, Any] = {"horizon": horizon, "paths": paths}
    for section in ("models", "functions"):
        value = document.get(section, {})
        if not isinstance(value, dict):
            out.error(pointer(section), f"{section} 必须是对象")
            value = {}
        cfg[section] = value
    for name, doc in cfg["models"].items():
        _check_model(name, doc, out)
    for name, doc in cfg["functions"].items():
        _check_function(name, doc, out)

    suite, names = [], set()
    raw_suite = document.get("suite", [])
    if not isinstance(raw_suite, list):
        out.error(pointer("suite"), "suite 必须是列表")
        raw_suite = []
    for i, doc in enumerate(raw_suite):
        spec = _check_spec(i, doc, cfg, out, names)
        if spec is not None:
            suite.append(spec)

    tables = document.get("tables", [])
    if not isinstance(tables, list):
        out.error(pointer("tables"), "tables 必须是列表")
        tables = []
    for i, doc in enumerate(tables):
        _check_table(i, doc, cfg, out)

    output = document.get("output", {})
    if not isinstance(output, dict):
        out.error(pointer("output"), "output 必须是对象")
        output = {}
    out.keys(output, OUTPUT_KEYS, "output")

    if out.errors:
        raise ConfigError(out.errors)
    return RunConfig(
        seed=int(seed), horizon=float(horizon), paths=int(paths),
        models=cfg["models"], functions=cfg["functions"], suite=suite, tables=list(tables),
        output={"dir": output.get("dir", settings.DEFAULT_OUT_DIR),
                "csv": output.get("csv", "report.csv"),
                "json": output.get("json", "report.json")},
        strict=strict, warnings=out.warnings,
    )


def load_config(path: Union[str, Path], strict: bool = True) -> RunConfig:
    """读取配置文件并解析"""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError([("", f"无法读取配置文件 {path}: {e}")]) from e
    return parse_config(text, strict=strict)
