"""
检查调度
按 (检查名, 后端) 查找实现，逐个或在进程池中并行执行；
每个检查使用以检查名命名的随机流，结果按配置顺序合并，与并行度无关
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, Iterator, List, Sequence

from . import chain_checks, levy_checks
from .specs import CheckSpec, ResidualReport, SuiteEnvironment, format_error_message

logger = logging.getLogger(__name__)

CheckFunc = Callable[[CheckSpec, SuiteEnvironment, int], ResidualReport]

CHECKS: Dict[str, Dict[str, CheckFunc]] = {
    "fukushima": {"chain": chain_checks.check_fukushima, "levy": levy_checks.check_fukushima},
    "ito_formula": {"chain": chain_checks.check_ito_formula, "levy": levy_checks.check_ito_formula},
    "leibniz_ibp": {"chain": chain_checks.check_leibniz_ibp},
    "nakao_routes": {"chain": chain_checks.check_nakao_routes},
    "gamma_K_zero": {"chain": chain_checks.check_gamma_K_zero},
    "nakao_dual": {"chain": chain_checks.check_nakao_dual},
    "levy_system": {"chain": chain_checks.check_levy_system, "levy": levy_checks.check_levy_system},
    "energy_identity": {"chain": chain_checks.check_energy_identity},
    "odd_af": {"chain": chain_checks.check_odd_af},
    "associativity": {"chain": chain_checks.check_associativity},
    "jump_representation": {"chain": chain_checks.check_jump_representation},
    "riemann": {"chain": chain_checks.check_riemann},
    "char_function": {"levy": levy_checks.check_char_function},
    "stable_scaling": {"levy": levy_checks.check_stable_scaling},
}


def run_check(spec: CheckSpec, env: SuiteEnvironment, root: int) -> ResidualReport:
    """
    执行单个检查；任何异常都转成失败报告，不中断整套运行

    Args:
        spec: 检查定义
        env: 模型与函数环境
        root: 根种子

    Returns:
        ResidualReport（seconds 为实际耗时）
    """
    start = time.perf_counter()
    logger.info(f"开始检查 {spec.name}（{spec.check}/{spec.backend}）")
    try:
        func = CHECKS[spec.check][spec.backend]
        report = func(spec, env, root)
    except Exception as e:
        logger.error(f"检查 {spec.name} 出错: {e}")
        report = ResidualReport(name=spec.name, check=spec.check, backend=spec.backend,
                                n_paths=0, passed=False, error=format_error_message(e))
    report.seconds = time.perf_counter() - start
    logger.info(f"检查 {spec.name} {'通过' if report.passed else '失败'}，"
                f"max_resid={report.max_resid:.3e}，耗时 {report.seconds:.2f}s")
    return report


def _run_in_worker(models: Dict[str, Any], functions: Dict[str, Any], strict: bool,
                   spec: CheckSpec, root: int) -> ResidualReport:
    # 径向密度闭包不可序列化，工作进程内按文档重建环境
    return run_check(spec, SuiteEnvironment(models, functions, strict), root)


def iter_checks(specs: Sequence[CheckSpec], models: Dict[str, Any], functions: Dict[str, Any],
                root: int, jobs: int = 1, strict: bool = True) -> Iterator[ResidualReport]:
    """
    按配置顺序逐个产出报告

    Args:
        specs: 检查定义列表
        models: 模型文档
        functions: 函数文档
        root: 根种子
        jobs: 并行进程数
        strict: 链模型是否强制细致平衡

    Yields:
        ResidualReport
    """
    if jobs <= 1 or len(specs) <= 1:
        env = SuiteEnvironment(models, functions, strict)
        for spec in specs:
            yield run_check(spec, env, root)
        return

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_in_worker, models, functions, strict, spec, root) for spec in specs]
        try:
            for future in futures:
                yield future.result()
        finally:
            for future in futures:
                future.cancel()


def run_checks(specs: Sequence[CheckSpec], models: Dict[str, Any], functions: Dict[str, Any],
               root: int, jobs: int = 1, strict: bool = True) -> List[ResidualReport]:
    """全部执行并返回报告列表"""
    return list(iter_checks(specs, models, functions, root, jobs, strict))
