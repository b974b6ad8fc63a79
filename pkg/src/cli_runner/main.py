"""
命令行入口
子命令：validate（只校验配置）、simulate（导出样本路径事件日志）、
verify（运行恒等式检查套件并写出 CSV/JSON 报告）、tables（写出收敛表）

退出码：0 全部通过，1 存在失败检查或运行被中断，2 配置错误
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from ..finite_chain_core.model import ChainModel
from ..finite_chain_core.paths import make_rng, simulate_chain_path, stream_seed
from ..identity_suite.runner import iter_checks
from ..identity_suite.specs import ResidualReport, SuiteEnvironment
from ..identity_suite.tables import TABLE_KINDS, build_table
from ..levy_models.sampler import JumpSizeSampler, TruncationPolicy, sample_levy_path
from . import settings
from .run_config import ConfigError, RunConfig, load_config
from .utils import echo, setup_logging, write_csv_report, write_dataframe, write_json_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

SIMULATE_EPSILON = 0.01


def run_suite(config: RunConfig, out_dir: Path, jobs: int = 1, timings: bool = False) -> int:
    """
    运行检查套件并写出报告

    中断（Ctrl-C）时写出已完成的检查，JSON 元数据标记 interrupted，返回 1

    Args:
        config: 运行配置
        out_dir: 输出目录
        jobs: 并行进程数（不影响报告内容）
        timings: 报告中是否写入耗时

    Returns:
        退出码
    """
    reports: List[ResidualReport] = []
    interrupted = False
    try:
        for report in iter_checks(config.suite, config.models, config.functions, config.seed,
                                  jobs=jobs, strict=config.strict):
            reports.append(report)
            echo("成功" if report.passed else "失败",
                 f"{report.name}: max_resid={report.max_resid:.3e}, z={report.z:.3f}")
    except KeyboardInterrupt:
        interrupted = True
        print()
        echo("警告", f"运行被中断，写出已完成的 {len(reports)} 个检查")

    metadata = {
        "seed": config.seed,
        "strict": config.strict,
        "horizon": config.horizon,
        "paths": config.paths,
        "checks_configured": len(config.suite),
        "interrupted": interrupted,
    }
    csv_path = write_csv_report(reports, out_dir / config.output["csv"], timings)
    json_path = write_json_report(reports, out_dir / config.output["json"], metadata, timings)
    echo("信息", f"报告已写出: {csv_path}, {json_path}")

    failed = [r.name for r in reports if not r.passed]
    if interrupted:
        return EXIT_FAILED
    if failed:
        echo("失败", f"{len(failed)}/{len(reports)} 个检查未通过: {', '.join(failed)}")
        return EXIT_FAILED
    echo("成功", f"全部 {len(reports)} 个检查通过")
    return EXIT_OK


def emit_tables(config: RunConfig, out_dir: Path, kind: Optional[str] = None) -> List[str]:
    """
    生成配置中的收敛表，文件名 table_<kind>_<model>.csv

    Args:
        config: 运行配置
        out_dir: 输出目录
        kind: 只生成该类型的表（缺省全部）

    Returns:
        写出的文件路径
    """
    env = SuiteEnvironment(config.models, config.functions, config.strict)
    written: List[str] = []
    used = set()
    for index, doc in enumerate(config.tables):
        if kind is not None and doc["kind"] != kind:
            continue
        stem = f"table_{doc['kind']}_{doc['model']}"
        if stem in used:
            stem = f"{stem}_{index}"
        used.add(stem)
        doc = {"horizon": config.horizon, **doc}
        rng = make_rng(stream_seed(config.seed, f"table:{stem}"))
        frame = build_table(env, doc, rng)
        written.append(write_dataframe(frame, out_dir / f"{stem}.csv"))
        echo("成功", f"{stem}: {len(frame)} 行")
    if not written:
        echo("警告", "配置中没有匹配的表")
    return written


def simulate_paths(config: RunConfig, model_name: str, n_paths: int, out_dir: Path,
                   epsilon: float = SIMULATE_EPSILON) -> str:
    """
    模拟 n_paths 条路径并把事件日志合并写入 paths_<model>.csv（附 path 列）

    链路径的起点在状态间循环，每条路径以 t=0 的起点行开头；
    Lévy 路径从原点出发，按截断半径 epsilon 模拟
    """
    env = SuiteEnvironment(config.models, config.functions, config.strict)
    model = env.model(model_name)
    rng = make_rng(stream_seed(config.seed, f"simulate:{model_name}"))
    frames = []
    if isinstance(model, ChainModel):
        for i in range(n_paths):
            path = simulate_chain_path(model, i % model.n, config.horizon, rng)
            start = pd.DataFrame({"t": [0.0], "state": [int(path.x0)]})
            frame = pd.concat([start, path.to_frame()], ignore_index=True)
            frames.append(frame.assign(killed=path.killed))
    else:
        sampler = JumpSizeSampler(model, epsilon)
        policy = TruncationPolicy(epsilon)
        for i in range(n_paths):
            path = sample_levy_path(model, np.zeros(model.dim), config.horizon, policy, rng,
                                    sampler=sampler)
            frames.append(path.to_frame())
    for i, frame in enumerate(frames):
        frame.insert(0, "path", i)
    log = pd.concat(frames, ignore_index=True)
    return write_dataframe(log, out_dir / f"paths_{model_name}.csv")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON 运行配置文件")
    common.add_argument("--out", default=None, help="输出目录（缺省取配置 output.dir）")
    common.add_argument("--seed", type=int, default=None, help="覆盖配置中的根种子")
    common.add_argument("--jobs", type=int, default=settings.DEFAULT_JOBS,
                        help=f"并行进程数 (默认: {settings.DEFAULT_JOBS})")
    common.add_argument("--strict", action=argparse.BooleanOptionalAction, default=True,
                        help="严格模式：拒绝未知键与不满足细致平衡的链")
    common.add_argument("--log-level", default=settings.LOG_LEVEL, choices=settings.LOG_LEVELS,
                        type=str.upper, help=f"日志级别 (默认: {settings.LOG_LEVEL})")

    parser = argparse.ArgumentParser(description="对称 Markov 过程随机分析恒等式的数值验证")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="只校验配置")

    simulate = sub.add_parser("simulate", parents=[common], help="导出样本路径事件日志")
    simulate.add_argument("--model", required=True, help="配置中的模型名")
    simulate.add_argument("--paths", type=int, default=10, help="路径数 (默认: 10)")
    simulate.add_argument("--epsilon", type=float, default=SIMULATE_EPSILON,
                          help=f"Lévy 模型的小跳截断半径 (默认: {SIMULATE_EPSILON})")

    verify = sub.add_parser("verify", parents=[common], help="运行检查套件")
    verify.add_argument("--timings", action="store_true", help="报告中写入耗时（结果不再可逐字节复现）")

    tables = sub.add_parser("tables", parents=[common], help="生成收敛表")
    tables.add_argument("--kind", choices=TABLE_KINDS, default=None, help="只生成该类型的表")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """主函数：解析命令行、载入配置并分派子命令，返回退出码"""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, settings.LOG_FILE or None)
    logger.debug(f"环境配置: {settings.get_settings_summary()}")

    errors = settings.validate_settings()
    if args.jobs < 1:
        errors.append(f"--jobs 必须 ≥ 1，当前值: {args.jobs}")
    if errors:
        for error in errors:
            echo("失败", error)
        return EXIT_CONFIG

    try:
        config = load_config(args.config, strict=args.strict)
    except ConfigError as e:
        echo("失败", "配置错误:")
        for where, message in e.errors:
            print(f"  {where or '/'}: {message}")
        return EXIT_CONFIG
    if args.seed is not None:
        config.seed = args.seed
    for where, message in config.warnings:
        echo("警告", f"{where}: {message}")
    out_dir = Path(args.out or config.output["dir"])

    if args.command == "validate":
        echo("成功", f"配置有效：{len(config.models)} 个模型，{len(config.suite)} 个检查，"
              f"{len(config.tables)} 张表")
        return EXIT_OK

    try:
        if args.command == "simulate":
            if args.model not in config.models:
                echo("失败", f"配置中没有模型 {args.model!r}")
                return EXIT_CONFIG
            path = simulate_paths(config, args.model, args.paths, out_dir, args.epsilon)
            echo("成功", f"路径已写出: {path}")
            return EXIT_OK
        if args.command == "verify":
            return run_suite(config, out_dir, args.jobs, args.timings)
        emit_tables(config, out_dir, args.kind)
        return EXIT_OK
    except KeyboardInterrupt:
        print()
        echo("信息", "用户取消操作")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
