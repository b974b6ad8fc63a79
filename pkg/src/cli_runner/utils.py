"""
工具函数模块
提供日志配置、带状态标签的控制台输出与报告写出（CSV、JSON）
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import pandas as pd

from ..identity_suite.specs import ResidualReport, to_jsonable

REPORT_COLUMNS = ["name", "backend", "n_paths", "max_resid", "mean_resid", "stderr", "z", "pass",
                  "seconds"]
FLOAT_FORMAT = "%.17g"


# 控制台状态标签与日志级别的对应
STATUS_LEVELS = {"成功": logging.INFO, "信息": logging.INFO, "警告": logging.WARNING, "失败": logging.ERROR}
LEVEL_LABELS = {logging.DEBUG: "调试", logging.INFO: "信息", logging.WARNING: "警告",
                logging.ERROR: "失败", logging.CRITICAL: "失败"}
ECHO_LOGGER = f"{__name__}.echo"


class LabelFormatter(logging.Formatter):
    """控制台格式：[标签] 模块 - 消息，标签与 echo 输出的状态标签一致"""

    def format(self, record: logging.LogRecord) -> str:
        label = LEVEL_LABELS.get(record.levelno, record.levelname)
        text = f"[{label}] {record.name} - {record.getMessage()}"
        if record.exc_info:
            text = f"{text}\n{self.formatException(record.exc_info)}"
        return text


def setup_logging(log_level: str = "INFO", log_file: str = None):
    """
    配置日志系统

    控制台按级别打 [信息]/[警告]/[失败] 标签；日志文件带时间戳，
    并额外记录 echo 输出的状态行，便于事后对照一次运行的结果

    Args:
        log_level: 日志级别 (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: 日志文件路径
    """
    file_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, log_level.upper()))

    # 清除现有的处理器
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    # 状态行已由 echo 打印，控制台不再重复
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(LabelFormatter())
    console_handler.addFilter(lambda record: not record.name.startswith(ECHO_LOGGER))
    root_logger.addHandler(console_handler)

    echo_logger = logging.getLogger(ECHO_LOGGER)
    echo_logger.setLevel(logging.INFO)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setFormatter(file_formatter)
        root_logger.addHandler(file_handler)

    logging.debug(f"日志系统已配置，级别: {log_level}")


def echo(status: str, message: str):
    """
    打印带状态标签的结果行，并写入日志（级别由标签决定）

    Args:
        status: 成功、信息、警告或失败
        message: 消息正文
    """
    if status not in STATUS_LEVELS:
        raise ValueError(f"未知状态标签: {status}")
    print(f"[{status}] {message}")
    logging.getLogger(ECHO_LOGGER).log(STATUS_LEVELS[status], message)


def reports_frame(reports: Sequence[ResidualReport], timings: bool = False) -> pd.DataFrame:
    """报告列表 → DataFrame，列顺序固定；无报告时只有表头"""
    rows = [report.to_row(timings) for report in reports]
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def write_dataframe(frame: pd.DataFrame, path: Union[str, Path]) -> str:
    """以完整精度写出 CSV，返回文件路径"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logging.info(f"CSV 已保存到: {path}")
    return str(path)


def write_csv_report(reports: Sequence[ResidualReport], path: Union[str, Path],
                     timings: bool = False) -> str:
    """
    写出残差报告 CSV

    Args:
        reports: 检查报告
        path: 输出文件
        timings: 是否写入 seconds 列的值

    Returns:
        文件路径
    """
    return write_dataframe(reports_frame(reports, timings), path)


def write_json_report(reports: Sequence[ResidualReport], path: Union[str, Path],
                      metadata: Dict[str, Any], timings: bool = False) -> str:
    """
    写出 JSON 报告（元数据 + 每个检查的完整记录，含 details 与 error）

    Args:
        reports: 检查报告
        path: 输出文件
        metadata: 运行元数据（种子、配置摘要、是否中断等）
        timings: 是否写入耗时

    Returns:
        文件路径
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    checks: List[Dict[str, Any]] = [report.to_dict(timings) for report in reports]
    data = {
        "metadata": to_jsonable(metadata),
        "summary": {
            "total": len(checks),
            "passed": sum(1 for report in reports if report.passed),
            "failed": sum(1 for report in reports if not report.passed),
        },
        "checks": checks,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=2)
        f.write("\n")
    logging.info(f"JSON 报告已保存到: {path}")
    return str(path)
