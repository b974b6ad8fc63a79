"""
环境配置模块
从 .env 与环境变量读取日志、缺省观察期、路径数、并行度与输出目录
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# 项目根目录
PROJECT_ROOT = Path(__file__).parent.parent.parent

# 加载环境变量：configs/.env 优先，其次当前目录的 .env
load_dotenv(PROJECT_ROOT / "configs" / ".env")
load_dotenv()

# 日志配置
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("LOG_FILE", "")

# 运行缺省值（配置文件 defaults 段未给出时使用）
DEFAULT_HORIZON = float(os.getenv("DEFAULT_HORIZON", "1.0"))
DEFAULT_PATHS = int(os.getenv("DEFAULT_PATHS", "10000"))
DEFAULT_JOBS = int(os.getenv("DEFAULT_JOBS", "1"))
DEFAULT_OUT_DIR = os.getenv("DEFAULT_OUT_DIR", "reports")

# 对偶刻画的 Richardson 外推
RICHARDSON_T0 = float(os.getenv("RICHARDSON_T0", "0.2"))
RICHARDSON_LEVELS = int(os.getenv("RICHARDSON_LEVELS", "7"))

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def validate_settings():
    """验证环境配置，返回错误列表"""
    errors = []

    if LOG_LEVEL.upper() not in LOG_LEVELS:
        errors.append(f"LOG_LEVEL 必须是 {LOG_LEVELS} 之一，当前值: {LOG_LEVEL}")
    if DEFAULT_HORIZON <= 0:
        errors.append(f"DEFAULT_HORIZON 必须大于0，当前值: {DEFAULT_HORIZON}")
    if DEFAULT_PATHS <= 0:
        errors.append(f"DEFAULT_PATHS 必须大于0，当前值: {DEFAULT_PATHS}")
    if DEFAULT_JOBS <= 0:
        errors.append(f"DEFAULT_JOBS 必须大于0，当前值: {DEFAULT_JOBS}")
    if not 0 < RICHARDSON_T0 <= 1:
        errors.append(f"RICHARDSON_T0 必须在 (0, 1] 内，当前值: {RICHARDSON_T0}")
    if RICHARDSON_LEVELS < 2:
        errors.append(f"RICHARDSON_LEVELS 至少为 2，当前值: {RICHARDSON_LEVELS}")

    return errors


def get_settings_summary():
    """获取配置摘要"""
    return {
        "log_level": LOG_LEVEL,
        "log_file": LOG_FILE or None,
        "default_horizon": DEFAULT_HORIZON,
        "default_paths": DEFAULT_PATHS,
        "default_jobs": DEFAULT_JOBS,
        "default_out_dir": DEFAULT_OUT_DIR,
        "richardson_t0": RICHARDSON_T0,
        "richardson_levels": RICHARDSON_LEVELS,
    }
