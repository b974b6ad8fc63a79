#!/usr/bin/env python3
"""
恒等式验证套件启动脚本
"""

import os
import sys
import subprocess
from pathlib import Path

DEFAULT_CONFIG = Path("configs") / "default_suite.json"


def print_header():
    """打印标题"""
    print("=" * 50)
    print("对称跳过程随机分析恒等式验证")
    print("=" * 50)
    print()


def get_venv_python_path():
    """获取虚拟环境Python路径（跨平台）"""
    if sys.platform == "win32":
        python_path = Path("venv") / "Scripts" / "python.exe"
    else:
        python_path = Path("venv") / "bin" / "python"

    return python_path


def check_virtual_env():
    """检查虚拟环境"""
    venv_path = Path("venv")
    if not venv_path.exists():
        print("[错误] 虚拟环境不存在，请先创建虚拟环境")
        print("运行: python -m venv venv  # Windows")
        print("运行: python3 -m venv venv # Linux/Unix/macOS")
        print("然后运行: pip install -r requirements.txt")
        return False

    python_path = get_venv_python_path()
    if not python_path.exists():
        print(f"[错误] 虚拟环境中未找到Python可执行文件: {python_path}")
        print("请重新创建虚拟环境")
        return False

    return True


def show_help():
    """显示帮助信息"""
    print("\n使用方法:")
    print("  python start_verification.py [子命令] [选项]")
    print()
    print("子命令:")
    print("  verify               运行检查套件（缺省）")
    print("  validate             只校验配置")
    print("  simulate             导出样本路径（需 --model）")
    print("  tables               生成收敛表")
    print()
    print("选项:")
    print(f"  --config PATH        运行配置 (默认: {DEFAULT_CONFIG})")
    print("  --out DIR            输出目录")
    print("  --seed N             覆盖根种子")
    print("  --jobs N             并行进程数")
    print("  --no-strict          非严格模式（负对照）")
    print("  --help               显示此帮助信息")
    print()
    print("示例:")
    print("  python start_verification.py")
    print("  python start_verification.py verify --jobs 4")
    print("  python start_verification.py verify --config configs/negative_control.json --no-strict")
    print("  python start_verification.py tables --kind riemann")


def build_args(argv):
    """补全缺省子命令与配置文件"""
    args = list(argv)
    if not args or args[0].startswith("-"):
        args.insert(0, "verify")
    if "--config" not in args:
        args.extend(["--config", str(DEFAULT_CONFIG)])
    return args


def main():
    """主函数"""
    print_header()

    if not check_virtual_env():
        sys.exit(1)

    args = build_args(sys.argv[1:])
    if not Path(args[args.index("--config") + 1]).exists():
        print(f"[警告] 配置文件不存在: {args[args.index('--config') + 1]}")

    python_path = get_venv_python_path()
    cmd = [str(python_path), "-m", "src.cli_runner.main"] + args

    print(f"\n[执行] 命令: {' '.join(cmd)}")
    print()

    try:
        env = os.environ.copy()
        env["PYTHONPATH"] = str(Path.cwd())
        subprocess.run(cmd, env=env, check=True)
    except KeyboardInterrupt:
        print("\n[信息] 用户取消操作")
        sys.exit(0)
    except subprocess.CalledProcessError as e:
        print(f"\n[错误] 命令执行失败，退出码: {e.returncode}")
        sys.exit(e.returncode)
    except Exception as e:
        print(f"\n[错误] 发生异常: {e}")
        sys.exit(1)


if __name__ == "__main__":
    if "--help" in sys.argv or "-h" in sys.argv:
        print_header()
        show_help()
        sys.exit(0)

    main()
