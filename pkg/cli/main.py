"""
命令行界面主入口
"""

import sys
from pathlib import Path
from typing import List, Optional

import click
from colorama import Fore, Style, init

# 初始化colorama
init(autoreset=True)

# 添加项目根目录到系统路径
sys.path.append(str(Path(__file__).parent.parent))

from cli.pipeline import EXIT_CONFIG, StabilityPipeline, exit_code  # noqa: E402
from config.config_parser import ConfigParser  # noqa: E402
from data.models import STAGE_ORDER, RunManifest  # noqa: E402
from export.plot_exporter import emit_plots  # noqa: E402
from export.report_exporter import ReportExporter  # noqa: E402
from utils.exceptions import BoundaryLayerError, ConfigError  # noqa: E402
from utils.logger import get_logger  # noqa: E402

logger = get_logger(__name__)

STATUS_STYLE = {
    "success": (Fore.GREEN, "✓"),
    "failed": (Fore.RED, "✗"),
    "skipped": (Fore.YELLOW, "-"),
    "inconclusive": (Fore.YELLOW, "?"),
}


class BoundaryLayerCLI:
    """边界层稳定性分析CLI"""

    def __init__(self):
        self.config: Optional[ConfigParser] = None

    def initialize(self, config_path: str = "config.yaml"):
        """加载配置并初始化日志; 配置错误以退出码 2 结束"""
        try:
            click.echo(f"{Fore.CYAN}正在加载配置 {config_path} ...{Style.RESET_ALL}")
            self.config = ConfigParser(config_path)
            logging_config = self.config.get_run_config().logging
            logger.setup_logger(level=logging_config.level, log_file=logging_config.file,
                                max_bytes=logging_config.max_bytes, backup_count=logging_config.backup_count)
            click.echo(f"{Fore.GREEN}✓ 配置加载完成{Style.RESET_ALL}")
        except ConfigError as e:
            click.echo(f"{Fore.RED}✗ 配置错误: {e}{Style.RESET_ALL}", err=True)
            sys.exit(EXIT_CONFIG)

    def display_banner(self):
        """显示横幅"""
        banner = f"""
{Fore.CYAN}
╔══════════════════════════════════════════════════════════════╗
║              边界层 Evans 函数稳定性分析                      ║
║           Boundary-Layer Evans Stability Toolkit             ║
╚══════════════════════════════════════════════════════════════╝
{Style.RESET_ALL}
        """
        click.echo(banner)

    def run(self, stages: List[str], out: Optional[str], threads: Optional[int]) -> int:
        try:
            pipeline = StabilityPipeline(self.config, out, threads)
            manifest = pipeline.run(stages)
        except ConfigError as e:
            click.echo(f"{Fore.RED}✗ 配置错误: {e}{Style.RESET_ALL}", err=True)
            return EXIT_CONFIG
        display_manifest(manifest)
        return exit_code(manifest)


def display_manifest(manifest: RunManifest):
    """按阶段输出彩色摘要"""
    click.echo(f"\n{Fore.YELLOW}运行结果:{Style.RESET_ALL}")
    for stage in manifest.stages:
        colour, mark = STATUS_STYLE.get(stage.status, (Fore.WHITE, " "))
        line = f"  {colour}{mark} {stage.name:<10}{Style.RESET_ALL} {stage.status}"
        if stage.error_message:
            line += f": {stage.error_message}"
        click.echo(line)

    verdicts = manifest.verdicts
    if "condition_D" in verdicts:
        colour = Fore.GREEN if verdicts["condition_D"] == "stable" else Fore.RED
        click.echo(f"\n  条件 (D): {colour}{verdicts['condition_D']}{Style.RESET_ALL}"
                   f" (绕数 {verdicts.get('winding_number')})")
    if "audit" in verdicts:
        audit = verdicts["audit"]
        colour = Fore.GREEN if audit["passed"] else Fore.RED
        click.echo(f"  假设审计: {colour}{'通过' if audit['passed'] else audit['failed_checks']}{Style.RESET_ALL}")
    for fit in verdicts.get("decay_rates", []):
        flag = " (低可信度)" if fit["low_confidence"] else ""
        click.echo(f"  L^{fit['p']} 衰减指数 {fit['exponent']:.4f}, 目标 {fit['target']:.4f}{flag}")
    for note in manifest.notes:
        click.echo(f"  {Fore.YELLOW}注: {note}{Style.RESET_ALL}")
    if "manifest" in manifest.artifacts:
        click.echo(f"\n  运行清单: {manifest.artifacts['manifest']}")


def parse_stages(value: Optional[str], default: List[str]) -> List[str]:
    if value is None:
        return default
    stages = [item.strip() for item in value.split(",") if item.strip()]
    unknown = [stage for stage in stages if stage not in STAGE_ORDER]
    if unknown:
        raise click.BadParameter(f"未知阶段 {unknown}, 可选 {','.join(STAGE_ORDER)}")
    return stages


def stage_options(func):
    func = click.option('--threads', '-t', type=int, default=None, help='线程数')(func)
    func = click.option('--out', '-o', default=None, help='输出目录')(func)
    return func


def run_stages(ctx, stages: List[str], out: Optional[str], threads: Optional[int]):
    app = BoundaryLayerCLI()
    app.initialize(ctx.obj['config_path'])
    app.display_banner()
    ctx.exit(app.run(stages, out, threads))


@click.group()
@click.option('--config', '-c', default='config.yaml', help='配置文件路径 (YAML 或 JSON)')
@click.pass_context
def cli(ctx, config):
    """边界层稳定性分析 - Evans 函数判定与 Green 函数数值验证"""
    ctx.ensure_object(dict)
    ctx.obj['config_path'] = config


@cli.command()
@click.option('--stages', '-s', default=None, help='逗号分隔的阶段列表, 默认取配置 pipeline.stages')
@stage_options
@click.pass_context
def run(ctx, stages, out, threads):
    """按配置执行完整流水线"""
    app = BoundaryLayerCLI()
    app.initialize(ctx.obj['config_path'])
    app.display_banner()
    default = list(app.config.get_run_config().pipeline.stages)
    ctx.exit(app.run(parse_stages(stages, default), out, threads))


@cli.command()
@stage_options
@click.pass_context
def profile(ctx, out, threads):
    """求解边界层剖面并给出衰减证书"""
    run_stages(ctx, ["profile"], out, threads)


@cli.command()
@stage_options
@click.pass_context
def audit(ctx, out, threads):
    """审计结构假设 (自动先求解剖面)"""
    run_stages(ctx, ["audit"], out, threads)


@cli.command()
@stage_options
@click.pass_context
def evans(ctx, out, threads):
    """计算 Evans 函数围道并判定条件 (D)"""
    run_stages(ctx, ["evans"], out, threads)


@cli.command()
@stage_options
@click.pass_context
def resolvent(ctx, out, threads):
    """构造预解核并执行对偶、直接求解、低频与高频检查"""
    run_stages(ctx, ["resolvent"], out, threads)


@cli.command()
@stage_options
@click.pass_context
def simulate(ctx, out, threads):
    """半直线数值模拟、衰减率拟合与 Green 函数探针"""
    run_stages(ctx, ["simulate"], out, threads)


@cli.command()
@click.option('--from-manifest', '-m', 'manifest_path', required=True, type=click.Path(exists=True),
              help='manifest.json 或其所在目录')
@click.option('--out', '-o', default=None, help='作图输出目录, 默认与清单同目录')
@click.pass_context
def report(ctx, manifest_path, out):
    """由已有运行清单重新生成图与彩色摘要"""
    try:
        manifest = ReportExporter.load_manifest(manifest_path)
    except BoundaryLayerError as e:
        click.echo(f"{Fore.RED}✗ 读取清单失败: {e}{Style.RESET_ALL}", err=True)
        ctx.exit(EXIT_CONFIG)
    directory = out or str(Path(manifest.artifacts.get("manifest", manifest_path)).parent)
    try:
        written = emit_plots(manifest, directory)
        for path in written.values():
            click.echo(f"{Fore.GREEN}✓ 图已生成: {path}{Style.RESET_ALL}")
    except BoundaryLayerError as e:
        click.echo(f"{Fore.RED}✗ 作图失败: {e}{Style.RESET_ALL}", err=True)
    display_manifest(manifest)
    ctx.exit(exit_code(manifest))


if __name__ == '__main__':
    cli()
