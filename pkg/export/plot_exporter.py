"""
SVG 图导出器

所有图都从阶段 JSON 报告 (已序列化的字典) 生成, 因此既可在流水线结束时调用,
也可由 report 子命令根据已有的运行清单重新生成。
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from data.models import RunManifest  # noqa: E402
from export.report_exporter import ReportExporter  # noqa: E402
from utils.exceptions import ExportError  # noqa: E402
from utils.logger import get_logger  # noqa: E402

logger = get_logger(__name__)

CUSTOM = {"linewidth": 1.5}


def as_complex(value: Any) -> np.ndarray:
    """还原 to_serializable 写出的复数 ({real, imag} 或 [re, im] 列表)"""
    if isinstance(value, dict) and "real" in value:
        return np.asarray(value["real"], dtype=float) + 1j * np.asarray(value["imag"], dtype=float)
    array = np.asarray(value)
    if array.ndim >= 1 and array.shape[-1] == 2 and array.dtype != complex:
        return array[..., 0].astype(float) + 1j * array[..., 1].astype(float)
    return array.astype(complex)


class PlotExporter:
    """matplotlib (Agg) SVG 图"""

    def __init__(self, directory: Union[str, Path] = "output"):
        self.directory = Path(directory)

    def _save(self, figure, name: str) -> str:
        output_path = self.directory / f"{name}.svg"
        output_path.parent.mkdir(parents=True, exist_ok=True)
        try:
            figure.tight_layout()
            figure.savefig(output_path, format="svg")
            logger.info(f"图已保存到: {output_path}")
            return str(output_path)
        except Exception as e:
            logger.error(f"图导出失败: {e}")
            raise ExportError(f"图导出失败 ({name}): {e}")
        finally:
            plt.close(figure)

    def plot_contour(self, contour: Dict[str, Any], name: str = "evans_nyquist") -> str:
        """左: lambda 平面围道; 右: D(lambda) 像曲线与原点"""
        lambdas = as_complex(contour["lambdas"])
        values = as_complex(contour["values"])
        closed = np.append(values, values[:1])
        figure, (left, right) = plt.subplots(1, 2, figsize=(9, 4))
        left.plot(lambdas.real, lambdas.imag, "b-", **CUSTOM)
        left.set_xlabel("Re $\\lambda$")
        left.set_ylabel("Im $\\lambda$")
        left.set_title(f"R = {contour['radius']:g}")
        left.set_aspect("equal", adjustable="datalim")
        right.plot(closed.real, closed.imag, "r-", **CUSTOM)
        right.plot([0.0], [0.0], "k+", markersize=10)
        right.set_xlabel("Re D")
        right.set_ylabel("Im D")
        right.set_title(f"winding = {contour['winding_number']} ({contour['verdict']})")
        return self._save(figure, name)

    def plot_essential_spectrum(self, spectrum: Dict[str, Any], name: str = "essential_spectrum") -> str:
        xi = np.asarray(spectrum["xi"], dtype=float)
        curves = as_complex(spectrum["curves"])
        figure, axis = plt.subplots(figsize=(5, 4))
        for column in range(curves.shape[1]):
            axis.plot(curves[:, column].real, curves[:, column].imag, "-", label=f"branch {column}", **CUSTOM)
        axis.axvline(0.0, color="k", linestyle=":", linewidth=1.0)
        axis.set_xlabel("Re $\\lambda$")
        axis.set_ylabel("Im $\\lambda$")
        axis.set_title(f"$\\xi \\in [{xi.min():g}, {xi.max():g}]$")
        axis.legend(loc="upper left")
        return self._save(figure, name)

    def plot_spacetime(self, spacetime: Dict[str, Any], name: str = "spacetime") -> str:
        """|U(x, t)| 热图, 叠加模板 theta 的等值线"""
        times = np.asarray(spacetime["times"], dtype=float)
        centers = np.asarray(spacetime["centers"], dtype=float)
        magnitude = np.asarray(spacetime["magnitude"], dtype=float)
        figure, axis = plt.subplots(figsize=(7, 4))
        mesh = axis.pcolormesh(centers, times, magnitude, shading="auto", cmap="viridis")
        figure.colorbar(mesh, ax=axis, label="|U|")
        template = spacetime.get("template")
        if template is not None:
            template = np.asarray(template, dtype=float)
            peak = float(np.max(template)) if template.size else 0.0
            if peak > 0:
                axis.contour(centers, times, template / peak, levels=[0.1, 0.5], colors="w",
                             linestyles=["--", "-"], linewidths=1.0)
        axis.set_xlabel("x")
        axis.set_ylabel("t")
        return self._save(figure, name)

    def plot_decay(self, decay: Dict[str, Any], name: str = "decay_rates") -> str:
        """log-log ||U||_p 与拟合直线"""
        times = np.asarray(decay["times"], dtype=float)
        figure, axis = plt.subplots(figsize=(5, 4))
        norms = decay.get("norms", {})
        for fit in decay.get("fits", []):
            key = str(fit["p"])
            if key not in norms:
                continue
            values = np.asarray(norms[key], dtype=float)
            positive = values > 0
            line, = axis.loglog(1 + times[positive], values[positive], "-", label=f"p = {key}", **CUSTOM)
            window = np.asarray(fit["window"], dtype=float)
            grid = np.linspace(window[0], window[-1], 32)
            axis.loglog(1 + grid, np.exp(fit["intercept"]) * (1 + grid) ** fit["exponent"], "--",
                        color=line.get_color(), linewidth=1.0)
        axis.set_xlabel("1 + t")
        axis.set_ylabel("$\\|U\\|_p$")
        axis.legend(loc="lower left")
        return self._save(figure, name)


def emit_plots(manifest: RunManifest, directory: Optional[Union[str, Path]] = None) -> Dict[str, str]:
    """按清单中的阶段报告生成全部 SVG; 缺少的阶段输出记入 manifest.notes"""
    directory = Path(directory) if directory else Path(manifest.artifacts.get("directory", "output"))
    exporter = PlotExporter(directory)
    written: Dict[str, str] = {}
    notes: List[str] = []

    def report(key: str) -> Optional[Dict[str, Any]]:
        path = manifest.artifacts.get(key)
        if path is None or not Path(path).exists():
            return None
        return ReportExporter.load(path)

    evans = report("evans_report")
    if evans is None:
        notes.append("未运行 evans 阶段, 跳过围道图与本质谱图")
    else:
        written["evans_nyquist"] = exporter.plot_contour(evans["contour"])
        if evans.get("essential_spectrum"):
            written["essential_spectrum"] = exporter.plot_essential_spectrum(evans["essential_spectrum"])

    simulation = report("simulation_report")
    if simulation is None:
        notes.append("未运行 simulate 阶段, 跳过时空热图与衰减率图")
    else:
        if simulation.get("spacetime"):
            written["spacetime"] = exporter.plot_spacetime(simulation["spacetime"])
        if simulation.get("decay", {}).get("fits"):
            written["decay_rates"] = exporter.plot_decay(simulation["decay"])
        else:
            notes.append("没有衰减率拟合结果, 跳过衰减率图")

    for note in notes:
        logger.info(note)
    manifest.notes.extend(notes)
    manifest.artifacts.update({f"plot_{key}": path for key, path in written.items()})
    return written
