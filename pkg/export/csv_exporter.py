"""
CSV格式导出器
"""

import csv
from datetime import datetime
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from data.models import ContourResult, DecayFit, OutputConfig, Profile, ResolventSample, Snapshots
from utils.exceptions import ExportError
from utils.logger import get_logger

logger = get_logger(__name__)


class CSVExporter:
    """CSV格式导出器: 剖面、Evans 采样、预解核切片、模拟快照"""

    def __init__(self, output_settings: Optional[OutputConfig] = None):
        self.settings = output_settings or OutputConfig()
        self.delimiter = self.settings.csv_delimiter or ','
        self.directory = Path(self.settings.directory)

    def _resolve(self, output_path: Optional[str], stem: str) -> Path:
        if output_path is None:
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            output_path = self.directory / f"{stem}_{timestamp}.csv"
        output_path = Path(output_path)
        # 确保输出目录存在
        output_path.parent.mkdir(parents=True, exist_ok=True)
        return output_path

    def write_table(self, header: Sequence[str], rows: Iterable[Sequence], output_path: Optional[str] = None,
                    comments: Sequence[str] = (), stem: str = "table") -> str:
        """写入带 '# ...' 注释头的表格"""
        output_path = self._resolve(output_path, stem)
        logger.info(f"开始导出CSV文件: {output_path}")
        try:
            count = 0
            with open(output_path, 'w', newline='', encoding='utf-8') as csvfile:
                writer = csv.writer(csvfile, delimiter=self.delimiter)
                writer.writerow([f"# 生成时间: {datetime.now().isoformat(timespec='seconds')}"])
                for comment in comments:
                    writer.writerow([f"# {comment}"])
                writer.writerow(list(header))
                for row in rows:
                    writer.writerow([_format_cell(value) for value in row])
                    count += 1
            logger.info(f"CSV导出完成: {count} 行已保存到 {output_path}")
            return str(output_path)
        except Exception as e:
            logger.error(f"CSV导出失败: {e}")
            raise ExportError(f"CSV导出失败: {e}")

    def export_profile(self, profile: Profile, output_path: Optional[str] = None) -> str:
        n = profile.n
        header = ["x"] + [f"U{i}" for i in range(n)] + [f"dU{i}" for i in range(n)]
        rows = (np.concatenate(([x], U, dU)) for x, U, dU in zip(profile.grid, profile.values, profile.derivatives))
        comments = [f"边界类型: {profile.boundary_case}", f"theta_est: {profile.theta_est:.6g}",
                    f"X_max: {profile.x_max:.6g}", f"x0: {profile.x0}"]
        return self.write_table(header, rows, output_path, comments, stem="profile")

    def export_contour(self, contour: ContourResult, output_path: Optional[str] = None) -> str:
        header = ["re_lambda", "im_lambda", "re_D", "im_D", "abs_D"]
        rows = ([lam.real, lam.imag, D.real, D.imag, abs(D)] for lam, D in zip(contour.lambdas, contour.values))
        comments = [f"R = {contour.radius:g}, eps = {contour.epsilon:.3e}",
                    f"绕数 = {contour.winding_number}, 判定 = {contour.verdict}"]
        return self.write_table(header, rows, output_path, comments, stem="evans_contour")

    def export_kernel(self, sample: ResolventSample, output_path: Optional[str] = None) -> str:
        n = sample.kernel.shape[-1]
        header = ["x", "y", "branch"] + [f"{part}_G{a}{b}" for a in range(n) for b in range(n) for part in ("re", "im")]
        rows: List[list] = []
        for i, x in enumerate(sample.x_nodes):
            for j, y in enumerate(sample.y_nodes):
                G = sample.kernel[i, j]
                entries = [value for a in range(n) for b in range(n) for value in (G[a, b].real, G[a, b].imag)]
                rows.append([x, y, "upper" if sample.upper_branch[i, j] else "lower"] + entries)
        comments = [f"lambda = {sample.lam}", f"病态 y 索引: {sample.flagged_y}"]
        return self.write_table(header, rows, output_path, comments, stem="resolvent_kernel")

    def export_snapshots(self, snapshots: Snapshots, output_path: Optional[str] = None) -> str:
        n = snapshots.values.shape[-1]
        header = ["t", "x"] + [f"dU{i}" for i in range(n)]
        rows = ([t, x] + list(U) for t, frame in zip(snapshots.times, snapshots.perturbation)
                for x, U in zip(snapshots.centers, frame))
        comments = [f"模式: {snapshots.mode}, h = {snapshots.h:g}, dt = {snapshots.dt:.3e}",
                    f"有效至 t = {snapshots.valid_until:.4g}"]
        return self.write_table(header, rows, output_path, comments, stem="snapshots")

    def export_decay_fits(self, fits: Sequence[DecayFit], output_path: Optional[str] = None) -> str:
        header = ["p", "exponent", "target", "intercept", "t_start", "t_end", "low_confidence"]
        rows = ([fit.p, fit.exponent, fit.target, fit.intercept] + list(fit.window or [None, None])
                + [fit.low_confidence] for fit in fits)
        return self.write_table(header, rows, output_path, stem="decay_fits")


def _format_cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.generic):
        return value.item()
    return value
