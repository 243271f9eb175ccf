"""
稳定性分析流水线

阶段按 profile -> audit -> evans -> resolvent -> simulate 的顺序执行。某阶段失败后,
其后所有请求的阶段记为 skipped; 无论成败, 运行清单 manifest.json 都会写出。
"""

from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import matplotlib
import numpy as np
import pydantic
import scipy

from config.config_parser import ConfigParser
from core.assumption_audit import audit_assumptions
from core.boundary_forcing import BoundaryForcing
from core.eigen_system import HPEigenSystem
from core.evans import (analyticity_check, conjugation_check, essential_spectrum_curves,
                        essential_spectrum_margin, evans_contour, x_max_independence_check)
from core.green_ilt import green_function_ilt, green_via_ilt
from core.green_probe import green_probe, probe_smooth_part
from core.halfline_sim import (boundary_forcing_run, conservation_check, evolve_linear,
                               evolve_nonlinear, fit_decay_rates, lp_norm, operator_spectrum_check)
from core.hp_model import Model, ModelFactory, endpoint_characteristics
from core.profile_solver import solve_profile
from core.resolvent import (ResolventBuilder, duality_invariant_check, fit_kernel_envelope,
                            high_frequency_structure, low_frequency_modes, oracle_agreement,
                            scattering_consistency_check)
from core.templates import fit_template_constant, green_envelope
from data.builtin_systems import BuiltinSystems
from data.models import STAGE_ORDER, Profile, RunConfig, RunManifest, Snapshots, StageResult
from export.csv_exporter import CSVExporter
from export.plot_exporter import emit_plots
from export.report_exporter import ReportExporter
from utils.exceptions import BoundaryLayerError, ConfigError, ExportError
from utils.logger import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE_FAILED = 3
EXIT_INCONCLUSIVE = 4


def package_versions() -> Dict[str, str]:
    return {"numpy": np.__version__, "scipy": scipy.__version__, "pydantic": pydantic.VERSION,
            "matplotlib": matplotlib.__version__}


def order_stages(stages: Sequence[str]) -> List[str]:
    """按依赖顺序排列并去重"""
    unknown = [stage for stage in stages if stage not in STAGE_ORDER]
    if unknown:
        raise ConfigError(f"未知阶段: {unknown}, 可选 {STAGE_ORDER}")
    return [stage for stage in STAGE_ORDER if stage in set(stages)]


def exit_code(manifest: RunManifest) -> int:
    statuses = [stage.status for stage in manifest.stages]
    if "failed" in statuses:
        return EXIT_STAGE_FAILED
    if "inconclusive" in statuses:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


class StabilityPipeline:
    """按配置执行各阶段并收集产物"""

    def __init__(self, parser: ConfigParser, out: Optional[str] = None, threads: Optional[int] = None):
        self.parser = parser
        self.config: RunConfig = parser.get_run_config()
        self.out = Path(out or self.config.output.directory)
        self.threads = threads or self.config.pipeline.threads
        output = self.config.output.model_copy(update={"directory": str(self.out)})
        self.csv = CSVExporter(output)
        self.reports = ReportExporter(self.out)

        definition = BuiltinSystems().resolve(parser.get_model_config())
        self.model: Model = ModelFactory.create_model(definition)
        self.profile: Optional[Profile] = None
        self.manifest = RunManifest(config_path=str(parser.get_config_path()), config_hash=parser.config_hash(),
                                    versions=package_versions(), artifacts={"directory": str(self.out)})

    # ------------------------------------------------------------------
    # 执行
    # ------------------------------------------------------------------

    def run(self, stages: Optional[Sequence[str]] = None) -> RunManifest:
        stages = order_stages(self.config.pipeline.stages if stages is None else stages)
        handlers: Dict[str, Callable[[StageResult], None]] = {
            "profile": self._stage_profile,
            "audit": self._stage_audit,
            "evans": self._stage_evans,
            "resolvent": self._stage_resolvent,
            "simulate": self._stage_simulate,
        }
        logger.info(f"模型 {self.model.name} ({self.model.boundary_case}), 阶段 {stages}, 线程 {self.threads}")

        failed_at = None
        for name in stages:
            if failed_at is not None:
                self.manifest.stages.append(StageResult(
                    name=name, status="skipped", error_message=f"上游阶段 {failed_at} 失败"))
                continue
            result = StageResult(name=name, status="success", started_at=datetime.now())
            with logger.timed(f"阶段 {name}"):
                try:
                    handlers[name](result)
                except BoundaryLayerError as e:
                    logger.error(f"阶段 {name} 失败: {e}")
                    result.status, result.error_message = "failed", str(e)
                except Exception as e:
                    logger.exception(f"阶段 {name} 出现未预期错误: {e}")
                    result.status, result.error_message = "failed", f"{type(e).__name__}: {e}"
            result.completed_at = datetime.now()
            result.summary["seconds"] = (result.completed_at - result.started_at).total_seconds()
            self.manifest.stages.append(result)
            self.manifest.artifacts.update({f"{name}_{key}": path for key, path in result.artifacts.items()})
            if result.status == "failed":
                failed_at = name

        if stages and self.config.output.plots:
            try:
                emit_plots(self.manifest, self.out)
            except ExportError as e:
                self.manifest.notes.append(f"作图失败: {e}")
                logger.warning(self.manifest.notes[-1])
        self.manifest.artifacts["manifest"] = str(self.out / "manifest.json")
        self.reports.export_manifest(self.manifest)
        return self.manifest

    def _ensure_profile(self) -> Profile:
        if self.profile is None:
            settings = self.config.profile
            self.profile = solve_profile(self.model, settings.x_max, settings)
        return self.profile

    # ------------------------------------------------------------------
    # 阶段
    # ------------------------------------------------------------------

    def _stage_profile(self, result: StageResult):
        profile = self._ensure_profile()
        result.artifacts["table"] = self.csv.export_profile(profile, str(self.out / "profile.csv"))
        result.artifacts["report"] = self.reports.export("profile", profile)
        decay = profile.decay
        result.summary.update({"theta_est": profile.theta_est, "x_max": profile.x_max, "x0": profile.x0,
                               "x0_candidates": profile.x0_candidates,
                               "residual_max": profile.residual_max,
                               "theta_fit": decay.theta if decay else None})

    def _stage_audit(self, result: StageResult):
        report = audit_assumptions(self.model, self._ensure_profile())
        result.artifacts["report"] = self.reports.export("audit", report)
        failed = report.failed_checks()
        result.summary.update({"passed": report.passed, "failed_checks": failed})
        self.manifest.verdicts["audit"] = {"passed": report.passed, "failed_checks": failed}
        if failed:
            logger.warning(f"假设审计未通过: {failed}")

    def _stage_evans(self, result: StageResult):
        settings = self.config.evans
        profile = self._ensure_profile()
        system = HPEigenSystem(self.model, profile, x_max=settings.x_max)
        contour = evans_contour(self.model, profile, settings, self.threads, system=system)

        xi = np.linspace(-20.0, 20.0, 801)
        payload: Dict[str, Any] = {
            "contour": contour,
            "essential_spectrum": {"xi": xi, "curves": essential_spectrum_curves(self.model, xi)},
            "essential_margin": essential_spectrum_margin(self.model),
            "checks": {},
        }
        checks = payload["checks"]
        probes = [complex(contour.radius / 4, contour.radius / 4), complex(1.0, 1.0)]
        checks["conjugation"] = conjugation_check(system, probes, settings)
        if settings.x_max_check:
            checks["x_max_independence"] = x_max_independence_check(self.model, profile, probes, config=settings)
        if settings.analyticity_check:
            checks["analyticity"] = analyticity_check(system, complex(contour.radius / 2), contour.radius / 4,
                                                      config=settings)
        if settings.operator_check:
            spectrum = operator_spectrum_check(self.model, profile, settings.operator_h, settings.operator_length)
            spectrum["agrees_with_winding"] = spectrum["unstable"] == (contour.winding_number > 0)
            checks["operator_spectrum"] = spectrum

        result.artifacts["samples"] = self.csv.export_contour(contour, str(self.out / "evans_contour.csv"))
        result.artifacts["report"] = self.reports.export("evans", payload)
        self.manifest.artifacts["evans_report"] = result.artifacts["report"]
        self.manifest.verdicts.update({"condition_D": contour.verdict, "winding_number": contour.winding_number})
        result.summary.update({"verdict": contour.verdict, "winding_number": contour.winding_number,
                               "radius": contour.radius, "min_abs": contour.min_abs,
                               "refinements": contour.refinements,
                               "checks_passed": {key: value.get("passed", True) for key, value in checks.items()}})
        if contour.verdict == "inconclusive":
            result.status = "inconclusive"

    def _stage_resolvent(self, result: StageResult):
        settings = self.config.resolvent
        profile = self._ensure_profile()
        system = HPEigenSystem(self.model, profile, x_max=settings.x_max)
        builder = ResolventBuilder(system, self.config.evans.step_factor, settings.cond_max,
                                   self.config.evans.gap_min)

        samples = []
        for index, lam in enumerate(settings.lambdas):
            sample = builder.kernel(lam, settings.x_nodes, settings.y_nodes)
            entry: Dict[str, Any] = {"lam": lam, "envelope": fit_kernel_envelope(sample),
                                     "flagged_y": sample.flagged_y}
            if settings.duality_trials:
                entry["duality"] = duality_invariant_check(system, lam, settings.duality_trials, settings.seed,
                                                           self.config.evans.step_factor, self.threads)
            if settings.direct_oracle:
                entry["oracle"] = oracle_agreement(builder, lam, settings.x_nodes, settings.y_nodes,
                                                   settings.oracle_h)
            entry["scattering"] = scattering_consistency_check(builder, lam, settings.x_nodes, settings.y_nodes)
            result.artifacts[f"kernel_{index}"] = self.csv.export_kernel(
                sample, str(self.out / f"resolvent_kernel_{index}.csv"))
            samples.append(entry)

        high = np.geomspace(settings.high_frequency[0], settings.high_frequency[1], settings.high_frequency_samples)
        payload: Dict[str, Any] = {
            "samples": samples,
            "low_frequency": low_frequency_modes(self.model, tuple(settings.low_frequency),
                                                 settings.low_frequency_samples),
            "high_frequency": high_frequency_structure(builder, high, threads=self.threads),
            "ilt": [],
        }
        for x, t, y in settings.ilt_points:
            inverse = green_via_ilt(builder, x, t, y, threads=self.threads)
            payload["ilt"].append({"x": x, "t": t, "y": y, **inverse})

        result.artifacts["report"] = self.reports.export("resolvent", payload)
        result.summary.update({
            "max_duality_drift": max((s["duality"]["max_drift"] for s in samples if "duality" in s), default=None),
            "max_oracle_error": max((s["oracle"]["relative_error"] for s in samples if "oracle" in s), default=None),
            "low_frequency_order": payload["low_frequency"].order,
            "ilt_converged": all(item["converged"] for item in payload["ilt"]),
        })

    def _stage_simulate(self, result: StageResult):
        settings = self.config.simulation
        profile = self._ensure_profile()
        free = settings.model_copy(update={"forcing": None})
        snapshots = evolve_linear(self.model, profile, free, forcing=BoundaryForcing(self.model.n))
        fits = fit_decay_rates(snapshots, settings.p_list)
        payload: Dict[str, Any] = {
            "decay": {"times": snapshots.times, "fits": fits,
                      "norms": {str(p): lp_norm(snapshots.perturbation, snapshots.h, p) for p in settings.p_list}},
            "conservation": conservation_check(snapshots),
            "spacetime": self._spacetime(snapshots, settings.center),
        }
        result.artifacts["snapshots"] = self.csv.export_snapshots(snapshots, str(self.out / "snapshots.csv"))
        result.artifacts["decay_fits"] = self.csv.export_decay_fits(fits, str(self.out / "decay_fits.csv"))

        if settings.forcing is not None and settings.forcing.kind != "none":
            _, forced_fits, info = boundary_forcing_run(self.model, profile, settings)
            payload["forcing"] = {"fits": forced_fits, **info}

        if settings.nonlinear:
            nonlinear = evolve_nonlinear(self.model, profile, free, forcing=BoundaryForcing(self.model.n))
            payload["nonlinear"] = {"fits": fit_decay_rates(nonlinear, settings.p_list),
                                    "max_difference": float(np.max(np.abs(nonlinear.perturbation
                                                                          - snapshots.perturbation)))}

        if settings.probe is not None:
            payload["probe"] = [green_probe(self.model, profile, y, settings.probe.times, settings.probe, settings)
                                for y in settings.probe.y]
            payload["ilt_cross_check"] = self._ilt_cross_check()

        result.artifacts["report"] = self.reports.export("simulation", payload)
        self.manifest.artifacts["simulation_report"] = result.artifacts["report"]
        table = [{"p": fit.p, "exponent": fit.exponent, "target": fit.target, "low_confidence": fit.low_confidence}
                 for fit in fits]
        self.manifest.verdicts["decay_rates"] = table
        result.summary.update({"decay_rates": table, "valid_until": snapshots.valid_until,
                               "conservation_error": payload["conservation"]["relative_error"]})

    def _spacetime(self, snapshots: Snapshots, center: float) -> Dict[str, Any]:
        """|U| 场与以初始脉冲中心为源点拟合的模板包络"""
        endpoint = endpoint_characteristics(self.model)
        magnitude = np.linalg.norm(snapshots.perturbation, axis=-1)
        X, T = np.meshgrid(snapshots.centers, snapshots.times)
        later = T > 0
        fit = fit_template_constant(magnitude[later], X[later], T[later], center, endpoint)
        template = green_envelope(endpoint, fit["M"], X, T, center)
        return {"times": snapshots.times, "centers": snapshots.centers, "magnitude": magnitude,
                "template": template, "M": fit["M"], "ratio": fit["ratio"]}

    def _ilt_cross_check(self) -> List[Dict[str, Any]]:
        """探针残差与反 Laplace 变换在 ilt_points 上的比较"""
        settings = self.config.resolvent
        if not settings.ilt_points:
            return []
        profile = self._ensure_profile()
        checks = []
        for x, t, y in settings.ilt_points:
            inverse = green_function_ilt(self.model, profile, x, t, y, x_max=settings.x_max,
                                         step_factor=self.config.evans.step_factor, cond_max=settings.cond_max,
                                         threads=self.threads)["value"][:, 0]
            probed = probe_smooth_part(self.model, profile, x, t, y, self.config.simulation.probe,
                                       self.config.simulation)
            scale = max(float(np.max(np.abs(inverse))), 1e-300)
            checks.append({"x": x, "t": t, "y": y, "ilt": inverse, "probe": probed,
                           "relative_difference": float(np.max(np.abs(inverse - probed))) / scale})
        return checks


def run_pipeline(config_path: str, out: Optional[str] = None, stages: Optional[Sequence[str]] = None,
                 threads: Optional[int] = None) -> RunManifest:
    """加载配置并执行流水线; 配置错误抛出 ConfigError"""
    parser = ConfigParser(config_path)
    return StabilityPipeline(parser, out, threads).run(stages)
