"""
数据模型定义
"""

import math
from datetime import datetime
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

BoundaryCase = Literal["inflow", "outflow"]
Verdict = Literal["stable", "unstable", "inconclusive"]
StageStatus = Literal["success", "failed", "skipped", "inconclusive"]

STAGE_ORDER = ["profile", "audit", "evans", "resolvent", "simulate"]


class ArrayModel(BaseModel):
    """携带numpy数组的不可变结果模型基类"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# ---------------------------------------------------------------------------
# hp_model
# ---------------------------------------------------------------------------

class EndpointData(ArrayModel):
    """端点 U_+ 处的特征数据"""
    a_plus: np.ndarray = Field(..., description="dF(U_+) 的实特征值, 升序")
    l_plus: np.ndarray = Field(..., description="左特征向量 (按行)")
    r_plus: np.ndarray = Field(..., description="右特征向量 (按列)")
    beta_plus: np.ndarray = Field(..., description="扩散率 beta_j = l_j B r_j")
    biorthogonality_error: float = Field(..., description="max |l_j r_k - delta_jk|")
    violations: List[str] = Field(default_factory=list, description="检测到的假设违背")


class ReducedData(ArrayModel):
    """约化双曲量"""
    A_star: float = Field(..., description="有效双曲速度 A_*")
    D_star: float = Field(..., description="有效耗散 D_*")
    eta_star: float = Field(..., description="局部耗散系数 eta_* = -D_*")
    L_star: np.ndarray = Field(..., description="双曲左模态")
    R_star: np.ndarray = Field(..., description="双曲右模态")


class AuditCheck(BaseModel):
    """单项假设检查结果"""
    name: str = Field(..., description="检查名称")
    passed: bool = Field(..., description="是否通过")
    witness: Dict[str, Any] = Field(default_factory=dict, description="数值见证")
    message: str = Field(default="", description="说明")


class AuditReport(BaseModel):
    """假设审计报告"""
    model_name: str = Field(..., description="模型名称")
    boundary_case: BoundaryCase = Field(..., description="边界类型")
    checks: List[AuditCheck] = Field(default_factory=list, description="检查列表")

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def get_check(self, name: str) -> Optional[AuditCheck]:
        for check in self.checks:
            if check.name == name:
                return check
        return None

    def failed_checks(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]


# ---------------------------------------------------------------------------
# profile
# ---------------------------------------------------------------------------

class DecayBound(BaseModel):
    """单阶导数的指数衰减拟合 |d^k(U - U_+)| <= C exp(-theta x)"""
    order: int = Field(..., ge=0, description="导数阶数 k")
    C: float = Field(..., ge=0.0, description="拟合常数 C")
    theta: float = Field(..., description="拟合衰减率 theta")
    exact_zero: bool = Field(default=False, description="偏差恒为零")
    window: List[float] = Field(default_factory=list, description="拟合窗口 [x_a, x_b]")


class DecayCertificate(BaseModel):
    """剖面衰减证书"""
    bounds: List[DecayBound] = Field(..., description="各阶拟合结果")

    @property
    def theta(self) -> float:
        return min(bound.theta for bound in self.bounds)

    def for_order(self, k: int) -> DecayBound:
        for bound in self.bounds:
            if bound.order == k:
                return bound
        raise KeyError(k)


class Profile(ArrayModel):
    """边界层剖面"""
    grid: np.ndarray = Field(..., description="严格递增的网格 [0, X_max]")
    values: np.ndarray = Field(..., description="剖面值 (len(grid), n)")
    derivatives: np.ndarray = Field(..., description="一阶导数")
    second_derivatives: np.ndarray = Field(..., description="二阶导数")
    u_plus: np.ndarray = Field(..., description="远场状态 U_+")
    boundary_case: BoundaryCase = Field(..., description="边界类型")
    theta_est: float = Field(..., description="静止点线性化的最慢稳定衰减率")
    x0: Optional[float] = Field(None, description="驻定激波截断位移")
    x0_candidates: List[float] = Field(default_factory=list, description="全部截断位移候选")
    residual_max: float = Field(0.0, description="积分剖面ODE残差的上确界")
    first_integral_max: float = Field(0.0, description="双曲行首次积分偏差的上确界")
    decay: Optional[DecayCertificate] = Field(None, description="衰减证书")

    @field_validator("grid")
    @classmethod
    def validate_grid(cls, v):
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or v.size < 2 or np.any(np.diff(v) <= 0):
            raise ValueError("网格必须是严格递增的一维数组")
        return v

    @property
    def x_max(self) -> float:
        return float(self.grid[-1])

    @property
    def n(self) -> int:
        return int(self.values.shape[1])

    def with_decay(self, decay: DecayCertificate) -> "Profile":
        return self.model_copy(update={"decay": decay})


# ---------------------------------------------------------------------------
# evans_core
# ---------------------------------------------------------------------------

class SubspacePath(ArrayModel):
    """沿lambda路径解析输运的稳定子空间标架"""
    lambdas: np.ndarray = Field(..., description="路径上的lambda采样")
    frames: np.ndarray = Field(..., description="标架 (M, N, k)")
    k: int = Field(..., description="稳定子空间维数")
    min_gap: float = Field(..., description="路径上 min |Re mu|")


class EvansSample(ArrayModel):
    """单点Evans函数值"""
    lam: complex = Field(..., description="谱参数")
    value: complex = Field(..., description="归一化后的 D(lambda)")
    log_scale: float = Field(..., description="增长归一化的对数尺度")
    steps: int = Field(0, description="积分步数")


class ContourResult(ArrayModel):
    """围道上的Evans函数采样与绕数判定"""
    radius: float = Field(..., gt=0.0, description="外半径 R")
    epsilon: float = Field(..., gt=0.0, description="原点凹陷半径")
    lambdas: np.ndarray = Field(..., description="闭合围道采样点 (逆时针)")
    values: np.ndarray = Field(..., description="D(lambda) 采样")
    log_scales: np.ndarray = Field(..., description="对数尺度")
    winding_number: int = Field(..., description="辐角增量求得的绕数")
    winding_by_crossing: int = Field(..., description="射线穿越法求得的绕数")
    verdict: Verdict = Field(..., description="条件 (D) 判定")
    min_abs: float = Field(..., description="min |D|")
    abs_floor: float = Field(..., description="判零阈值")
    max_arg_step: float = Field(..., description="相邻采样辐角增量的最大值")
    refinements: int = Field(0, description="自适应加密轮数")
    radius_history: List[float] = Field(default_factory=list, description="半径搜索历史")
    near_origin: Optional[complex] = Field(None, description="凹陷上 lambda=eps 处的 D 值")
    notes: List[str] = Field(default_factory=list, description="备注")


# ---------------------------------------------------------------------------
# resolvent_asym
# ---------------------------------------------------------------------------

class ResolventSample(ArrayModel):
    """预解核采样"""
    lam: complex = Field(..., description="谱参数")
    x_nodes: np.ndarray = Field(..., description="x 节点")
    y_nodes: np.ndarray = Field(..., description="y 节点")
    kernel: np.ndarray = Field(..., description="G_lambda(x, y), 形状 (Nx, Ny, n, n)")
    upper_branch: np.ndarray = Field(..., description="x > y 分支标记")
    condition: np.ndarray = Field(..., description="cond(Phi(y))")
    flagged_y: List[int] = Field(default_factory=list, description="病态 y 索引")


class LowFrequencyReport(ArrayModel):
    """低频慢模态展开检验"""
    lambdas: np.ndarray = Field(..., description="采样 |lambda|")
    residuals: np.ndarray = Field(..., description="展开残差")
    order: float = Field(..., description="拟合残差阶数")
    slow_modes: np.ndarray = Field(..., description="慢特征值 (M, n)")
    fast_modes: np.ndarray = Field(..., description="快特征值 (M, n-1)")
    fast_min_modulus: float = Field(..., description="lambda=0 处快模态最小模")
    kernel_alignment: float = Field(..., description="lambda=0 零空间与 (r_j, 0) 的偏差")


class HighFrequencyReport(BaseModel):
    """高频结构检验"""
    moduli: List[float] = Field(default_factory=list, description="|lambda| 采样")
    hyperbolic_relative_error: List[float] = Field(default_factory=list, description="流入: G 与 H 的相对误差")
    outflow_ratio: List[float] = Field(default_factory=list, description="流出: 双曲分量与参考幅度之比")
    diagonal_exponent: Optional[float] = Field(None, description="|G_vv(y,y)| 关于 |lambda| 的拟合指数")
    envelope_ratio: List[float] = Field(default_factory=list, description="包络衰减率与模板之比")
    raw: Dict[str, Any] = Field(default_factory=dict, description="原始拟合数据")
    notes: List[str] = Field(default_factory=list, description="备注")


# ---------------------------------------------------------------------------
# halfline_sim
# ---------------------------------------------------------------------------

class Snapshots(ArrayModel):
    """模拟快照"""
    mode: Literal["linear", "nonlinear"] = Field(..., description="演化模式")
    times: np.ndarray = Field(..., description="快照时刻")
    centers: np.ndarray = Field(..., description="单元中心")
    values: np.ndarray = Field(..., description="解 (T, M, n)")
    perturbation: np.ndarray = Field(..., description="扰动 (T, M, n)")
    h: float = Field(..., description="网格步长")
    dt: float = Field(..., description="时间步长")
    boundary_flux: np.ndarray = Field(..., description="累计边界通量 (T, 2, n): 左/右")
    valid_until: float = Field(..., description="截断区域有效时间")


class DecayFit(BaseModel):
    """L^p 衰减率拟合"""
    p: float = Field(..., description="范数指数 p")
    exponent: float = Field(..., description="拟合指数")
    intercept: float = Field(..., description="拟合截距")
    target: float = Field(..., description="理论指数 -(1 - 1/p)/2")
    window: List[float] = Field(default_factory=list, description="拟合时间窗口")
    low_confidence: bool = Field(default=False, description="范数非单调")


class CharacteristicPath(ArrayModel):
    """反向特征线"""
    x: float = Field(..., description="终点位置")
    t: float = Field(..., description="终点时间")
    times: np.ndarray = Field(..., description="路径时间")
    positions: np.ndarray = Field(..., description="路径位置 z_*(s)")
    a_bar: float = Field(..., description="平均速度")
    z0: float = Field(..., description="z_*(0)")
    z0_quadrature: Optional[float] = Field(None, description="积分法求得的 z_*(0)")
    boundary_crossing_time: Optional[float] = Field(None, description="穿越边界时刻")


class ProbeReport(ArrayModel):
    """Green函数探针报告"""
    y: float = Field(..., description="探针位置")
    width: float = Field(..., description="初值高斯宽度")
    times: np.ndarray = Field(..., description="探测时刻")
    predicted_positions: np.ndarray = Field(..., description="特征线预测位置")
    measured_positions: np.ndarray = Field(..., description="测得尖峰位置")
    measured_mass: np.ndarray = Field(..., description="测得尖峰质量")
    predicted_mass: np.ndarray = Field(..., description="预测质量 exp(-int eta/A)")
    density_factor: np.ndarray = Field(..., description="A_*(x)^{-1} A_*(y) exp(-int eta/A)")
    residual_sup: np.ndarray = Field(..., description="去除尖峰后残差上确界")
    template_ratio: np.ndarray = Field(..., description="残差与模板包络之比的上确界")
    M: float = Field(..., description="模板常数")
    notes: List[str] = Field(default_factory=list, description="备注")


# ---------------------------------------------------------------------------
# cli / pipeline
# ---------------------------------------------------------------------------

class StageResult(BaseModel):
    """单个阶段的执行结果"""
    name: str = Field(..., description="阶段名")
    status: StageStatus = Field(..., description="状态")
    error_message: Optional[str] = Field(None, description="错误信息")
    started_at: Optional[datetime] = Field(None, description="开始时间")
    completed_at: Optional[datetime] = Field(None, description="完成时间")
    artifacts: Dict[str, str] = Field(default_factory=dict, description="产物路径")
    summary: Dict[str, Any] = Field(default_factory=dict, description="摘要")


class RunManifest(BaseModel):
    """运行清单"""
    config_path: str = Field(..., description="配置文件路径")
    config_hash: str = Field(..., description="配置哈希 (sha256)")
    versions: Dict[str, str] = Field(default_factory=dict, description="软件版本")
    stages: List[StageResult] = Field(default_factory=list, description="阶段结果")
    artifacts: Dict[str, str] = Field(default_factory=dict, description="全部产物路径")
    verdicts: Dict[str, Any] = Field(default_factory=dict, description="判定汇总")
    notes: List[str] = Field(default_factory=list, description="备注")
    created_at: datetime = Field(default_factory=datetime.now, description="创建时间")

    def stage(self, name: str) -> Optional[StageResult]:
        for stage in self.stages:
            if stage.name == name:
                return stage
        return None


# ---------------------------------------------------------------------------
# 配置模型
# ---------------------------------------------------------------------------

class SectionModel(BaseModel):
    """配置段基类: 禁止未知字段"""
    model_config = ConfigDict(extra="forbid")


class ModelConfig(SectionModel):
    """模型配置"""
    preset: Optional[str] = Field(None, description="内置系统名称")
    kind: Optional[Literal["isentropic", "burgers_embedding", "linear"]] = Field(None, description="模型类型")
    boundary_case: Optional[BoundaryCase] = Field(None, description="边界类型")
    params: Dict[str, float] = Field(default_factory=dict, description="模型参数")
    u_plus: Optional[List[float]] = Field(None, description="远场状态")
    u_boundary: Optional[List[float]] = Field(None, description="边界目标值")
    flux_matrix: Optional[List[List[float]]] = Field(None, description="线性模型通量矩阵")
    viscosity_matrix: Optional[List[List[float]]] = Field(None, description="线性模型粘性矩阵")

    @model_validator(mode="after")
    def check_source(self):
        if self.preset is None and self.kind is None:
            raise ValueError("必须提供 preset 或 kind")
        return self


class ProfileConfig(SectionModel):
    """剖面求解配置"""
    x_max: Optional[float] = Field(None, gt=0.0, description="截断长度, 默认 30/theta_est")
    decay_factor: float = Field(30.0, gt=0.0, description="X_max = decay_factor / theta_est")
    rtol: float = Field(1e-11, gt=0.0, description="积分相对容差")
    atol: float = Field(1e-13, gt=0.0, description="积分绝对容差")
    first_spacing: float = Field(1e-3, gt=0.0, description="边界处首个网格间距")
    growth_ratio: float = Field(1.05, gt=1.0, description="几何网格增长比")
    tail_cells: int = Field(600, ge=10, description="均匀尾部单元数")
    k_max: int = Field(2, ge=0, le=2, description="衰减证书的最高导数阶数")


class EvansConfig(SectionModel):
    """Evans函数围道配置"""
    radius: Optional[float] = Field(None, description="外半径, 空表示自动搜索")
    radius_initial: float = Field(2.0, gt=0.0, description="自动搜索初始半径")
    radius_max: float = Field(256.0, gt=0.0, description="自动搜索最大半径")
    n_min: int = Field(64, ge=8, description="上半围道最少采样数")
    epsilon_factor: float = Field(1e-4, gt=0.0, description="凹陷半径 eps = factor * R")
    gap_min: float = Field(1e-8, gt=0.0, description="一致分裂的谱隙下界")
    abs_floor_rel: float = Field(1e-10, gt=0.0, description="判零阈值 (相对 median|D|)")
    max_refinements: int = Field(12, ge=0, description="最大加密轮数")
    kato_rel: float = Field(0.05, gt=0.0, description="Kato 输运子步的相对步长")
    step_factor: float = Field(0.5, gt=0.0, description="Magnus 步长因子")
    x_max: Optional[float] = Field(None, gt=0.0, description="特征系统截断长度覆盖")
    analyticity_check: bool = Field(False, description="是否做辐角原理解析性检查")
    x_max_check: bool = Field(False, description="是否做 X_max 无关性检查")
    operator_check: bool = Field(False, description="是否做离散算子特征值交叉验证")
    operator_h: float = Field(0.5, gt=0.0, description="离散算子网格步长")
    operator_length: float = Field(40.0, gt=0.0, description="离散算子区域长度")

    @field_validator("radius")
    @classmethod
    def validate_radius(cls, v):
        if v is not None and v <= 0:
            raise ValueError("半径必须为正数")
        return v


def _parse_complex(value: Any) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(" ", "").replace("i", "j"))
    return complex(value)


class ResolventConfig(SectionModel):
    """预解核检验配置"""
    lambdas: List[Any] = Field(default_factory=lambda: [[0.1, 0.0], [1.0, 0.0], [10.0, 0.0]],
                               description="检验用 lambda, 形如 [re, im]")
    x_nodes: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0], description="x 节点")
    y_nodes: List[float] = Field(default_factory=lambda: [1.5, 3.0], description="y 节点")
    x_max: Optional[float] = Field(None, gt=0.0, description="特征系统截断长度覆盖")
    cond_max: float = Field(1e10, gt=0.0, description="Phi(y) 条件数上限")
    duality_trials: int = Field(10, ge=0, description="对偶不变量随机试验次数")
    direct_oracle: bool = Field(True, description="是否做稀疏直接求解对照")
    oracle_h: float = Field(0.01, gt=0.0, description="直接求解最大网格步长")
    low_frequency: List[float] = Field(default_factory=lambda: [1e-3, 1e-1], description="低频扫描区间, 以 min|a_j^+| 为单位")
    low_frequency_samples: int = Field(12, ge=3, description="低频采样数")
    high_frequency: List[float] = Field(default_factory=lambda: [1e2, 1e3], description="高频扫描区间")
    high_frequency_samples: int = Field(4, ge=2, description="高频采样数")
    ilt_points: List[List[float]] = Field(default_factory=list, description="ILT 检验点 [x, t, y]")
    seed: int = Field(2024, description="随机种子")

    @field_validator("lambdas")
    @classmethod
    def validate_lambdas(cls, v):
        return [_parse_complex(item) for item in v]

    @field_validator("low_frequency", "high_frequency")
    @classmethod
    def validate_range(cls, v):
        if len(v) != 2 or not (0 < v[0] < v[1]):
            raise ValueError("区间必须是 [a, b], 0 < a < b")
        return v


class ForcingConfig(SectionModel):
    """边界扰动配置"""
    kind: Literal["algebraic", "tabulated", "none"] = Field("algebraic", description="扰动类型")
    amplitude: float = Field(1e-3, description="E_0")
    direction: Optional[List[float]] = Field(None, description="扰动方向 (长度 n)")
    times: Optional[List[float]] = Field(None, description="表格时刻")
    samples: Optional[List[List[float]]] = Field(None, description="表格值")


class ProbeConfig(SectionModel):
    """Green函数探针配置"""
    y: List[float] = Field(default_factory=lambda: [2.0], description="探针位置")
    times: List[float] = Field(default_factory=lambda: [0.5, 1.0, 1.5], description="探测时刻")
    width_factor: float = Field(4.0, gt=0.0, description="w = width_factor * h")
    h: float = Field(0.005, gt=0.0, description="探针模拟网格步长")


def _parse_p(value: Any) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "∞"):
        return math.inf
    return float(value)


class SimulationConfig(SectionModel):
    """半直线模拟配置"""
    h: float = Field(0.5, gt=0.0, description="网格步长")
    x_dom: Optional[float] = Field(None, gt=0.0, description="计算区域长度")
    t_final: float = Field(200.0, gt=0.0, description="终止时间")
    cfl: float = Field(0.45, gt=0.0, le=0.9, description="CFL 因子")
    dt: Optional[float] = Field(None, gt=0.0, description="显式给定时间步长")
    snapshots: int = Field(60, ge=2, description="快照数量")
    amplitude: float = Field(1e-3, description="初始扰动幅度")
    center: float = Field(10.0, ge=0.0, description="初始扰动中心")
    width: float = Field(2.0, gt=0.0, description="初始扰动宽度")
    p_list: List[Any] = Field(default_factory=lambda: [1, 2, "inf"], description="衰减率范数")
    forcing: Optional[ForcingConfig] = Field(None, description="边界扰动")
    probe: Optional[ProbeConfig] = Field(None, description="Green函数探针")
    nonlinear: bool = Field(False, description="是否运行非线性演化")

    @field_validator("p_list")
    @classmethod
    def validate_p_list(cls, v):
        parsed = [_parse_p(item) for item in v]
        if any(p < 1 for p in parsed):
            raise ValueError("p 必须 >= 1")
        return parsed


class OutputConfig(SectionModel):
    """输出配置"""
    directory: str = Field("output", description="输出目录")
    csv_delimiter: str = Field(",", description="CSV 分隔符")
    plots: bool = Field(True, description="是否生成 SVG 图")


class LoggingConfig(SectionModel):
    """日志配置"""
    level: str = Field("INFO", description="日志级别")
    file: Optional[str] = Field(None, description="日志文件")
    max_bytes: int = Field(10 * 1024 * 1024, gt=0, description="单个日志文件上限")
    backup_count: int = Field(5, ge=0, description="轮转份数")


class PipelineConfig(SectionModel):
    """流水线配置"""
    stages: List[str] = Field(default_factory=lambda: list(STAGE_ORDER), description="执行阶段")
    threads: int = Field(4, ge=1, description="线程数")

    @field_validator("stages")
    @classmethod
    def validate_stages(cls, v):
        unknown = [stage for stage in v if stage not in STAGE_ORDER]
        if unknown:
            raise ValueError(f"未知阶段: {unknown}")
        return v


class RunConfig(SectionModel):
    """完整运行配置"""
    model: ModelConfig = Field(..., description="模型")
    profile: ProfileConfig = Field(default_factory=ProfileConfig)
    evans: EvansConfig = Field(default_factory=EvansConfig)
    resolvent: ResolventConfig = Field(default_factory=ResolventConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)


def to_serializable(value: Any) -> Any:
    """把 numpy / complex / pydantic 值转换为 JSON 可写对象"""
    if isinstance(value, BaseModel):
        return {key: to_serializable(getattr(value, key)) for key in type(value).model_fields}
    if isinstance(value, dict):
        return {str(key): to_serializable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_serializable(item) for item in value]
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return {"real": value.real.tolist(), "imag": value.imag.tolist()}
        return value.tolist()
    if isinstance(value, (complex, np.complexfloating)):
        return [float(np.real(value)), float(np.imag(value))]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, datetime):
        return value.isoformat()
    return value


