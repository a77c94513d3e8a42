from __future__ import annotations

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

CStateLabel = Literal["C0", "C2", "C3", "C6", "C7", "C8", "C9", "C10"]
_DEPTH = ["C0", "C2", "C3", "C6", "C7", "C8", "C9", "C10"]


class PlatformSection(BaseModel):
    segment: Literal["desktop", "mobile"] = "desktop"
    fuse: Literal[0, 1] = Field(default=1, description="1 selects bypass mode, 0 normal mode")
    mode: Literal["fuse", "normal", "bypass"] = Field(
        default="fuse", description="Override the fuse-selected mode (fuse keeps the fuse decision)"
    )
    tdp_w: float = Field(default=91.0, gt=0)
    c8_enabled: bool = Field(default=True, description="Desktop package C8 support")
    package_cap: Optional[CStateLabel] = Field(default=None, description="Explicit cap; derived from segment if unset")

    @field_validator("package_cap", mode="before")
    @classmethod
    def _normalize_cap(cls, v: object) -> object:
        if isinstance(v, int):
            return f"C{v}"
        if isinstance(v, str):
            return v.strip().upper()
        return v


class StageSection(BaseModel):
    name: str = ""
    series_resistance_mohm: float = Field(..., ge=0)
    series_inductance_ph: float = Field(default=0.0, ge=0)
    shunt_cap_uf: float = Field(default=0.0, ge=0)
    cap_esr_mohm: float = Field(default=0.0, ge=0)
    cap_esl_ph: float = Field(default=0.0, ge=0)


class CoreBranchSection(BaseModel):
    gate_resistance_mohm: float = Field(default=2.0, gt=0)
    die_grid_resistance_mohm: float = Field(default=0.8, ge=0)
    mim_cap_nf: float = Field(default=5.0, ge=0)
    mim_esr_mohm: float = Field(default=1.0, ge=0)


class SweepSection(BaseModel):
    f_min_hz: float = Field(default=1e3, gt=0)
    f_max_hz: float = Field(default=1e9, gt=0)
    points: int = Field(default=400, ge=2)
    spacing: Literal["log", "linear"] = "log"

    @model_validator(mode="after")
    def _ordered(self) -> "SweepSection":
        if self.f_min_hz >= self.f_max_hz:
            raise ValueError("f_min_hz must be below f_max_hz")
        return self


class PdnSection(BaseModel):
    vr_output_resistance_mohm: float = Field(default=0.5, ge=0)
    stages: List[StageSection] = Field(..., min_length=1)
    cores: int = Field(default=4, ge=1)
    core: CoreBranchSection = Field(default_factory=CoreBranchSection)
    sweep: SweepSection = Field(default_factory=SweepSection)


class VirusLevelRow(BaseModel):
    level: int = Field(..., ge=1)
    icc_virus_a: float = Field(..., gt=0)
    delta_v_mv: Optional[float] = Field(default=None, ge=0, description="Derived from the load-line when unset")
    max_freq_mhz: Optional[float] = Field(default=None, gt=0, description="Turbo ratio limit at this level")


class ReliabilityAdderSection(BaseModel):
    tdp_low_w: float = Field(default=35.0, gt=0)
    adder_low_mv: float = Field(default=20.0, ge=0)
    tdp_high_w: float = Field(default=91.0, gt=0)
    adder_high_mv: float = Field(default=5.0, ge=0)

    @model_validator(mode="after")
    def _ordered(self) -> "ReliabilityAdderSection":
        if self.tdp_low_w >= self.tdp_high_w:
            raise ValueError("tdp_low_w must be below tdp_high_w")
        return self


class GuardbandSection(BaseModel):
    r_ll_mohm: float = Field(default=2.0, gt=0)
    vcc_min_mv: float = Field(default=700.0, gt=0)
    droop_fraction: float = Field(default=0.4, ge=0, le=1, description="droop step as a share of icc_virus")
    droop_delta_i_a: Optional[float] = Field(
        default=None, ge=0, description="Fixed droop step; overrides droop_fraction"
    )
    reliability_adder: ReliabilityAdderSection = Field(default_factory=ReliabilityAdderSection)
    levels: List[VirusLevelRow] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _levels_increasing(self) -> "GuardbandSection":
        rows = sorted(self.levels, key=lambda r: r.level)
        for low, high in zip(rows, rows[1:]):
            if high.level == low.level:
                raise ValueError(f"duplicate virus level {high.level}")
            if high.icc_virus_a <= low.icc_virus_a:
                raise ValueError("icc_virus_a must increase with level")
        return self


class KnotRow(BaseModel):
    freq_mhz: float = Field(..., gt=0)
    vnom_mv: float = Field(..., gt=0)


class CurveSection(BaseModel):
    bin_mhz: float = Field(default=100.0, gt=0)
    knots: List[KnotRow] = Field(..., min_length=2)

    @model_validator(mode="after")
    def _monotone(self) -> "CurveSection":
        first = self.knots[0].freq_mhz / self.bin_mhz
        if abs(first - round(first)) > 1e-9:
            raise ValueError(f"first knot {self.knots[0].freq_mhz} MHz is not on the {self.bin_mhz} MHz bin grid")
        for a, b in zip(self.knots, self.knots[1:]):
            if b.freq_mhz <= a.freq_mhz:
                raise ValueError("knot frequencies must be strictly increasing")
            if b.vnom_mv < a.vnom_mv:
                raise ValueError("knot voltages must be non-decreasing")
        return self


class LimitsSection(BaseModel):
    tdc_a: float = Field(default=66.0, gt=0)
    edc_a: float = Field(default=100.0, gt=0)
    vmax_mv: float = Field(default=1308.0, gt=0)
    vmin_mv: float = Field(default=600.0, gt=0)
    tdc_window_s: float = Field(default=1.0, gt=0, description="Rolling window for the sustained-current check")

    @model_validator(mode="after")
    def _consistent(self) -> "LimitsSection":
        if self.edc_a < self.tdc_a:
            raise ValueError("edc_a must be at least tdc_a")
        if self.vmin_mv >= self.vmax_mv:
            raise ValueError("vmin_mv must be below vmax_mv")
        return self


class CdynRow(BaseModel):
    level: int = Field(..., ge=1)
    cdyn_nf: float = Field(..., gt=0)


class CorePowerSection(BaseModel):
    cdyn: List[CdynRow] = Field(..., min_length=1)
    ilkg_ref_a: float = Field(default=0.5, ge=0)
    v_ref_mv: float = Field(default=1000.0, gt=0)
    lkg_voltage_exponent: float = Field(default=2.0, ge=0)
    gated_residual_fraction: float = Field(default=0.02, ge=0, le=1)


class GraphicsSection(BaseModel):
    curve: CurveSection
    cdyn_nf: float = Field(default=24.0, gt=0)
    ilkg_ref_a: float = Field(default=1.0, ge=0)
    v_ref_mv: float = Field(default=1000.0, gt=0)
    lkg_voltage_exponent: float = Field(default=2.0, ge=0)


class PmuSection(BaseModel):
    uncore_reserve_w: float = Field(default=2.0, ge=0)
    cpu_share_under_graphics: float = Field(default=0.15, ge=0.10, le=0.20)


class CStatePowerRow(BaseModel):
    state: CStateLabel
    normal_w: float = Field(..., ge=0)
    bypass_w: float = Field(..., ge=0)


class CStateLatencyRow(BaseModel):
    state: CStateLabel
    entry_us: float = Field(..., ge=0)
    exit_us: float = Field(..., ge=0)


class CStatesSection(BaseModel):
    ungate_latency_ns: float = Field(default=15.0, ge=10, le=20)
    min_c7_leakage_ratio: float = Field(default=3.0, ge=0, description="Required Bypass/Normal power ratio at C7")
    power: List[CStatePowerRow] = Field(..., min_length=1)
    latency: List[CStateLatencyRow] = Field(..., min_length=1)

    @field_validator("power", "latency", mode="before")
    @classmethod
    def _upper_states(cls, v: object) -> object:
        if isinstance(v, list):
            for row in v:
                if isinstance(row, dict) and isinstance(row.get("state"), str):
                    row["state"] = row["state"].strip().upper()
        return v

    @model_validator(mode="after")
    def _tables(self) -> "CStatesSection":
        states = [row.state for row in self.power]
        missing = [s for s in _DEPTH if s not in states]
        if missing:
            raise ValueError(f"power table is missing {', '.join(missing)}")
        latency_states = {row.state for row in self.latency}
        missing = [s for s in _DEPTH[1:] if s not in latency_states]
        if missing:
            raise ValueError(f"latency table is missing {', '.join(missing)}")
        exits = [row.exit_us for row in sorted(self.latency, key=lambda r: _DEPTH.index(r.state))]
        if any(b < a for a, b in zip(exits, exits[1:])):
            raise ValueError("exit_us must not decrease with C-state depth")
        rows = sorted(self.power, key=lambda r: _DEPTH.index(r.state))
        for column in ("normal_w", "bypass_w"):
            values = [getattr(r, column) for r in rows]
            if any(b >= a for a, b in zip(values, values[1:])):
                raise ValueError(f"{column} must strictly decrease with C-state depth")
        c7 = next(r for r in rows if r.state == "C7")
        if c7.bypass_w <= self.min_c7_leakage_ratio * c7.normal_w:
            raise ValueError(
                f"C7 bypass power {c7.bypass_w} W must exceed {self.min_c7_leakage_ratio}x normal ({c7.normal_w} W)"
            )
        return self


class SimSection(BaseModel):
    interval_ms: float = Field(default=1.0, gt=0)


class SuiteEntryRow(BaseModel):
    name: str
    mem_fraction: float = Field(..., ge=0, le=1)


class WorkloadsSection(BaseModel):
    intervals: int = Field(default=200, ge=1, description="Intervals per generated SPEC/graphics trace")
    jitter: float = Field(default=0.01, ge=0, le=0.5)
    graphics_core_activity: float = Field(default=0.2, gt=0, le=1)
    rmt_intervals: int = Field(default=10000, ge=1)
    rmt_active_every: int = Field(default=100, ge=1)
    energy_star_intervals: int = Field(default=1000, ge=1)
    energy_star_mix: Dict[Literal["off", "sleep", "long_idle", "short_idle"], float] = Field(
        default_factory=lambda: {"off": 0.45, "sleep": 0.05, "long_idle": 0.15, "short_idle": 0.35}
    )
    suite: List[SuiteEntryRow] = Field(default_factory=list)
    tdps: List[float] = Field(default_factory=lambda: [35.0, 45.0, 65.0, 91.0])
    seed: int = 0

    @field_validator("energy_star_mix", mode="before")
    @classmethod
    def _unquoted_off(cls, value: object) -> object:
        # YAML 1.1 loads a bare `off:` key as False.
        if isinstance(value, dict):
            return {("off" if key is False else key): share for key, share in value.items()}
        return value

    @model_validator(mode="after")
    def _mix_sums_to_one(self) -> "WorkloadsSection":
        if abs(sum(self.energy_star_mix.values()) - 1.0) > 1e-6:
            raise ValueError("energy_star_mix must sum to 1")
        return self


class AppConfig(BaseModel):
    platform: PlatformSection = Field(default_factory=PlatformSection)
    pdn: PdnSection
    guardband: GuardbandSection
    curve: CurveSection
    limits: LimitsSection = Field(default_factory=LimitsSection)
    power: CorePowerSection
    graphics: GraphicsSection
    pmu: PmuSection = Field(default_factory=PmuSection)
    cstates: CStatesSection
    sim: SimSection = Field(default_factory=SimSection)
    workloads: WorkloadsSection = Field(default_factory=WorkloadsSection)

    @model_validator(mode="after")
    def _cross_section(self) -> "AppConfig":
        lowest = min(k.vnom_mv for k in self.curve.knots)
        if lowest < self.limits.vmin_mv:
            raise ValueError(f"curve knot at {lowest} mV is below vmin_mv {self.limits.vmin_mv}")
        levels = {row.level for row in self.guardband.levels}
        cdyn_levels = {row.level for row in self.power.cdyn}
        if levels != cdyn_levels:
            raise ValueError(f"power.cdyn levels {sorted(cdyn_levels)} do not match guardband levels {sorted(levels)}")
        lo, hi = self.guardband.reliability_adder.tdp_low_w, self.guardband.reliability_adder.tdp_high_w
        for tdp in [self.platform.tdp_w, *self.workloads.tdps]:
            if not lo <= tdp <= hi:
                raise ValueError(f"TDP {tdp} W is outside the reliability-adder range [{lo}, {hi}] W")
        return self
