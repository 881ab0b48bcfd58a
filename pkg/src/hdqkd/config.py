"""JSON run configuration with unit-suffixed keys.

Everything is converted to SI at this boundary; the rest of the package
never sees ps, GHz or km-based quantities except ``distance_km``.
"""
from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .channel import LinkParams
from .errors import DomainError
from .interferometry import DEFAULT_VISIBILITY_MULTIPLIER, DetectorParams, InterferometerParams
from .rate import ProtocolParams
from .source import SourceParams

PS = 1e-12
GHZ = 1e9


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SourceSection(_Section):
    frame_duration_ps: float = Field(480.0, gt=0)
    phase_matching_bandwidth_ghz: float = Field(200.0, gt=0)
    mean_pairs_per_frame: float = Field(0.01, ge=0)


class DetectorSection(_Section):
    timing_jitter_ps: float = Field(30.0, ge=0)
    efficiency_alice: float = Field(0.15, ge=0, le=1)
    efficiency_bob: float = Field(0.15, ge=0, le=1)
    dark_rate_per_s: float = Field(1e3, ge=0)


class InterferometerSection(_Section):
    """Franson delay and dispersion default to sqrt(2) T_g and sqrt(2) T_g / Delta_Omega."""

    gate_ps: float = Field(108.0, gt=0)
    delta_omega_ghz: float = Field(5.0, gt=0, description="Delta_Omega / 2 pi")
    delta_t_ps: Optional[float] = Field(None, gt=0)
    beta2_ps2_per_rad: Optional[float] = Field(None, gt=0)


class NoiseSection(_Section):
    visibility_multiplier: float = Field(DEFAULT_VISIBILITY_MULTIPLIER, gt=0, le=1)
    # Measured visibilities; when absent, ideal Gaussian values times the multiplier.
    franson_visibility: Optional[float] = Field(None, ge=-1, le=1)
    cfi_visibility: Optional[float] = Field(None, ge=-1, le=1)
    fourth_moment_time_s4: Optional[float] = Field(None, ge=0)
    fourth_moment_freq_rad4_per_s4: Optional[float] = Field(None, ge=0)
    xi_t_source: Literal["cfi", "raw", "override"] = "cfi"
    xi_t_override: Optional[float] = Field(None, ge=-1)
    xi_omega_override: Optional[float] = Field(None, ge=-1)

    @model_validator(mode="after")
    def _override_present(self):
        if self.xi_t_source == "override" and self.xi_t_override is None:
            raise ValueError("xi_t_source = 'override' requires xi_t_override")
        return self


class SweepSection(_Section):
    start_km: float = Field(0.0, ge=0)
    stop_km: float = Field(250.0, ge=0)
    step_km: float = Field(10.0, gt=0)

    def distances(self) -> list[float]:
        if self.stop_km < self.start_km:
            return []
        n = int(math.floor((self.stop_km - self.start_km) / self.step_km + 1e-9)) + 1
        return [self.start_km + i * self.step_km for i in range(n)]


class LinkSection(_Section):
    loss_db_per_km: float = Field(0.2, ge=0)
    distance_km: float = Field(0.0, ge=0)
    sweep: SweepSection = SweepSection()
    # Explicit list wins over the range when given.
    distances_km: Optional[list[float]] = None

    @model_validator(mode="after")
    def _sorted(self):
        if self.distances_km is not None:
            if any(d < 0 for d in self.distances_km):
                raise ValueError("distances_km must be nonnegative")
            if list(self.distances_km) != sorted(self.distances_km):
                raise ValueError("distances_km must be sorted ascending")
        return self


class ProtocolSection(_Section):
    key_fraction: float = Field(0.5, gt=0, le=1)
    reconciliation_efficiency: float = Field(0.9, gt=0, le=1)
    bits_per_frame: int = Field(8, gt=0)
    mi_model: Literal["gamma_star", "nominal"] = "gamma_star"


class OptimizerSection(_Section):
    grid_points: int = Field(21, ge=2)
    refine_starts: int = Field(5, ge=0)
    tol_bits: float = Field(1e-4, gt=0)


class MonteCarloSection(_Section):
    seed: int = Field(20240601, ge=0, lt=2**64)
    n_samples: int = Field(1_000_000, ge=1)
    n_frames: int = Field(10_000_000, ge=1)
    mi_bins: int = Field(64, ge=2)


class RunConfig(_Section):
    schema_version: Literal[1] = Field(1, alias="schema")
    name: str = "default"
    source: SourceSection = SourceSection()
    detector: DetectorSection = DetectorSection()
    interferometer: InterferometerSection = InterferometerSection()
    noise: NoiseSection = NoiseSection()
    link: LinkSection = LinkSection()
    protocol: ProtocolSection = ProtocolSection()
    optimizer: OptimizerSection = OptimizerSection()
    montecarlo: MonteCarloSection = MonteCarloSection()

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    # SI conversions

    def source_params(self) -> SourceParams:
        s = self.source
        return SourceParams(s.frame_duration_ps * PS, s.phase_matching_bandwidth_ghz * GHZ, s.mean_pairs_per_frame)

    def detector_params(self) -> DetectorParams:
        d = self.detector
        return DetectorParams(
            timing_jitter=d.timing_jitter_ps * PS,
            efficiency_alice=d.efficiency_alice,
            efficiency_bob=d.efficiency_bob,
            dark_rate=d.dark_rate_per_s,
            gate=self.interferometer.gate_ps * PS,
        )

    def interferometer_params(self) -> InterferometerParams:
        i = self.interferometer
        base = InterferometerParams.from_gate(i.gate_ps * PS, 2.0 * math.pi * i.delta_omega_ghz * GHZ)
        return InterferometerParams(
            delta_t=base.delta_t if i.delta_t_ps is None else i.delta_t_ps * PS,
            delta_omega=base.delta_omega,
            beta2=base.beta2 if i.beta2_ps2_per_rad is None else i.beta2_ps2_per_rad * PS**2,
            gate=base.gate,
        )

    def protocol_params(self) -> ProtocolParams:
        p = self.protocol
        return ProtocolParams(p.key_fraction, p.reconciliation_efficiency, p.bits_per_frame)

    def link_params(self, distance_km: float | None = None) -> LinkParams:
        d = self.link.distance_km if distance_km is None else distance_km
        return LinkParams(distance_km=d, loss_db_per_km=self.link.loss_db_per_km)

    def distances(self) -> list[float]:
        if self.link.distances_km is not None:
            return list(self.link.distances_km)
        return self.link.sweep.distances()

    def with_updates(self, **sections) -> RunConfig:
        """Copy with whole sections or top-level fields replaced, revalidated."""
        data = self.model_dump(by_alias=True)
        for key, value in sections.items():
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return parse_config(data)


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> RunConfig:
    """Validate a decoded JSON document; errors name the offending keys."""
    if not isinstance(data, dict):
        raise DomainError("configuration must be a JSON object")
    if data.get("schema") != 1:
        raise DomainError(f"unsupported or missing schema version {data.get('schema')!r}; expected 1", field="schema")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]["loc"]
        raise DomainError(_format_errors(exc), field=".".join(str(p) for p in first)) from None


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DomainError(f"cannot read configuration {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(data)


def builtin_names() -> list[str]:
    root = resources.files("hdqkd") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def builtin_config(name: str) -> RunConfig:
    """One of the shipped configurations, e.g. ``fig2_blue_solid``."""
    root = resources.files("hdqkd") / "configs"
    f = root / f"{name}.json"
    if not f.is_file():
        raise DomainError(f"unknown builtin config {name!r}; available: {', '.join(builtin_names())}")
    return parse_config(json.loads(f.read_text()))


def resolve_config(name: str | None) -> RunConfig:
    """A path, a builtin name, or None for the default configuration."""
    if name is None:
        return builtin_config("default")
    if Path(name).exists():
        return load_config(name)
    if name in builtin_names():
        return builtin_config(name)
    raise DomainError(f"configuration {name!r} is neither a file nor a builtin name")
