"""
Data models for the induced-coherence toolkit.

All physical parameters of the interferometer live here and nowhere else;
every other module reads its symbols from :class:`ExperimentParams` and
:class:`DetectionParams`.
"""

import math
from typing import Any, Dict, Iterator, List, Literal, Mapping, Optional, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    computed_field,
    field_validator,
    model_validator,
)

from .errors import ConfigError, InterferometerError, RangeError

TWO_PI = 2.0 * math.pi

PHASE_FIELDS = (
    "t_phase",
    "gamma_phase",
    "phi_p1",
    "phi_p2",
    "phi_s1",
    "phi_s2",
    "phi_i1",
    "phi_i3",
)


def wrap_phase(value: float) -> float:
    """Reduce a phase to [0, 2π)."""
    wrapped = math.fmod(value, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2π
    return 0.0 if wrapped >= TWO_PI else wrapped


def gain_for_v2(v2: float) -> float:
    """Parametric gain G giving a mean photon number sinh²(G) = v2."""
    if v2 < 0.0:
        raise RangeError("v2", v2, "[0, inf)")
    return math.asinh(math.sqrt(v2))


class ExperimentParams(BaseModel):
    """Physical parameters of the two-crystal interferometer."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    gain: float = Field(default=0.1, ge=0.0, description="Parametric gain G = σL")
    t_mag: float = Field(
        default=1.0, ge=0.0, le=1.0, description="Idler loss transmission |t|"
    )
    t_phase: float = Field(default=0.0, description="arg(t) in radians")
    gamma_mag: float = Field(
        default=1.0, ge=0.0, le=1.0, description="Idler mode overlap |γ|"
    )
    gamma_phase: float = Field(default=0.0, description="arg(γ) in radians")
    phi_p1: float = Field(default=0.0, description="Pump phase at the first crystal")
    phi_p2: float = Field(default=0.0, description="Pump phase at the second crystal")
    phi_s1: float = Field(default=0.0, description="Propagation phase of signal s1")
    phi_s2: float = Field(default=0.0, description="Propagation phase of signal s2")
    phi_i1: float = Field(default=0.0, description="Propagation phase of idler i1")
    phi_i3: float = Field(default=0.0, description="Propagation phase of idler i3")
    k_s: float = Field(default=0.0, description="Signal wavenumber (rad/m)")
    k_i: float = Field(default=0.0, description="Idler wavenumber (rad/m)")
    crystal_length: float = Field(
        default=0.02, ge=0.0, description="Crystal length L (m)"
    )

    @model_validator(mode="before")
    @classmethod
    def _accept_v2(cls, data: Any) -> Any:
        # v2 is derived; it may be supplied instead of the gain, never alongside
        # a different one.
        if not isinstance(data, Mapping) or "v2" not in data:
            return data
        data = dict(data)
        raw = data.pop("v2")
        try:
            v2 = float(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"v2 must be a number, got {raw!r}", {"field": "v2"})
        if not math.isfinite(v2) or v2 < 0.0:
            raise RangeError("v2", v2, "[0, inf)")
        if "gain" not in data:
            data["gain"] = gain_for_v2(v2)
        elif not math.isclose(
            math.sinh(float(data["gain"])) ** 2, v2, rel_tol=1e-9, abs_tol=1e-15
        ):
            raise RangeError("v2", v2, f"sinh²(gain) for gain={data['gain']}")
        return data

    @field_validator(*PHASE_FIELDS, mode="after")
    @classmethod
    def _wrap(cls, value: float) -> float:
        return wrap_phase(value)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def v2(self) -> float:
        """Mean photon number per mode |V|² = sinh²(G)."""
        return math.sinh(self.gain) ** 2

    @property
    def u2(self) -> float:
        """|U|² = cosh²(G)."""
        return math.cosh(self.gain) ** 2

    @property
    def r_mag(self) -> float:
        """Loss amplitude |r| = √(1 − |t|²)."""
        return math.sqrt(max(0.0, 1.0 - self.t_mag**2))

    @property
    def t(self) -> complex:
        return self.t_mag * complex(math.cos(self.t_phase), math.sin(self.t_phase))

    @property
    def gamma(self) -> complex:
        return self.gamma_mag * complex(
            math.cos(self.gamma_phase), math.sin(self.gamma_phase)
        )

    def with_v2(self, v2: float) -> "ExperimentParams":
        """Copy with the gain set so that sinh²(G) = v2."""
        return self.replace(gain=gain_for_v2(v2))

    def replace(self, **changes: Any) -> "ExperimentParams":
        """Validated copy with some fields changed."""
        data = self.model_dump(exclude={"v2"})
        data.update(changes)
        return validate(data)


class DetectionParams(BaseModel):
    """Detection and counting parameters of the coincidence measurement."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    t_window: float = Field(default=2.5e-9, gt=0.0, description="Window T_R (s)")
    t_coherence: float = Field(
        default=580e-15, gt=0.0, description="Signal-idler coherence time T_c (s)"
    )
    rate_signal: float = Field(
        default=2000.0, ge=0.0, description="Target signal singles rate R_m (Hz)"
    )
    rate_idler: float = Field(
        default=2000.0, ge=0.0, description="Target idler singles rate R_n (Hz)"
    )
    integration_time: float = Field(
        default=30.0, gt=0.0, description="Total counting time (s)"
    )
    eta_signal: float = Field(default=0.6, ge=0.0, le=1.0)
    eta_idler: float = Field(default=0.25, ge=0.0, le=1.0)
    rng_seed: int = Field(default=0, ge=0, le=2**64 - 1)
    coincidence_mode: Literal["gated", "free_running"] = "gated"
    jitter_rms: Optional[float] = Field(
        default=None, gt=0.0, description="Pair jitter RMS (s); defaults to T_c"
    )
    trials: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _coherence_inside_window(self) -> "DetectionParams":
        if not self.t_coherence < self.t_window:
            raise RangeError(
                "t_coherence", self.t_coherence, f"(0, t_window={self.t_window})"
            )
        return self

    @property
    def jitter(self) -> float:
        return self.jitter_rms if self.jitter_rms is not None else self.t_coherence

    def replace(self, **changes: Any) -> "DetectionParams":
        data = self.model_dump()
        data.update(changes)
        return validate_detection(data)


def _allowed_range(model: type, field: str) -> str:
    info = model.model_fields.get(field)  # type: ignore[attr-defined]
    if info is None:
        return "known field"
    low, high = "-inf", "inf"
    low_bracket, high_bracket = "(", ")"
    for constraint in info.metadata:
        if getattr(constraint, "ge", None) is not None:
            low, low_bracket = str(constraint.ge), "["
        elif getattr(constraint, "gt", None) is not None:
            low = str(constraint.gt)
        if getattr(constraint, "le", None) is not None:
            high, high_bracket = str(constraint.le), "]"
        elif getattr(constraint, "lt", None) is not None:
            high = str(constraint.lt)
    return f"{low_bracket}{low}, {high}{high_bracket}"


def _translate(model: type, exc: ValidationError) -> InterferometerError:
    error = exc.errors()[0]
    original = (error.get("ctx") or {}).get("error")
    if isinstance(original, InterferometerError):
        return original
    field = str(error["loc"][0]) if error["loc"] else "<params>"
    if error["type"] == "extra_forbidden":
        return ConfigError(f"unknown key '{field}'", {"field": field})
    if error["type"] == "literal_error":
        expected = (error.get("ctx") or {}).get("expected")
        return ConfigError(
            f"{field} must be one of {expected}, got {error.get('input')!r}",
            {"field": field},
        )
    if error["type"] in ("float_parsing", "int_parsing", "float_type", "int_type"):
        return ConfigError(
            f"{field} must be a number, got {error.get('input')!r}", {"field": field}
        )
    return RangeError(field, error.get("input"), _allowed_range(model, field))


def validate(
    params: Union[ExperimentParams, Mapping[str, Any]],
) -> ExperimentParams:
    """Canonicalize experiment parameters (phases wrapped, v2 recomputed).

    Raises:
        RangeError: naming the offending field, value and allowed range.
        ConfigError: for unknown keys or non-numeric values.
    """
    data = (
        params.model_dump(exclude={"v2"})
        if isinstance(params, ExperimentParams)
        else dict(params)
    )
    try:
        return ExperimentParams.model_validate(data)
    except ValidationError as exc:
        raise _translate(ExperimentParams, exc) from None


def validate_detection(
    params: Union[DetectionParams, Mapping[str, Any]],
) -> DetectionParams:
    """Validate detection parameters; same error contract as :func:`validate`."""
    data = params.model_dump() if isinstance(params, DetectionParams) else dict(params)
    try:
        return DetectionParams.model_validate(data)
    except ValidationError as exc:
        raise _translate(DetectionParams, exc) from None


class G2Pair(BaseModel):
    """Normalized second-order correlations of s1 and s2 with the idler."""

    model_config = ConfigDict(frozen=True)

    g13: float = Field(ge=1.0, description="g2 between signal s1 and idler i3")
    g23: float = Field(ge=1.0, description="g2 between signal s2 and idler i3")

    @property
    def big_gamma_13(self) -> float:
        return self.g13 - 1.0

    @property
    def big_gamma_23(self) -> float:
        return self.g23 - 1.0


class EngineReport(BaseModel):
    """Quantities extracted from the Gaussian moment engine for one setting."""

    params: ExperimentParams
    n_s1: float = Field(description="Mean photons in signal s1")
    n_s2: float = Field(description="Mean photons in signal s2")
    n_i2: float = Field(description="Mean photons in the reflected idler i2")
    n_v3: float = Field(description="Mean photons in idler mode v3")
    n_w3: float = Field(description="Mean photons in idler mode w3")
    g13: float = Field(description="g2(s1, idler bucket)")
    g23: float = Field(description="g2(s2, idler bucket)")
    g12: float = Field(description="|g1(s1, s2)|")
    fringe_visibility: float = Field(description="Visibility of the s1/s2 fringe")
    energy_imbalance: float = Field(description="Δ = |N1 − N2| / (N1 + N2)")

    @property
    def n_i3(self) -> float:
        return self.n_v3 + self.n_w3


class OracleReport(BaseModel):
    """Exact expectations on the truncated Fock space."""

    params: ExperimentParams
    cutoff: int
    basis_size: int
    norm_deficit: float = Field(description="1 − ‖ψ‖² after the whole chain")
    vacuum: bool = Field(description="True when no photons are present (G = 0)")
    singles: Dict[str, float] = Field(description="Mean photons per output mode")
    g13: Optional[float] = None
    g23: Optional[float] = None
    g12: Optional[float] = None
    fringe_visibility: Optional[float] = None


class LowGainAmplitudes(BaseModel):
    """Single-pair sector of the low-gain output state."""

    params: ExperimentParams
    branch_ratios: List[float] = Field(
        description="Normalized |amplitudes| of s1 with i2, v3, w3 (r : tγ : t√(1−γ²))"
    )
    expected_ratios: List[float] = Field(description="Branch ratios of the ideal state")
    overlap: float = Field(description="|<Ψ1|Ψ2>| of the conditional idler states")
    distinguishability: float = Field(description="√(1 − |<Ψ1|Ψ2>|²)")
    single_pair_weight: float = Field(description="Probability of exactly one pair")
    higher_order_weight: float = Field(
        description="Probability of two or more pairs (the O(G²) correction)"
    )


SweepVariable = Literal["t_mag", "v2", "gamma_mag"]


class SweepSpec(BaseModel):
    """Grid over one parameter with the rest held fixed."""

    model_config = ConfigDict(frozen=True)

    variable: SweepVariable
    grid: List[float] = Field(min_length=1)
    fixed: ExperimentParams = Field(default_factory=ExperimentParams)
    output_path: Optional[str] = None

    @model_validator(mode="after")
    def _grid_in_range(self) -> "SweepSpec":
        for value in self.grid:
            if not math.isfinite(value):
                raise RangeError(self.variable, value, "finite")
            if self.variable in ("t_mag", "gamma_mag") and not 0.0 <= value <= 1.0:
                raise RangeError(self.variable, value, "[0, 1]")
            if self.variable == "v2" and value < 0.0:
                raise RangeError(self.variable, value, "[0, inf)")
        return self

    @classmethod
    def from_descriptor(
        cls,
        descriptor: str,
        fixed: Optional[ExperimentParams] = None,
        output_path: Optional[str] = None,
    ) -> "SweepSpec":
        """Parse ``<var>:<start>:<stop>:<n>[:log]``."""
        parts = descriptor.split(":")
        if len(parts) not in (4, 5) or (len(parts) == 5 and parts[4] != "log"):
            raise ConfigError(
                f"bad sweep descriptor '{descriptor}', "
                "expected <var>:<start>:<stop>:<n>[:log]"
            )
        variable = parts[0]
        try:
            start, stop, count = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError:
            raise ConfigError(f"bad numbers in sweep descriptor '{descriptor}'")
        if count < 1:
            raise ConfigError("sweep needs at least one point")
        if len(parts) == 5:
            if start <= 0.0 or stop <= 0.0:
                raise ConfigError("log sweeps need positive bounds")
            grid = np.logspace(math.log10(start), math.log10(stop), count)
        else:
            grid = np.linspace(start, stop, count)
        try:
            return cls(
                variable=variable,  # type: ignore[arg-type]
                grid=[float(x) for x in grid],
                fixed=fixed or ExperimentParams(),
                output_path=output_path,
            )
        except ValidationError as exc:
            raise _translate(cls, exc) from None

    def points(self) -> Iterator[ExperimentParams]:
        """Experiment parameters at each grid value, in grid order."""
        for value in self.grid:
            if self.variable == "v2":
                yield self.fixed.with_v2(value)
            else:
                yield self.fixed.replace(**{self.variable: value})


class ErrorReport(BaseModel):
    """Structured error payload."""

    error_code: str = Field(description="Error code")
    message: str = Field(description="Error message")
    details: Optional[Dict[str, Any]] = Field(
        default=None, description="Additional error details"
    )
