"""Centralised configuration for the semiclassical simulation backend."""
from __future__ import annotations

import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional, Tuple

# ---------------------------------------------------------------------------
# Numerical defaults

DEFAULT_ODE_TOL: float = 1e-10
DEFAULT_UNITARITY_TOL: float = 1e-8
DEFAULT_TAIL_EPSILON: float = 1e-8
DEFAULT_TAIL_MARGIN: int = 10
HERMITIAN_TOL: float = 1e-10

DEFAULT_KAPPA: float = 4.0
AUTO_CUTOFF_DEGREE_PAD: int = 10
DISPLACEMENT_SAFETY: float = 4.0
MAGNUS_STEP_SAFETY: float = 0.5
QUADRATIC_CUTOFF: int = 120

MAX_EXPONENT: int = 64

NOISE_FLOOR: float = 1e-6
MIN_FIT_POINTS: int = 4
SQRT_RATE_THRESHOLD: float = 0.45
LINEAR_RATE_THRESHOLD: float = 0.9

ASSUMPTION_CUTOFFS: Tuple[int, ...] = (200, 400)
ASSUMPTION_BETAS: Tuple[int, ...] = (1, 2)
ASSUMPTION_STABILITY_FACTOR: float = 2.0
ASSUMPTION_CAVEAT: str = "numeric screen on truncated interior, not a proof"

DEFAULT_SEED: int = 1234
INVARIANT_SIZES: Tuple[int, ...] = (24, 40, 60)
FAULT_PERTURBATION: float = 1e-3

CSV_FLOAT_FORMAT: str = ".17g"


class ConfigError(ValueError):
    """Raised when a configuration field is missing or invalid."""

    def __init__(self, field_name: str, message: str) -> None:
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


# ---------------------------------------------------------------------------
# Enumerations


class CutoffMode(str, Enum):
    AUTO = "auto"
    FIXED = "fixed"


class StudyKind(str, Enum):
    W_DISTANCE = "w_distance"
    CORRELATOR = "correlator"
    STATIC = "static"


class PsiKind(str, Enum):
    VACUUM = "vacuum"
    COEFFICIENTS = "coefficients"


_DEFAULT_MIN_SLOPE = {
    StudyKind.W_DISTANCE: SQRT_RATE_THRESHOLD,
    StudyKind.CORRELATOR: LINEAR_RATE_THRESHOLD,
    StudyKind.STATIC: SQRT_RATE_THRESHOLD,
}


# ---------------------------------------------------------------------------
# Dataclasses


@dataclass(frozen=True)
class Tolerances:
    ode: float = DEFAULT_ODE_TOL
    unitarity: float = DEFAULT_UNITARITY_TOL
    tail_epsilon: float = DEFAULT_TAIL_EPSILON
    tail_margin: int = DEFAULT_TAIL_MARGIN


@dataclass(frozen=True)
class CutoffPolicy:
    """AUTO picks M = ceil(κ(|α_max|²/ℏ + 10·d)); FIXED always returns ``fixed``."""

    mode: CutoffMode = CutoffMode.AUTO
    kappa: float = DEFAULT_KAPPA
    fixed: Optional[int] = None

    def resolve(self, alpha_max: float, hbar: float, degree: int) -> int:
        if self.mode is CutoffMode.FIXED:
            return int(self.fixed)
        return int(math.ceil(self.kappa * (alpha_max**2 / hbar + AUTO_CUTOFF_DEGREE_PAD * degree)))


@dataclass(frozen=True)
class PsiSpec:
    """Initial fluctuation state: the vacuum or explicit Fock coefficients."""

    kind: PsiKind = PsiKind.VACUUM
    coefficients: Tuple[complex, ...] = ()


@dataclass(frozen=True)
class Study:
    kind: StudyKind = StudyKind.W_DISTANCE
    observable: Optional[str] = None
    center: bool = False
    rescale: bool = False
    min_slope: Optional[float] = None

    @property
    def slope_threshold(self) -> float:
        if self.min_slope is not None:
            return self.min_slope
        return _DEFAULT_MIN_SLOPE[self.kind]


@dataclass(frozen=True)
class SimConfig:
    hamiltonian: str
    alpha0: complex = 1.0 + 0j
    hbars: Tuple[float, ...] = (0.1, 0.05, 0.025, 0.0125)
    times: Tuple[float, ...] = (1.0,)
    psi: PsiSpec = field(default_factory=PsiSpec)
    cutoff: CutoffPolicy = field(default_factory=CutoffPolicy)
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int = DEFAULT_SEED
    concurrency: int = 1
    quadratic_cutoff: int = QUADRATIC_CUTOFF
    assumption_cutoffs: Tuple[int, ...] = ASSUMPTION_CUTOFFS
    assumption_override: bool = False
    study: Study = field(default_factory=Study)
    name: str = "study"

    @property
    def eta(self) -> float:
        """Largest ℏ of the sweep; the threshold below which ℏ is admitted."""

        return max(self.hbars)

    def with_study(self, study: Study) -> "SimConfig":
        return replace(self, study=study)


# ---------------------------------------------------------------------------
# Loading and validation


def _as_complex(value: Any, field_name: str) -> complex:
    if isinstance(value, bool):
        raise ConfigError(field_name, "expected a number")
    if isinstance(value, (int, float, complex)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        try:
            return complex(float(value[0]), float(value[1]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(field_name, "expected [re, im]") from exc
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", "").replace("i", "j"))
        except ValueError as exc:
            raise ConfigError(field_name, f"cannot read {value!r} as a complex number") from exc
    raise ConfigError(field_name, "expected a number, [re, im] or a string")


def _float_list(value: Any, field_name: str) -> Tuple[float, ...]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(field_name, "expected a list of numbers")
    try:
        return tuple(float(entry) for entry in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(field_name, "expected a list of numbers") from exc


def _section(mapping: Mapping[str, Any], name: str) -> Mapping[str, Any]:
    section = mapping.get(name, {})
    if not isinstance(section, Mapping):
        raise ConfigError(name, "expected a table")
    return section


def _validate_hbars(hbars: Tuple[float, ...]) -> None:
    if not hbars:
        raise ConfigError("sweep.hbars", "at least one value of hbar is required")
    for value in hbars:
        if not 0.0 < value <= 1.0:
            raise ConfigError("sweep.hbars", f"{value} is outside (0, 1]")
    for larger, smaller in zip(hbars, hbars[1:]):
        if not smaller < larger:
            raise ConfigError("sweep.hbars", "values must be strictly decreasing")


def _validate_times(times: Tuple[float, ...]) -> None:
    if not times:
        raise ConfigError("classical.times", "at least one time is required")
    if any(t < 0 for t in times):
        raise ConfigError("classical.times", "times must be non-negative")
    if list(times) != sorted(times):
        raise ConfigError("classical.times", "times must be sorted")


def _parse_psi(section: Mapping[str, Any]) -> PsiSpec:
    raw = section.get("psi", PsiKind.VACUUM.value)
    if isinstance(raw, str):
        if raw.strip().lower() != PsiKind.VACUUM.value:
            raise ConfigError("quantum.psi", "expected 'vacuum' or a coefficient list")
        return PsiSpec()
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ConfigError("quantum.psi", "expected 'vacuum' or a coefficient list")
    coefficients = tuple(_as_complex(entry, "quantum.psi") for entry in raw)
    norm = math.sqrt(sum(abs(c) ** 2 for c in coefficients))
    if norm == 0.0:
        raise ConfigError("quantum.psi", "state has zero norm")
    return PsiSpec(PsiKind.COEFFICIENTS, tuple(c / norm for c in coefficients))


def _parse_cutoff(section: Mapping[str, Any]) -> CutoffPolicy:
    raw = section.get("cutoff", CutoffMode.AUTO.value)
    kappa = float(section.get("kappa", DEFAULT_KAPPA))
    if kappa <= 0:
        raise ConfigError("quantum.kappa", "must be positive")
    if isinstance(raw, str):
        if raw.strip().lower() != CutoffMode.AUTO.value:
            raise ConfigError("quantum.cutoff", "expected 'auto' or an integer cutoff")
        return CutoffPolicy(CutoffMode.AUTO, kappa)
    if isinstance(raw, bool) or not isinstance(raw, int) or raw < 1:
        raise ConfigError("quantum.cutoff", "fixed cutoff must be a positive integer")
    return CutoffPolicy(CutoffMode.FIXED, kappa, int(raw))


def _parse_study(section: Mapping[str, Any]) -> Study:
    raw_kind = str(section.get("study", StudyKind.W_DISTANCE.value)).strip().lower()
    try:
        kind = StudyKind(raw_kind)
    except ValueError as exc:
        raise ConfigError("sweep.study", f"unknown study {raw_kind!r}") from exc
    observable = section.get("observable")
    if kind is not StudyKind.W_DISTANCE and not observable:
        raise ConfigError("sweep.observable", f"study {kind.value} needs an observable")
    min_slope = section.get("min_slope")
    return Study(
        kind=kind,
        observable=None if observable is None else str(observable),
        center=bool(section.get("center", False)),
        rescale=bool(section.get("rescale", False)),
        min_slope=None if min_slope is None else float(min_slope),
    )


def config_from_mapping(mapping: Mapping[str, Any], name: str = "study") -> SimConfig:
    """Build a validated :class:`SimConfig` from the sectioned mapping of a config file."""

    hamiltonian_section = _section(mapping, "hamiltonian")
    classical = _section(mapping, "classical")
    quantum = _section(mapping, "quantum")
    sweep = _section(mapping, "sweep")
    tolerances_section = _section(mapping, "tolerances")

    text = hamiltonian_section.get("text")
    if not isinstance(text, str) or not text.strip():
        raise ConfigError("hamiltonian.text", "a polynomial expression is required")

    hbars = _float_list(sweep.get("hbars", []), "sweep.hbars")
    _validate_hbars(hbars)
    times = _float_list(classical.get("times", [1.0]), "classical.times")
    _validate_times(times)

    tolerances = Tolerances(
        ode=float(tolerances_section.get("ode", DEFAULT_ODE_TOL)),
        unitarity=float(tolerances_section.get("unitarity", DEFAULT_UNITARITY_TOL)),
        tail_epsilon=float(tolerances_section.get("tail_epsilon", DEFAULT_TAIL_EPSILON)),
        tail_margin=int(tolerances_section.get("tail_margin", DEFAULT_TAIL_MARGIN)),
    )
    if tolerances.ode <= 0:
        raise ConfigError("tolerances.ode", "must be positive")

    concurrency = int(sweep.get("concurrency", 1))
    if concurrency < 1:
        raise ConfigError("sweep.concurrency", "must be at least 1")
    cutoffs = tuple(int(m) for m in quantum.get("assumption_cutoffs", ASSUMPTION_CUTOFFS))
    if len(cutoffs) < 2:
        raise ConfigError("quantum.assumption_cutoffs", "at least two cutoffs are required")

    return SimConfig(
        hamiltonian=text.strip(),
        alpha0=_as_complex(classical.get("alpha0", 1.0), "classical.alpha0"),
        hbars=hbars,
        times=times,
        psi=_parse_psi(quantum),
        cutoff=_parse_cutoff(quantum),
        tolerances=tolerances,
        seed=int(sweep.get("seed", DEFAULT_SEED)),
        concurrency=concurrency,
        quadratic_cutoff=int(quantum.get("quadratic_cutoff", QUADRATIC_CUTOFF)),
        assumption_cutoffs=tuple(sorted(cutoffs)),
        assumption_override=bool(sweep.get("assumption_override", False)),
        study=_parse_study(sweep),
        name=name,
    )


def load_config(path: Path | str) -> SimConfig:
    """Read and validate a TOML study file."""

    path = Path(path)
    try:
        with path.open("rb") as handle:
            mapping = tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError("path", f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("path", f"invalid TOML in {path}: {exc}") from exc
    return config_from_mapping(mapping, name=path.stem)


__all__ = [
    "ASSUMPTION_BETAS",
    "ASSUMPTION_CAVEAT",
    "ASSUMPTION_CUTOFFS",
    "ASSUMPTION_STABILITY_FACTOR",
    "CSV_FLOAT_FORMAT",
    "ConfigError",
    "CutoffMode",
    "CutoffPolicy",
    "DEFAULT_KAPPA",
    "DEFAULT_ODE_TOL",
    "DEFAULT_SEED",
    "DEFAULT_TAIL_EPSILON",
    "DEFAULT_TAIL_MARGIN",
    "DEFAULT_UNITARITY_TOL",
    "DISPLACEMENT_SAFETY",
    "FAULT_PERTURBATION",
    "HERMITIAN_TOL",
    "INVARIANT_SIZES",
    "LINEAR_RATE_THRESHOLD",
    "MAGNUS_STEP_SAFETY",
    "MAX_EXPONENT",
    "MIN_FIT_POINTS",
    "NOISE_FLOOR",
    "PsiKind",
    "PsiSpec",
    "QUADRATIC_CUTOFF",
    "SQRT_RATE_THRESHOLD",
    "SimConfig",
    "Study",
    "StudyKind",
    "Tolerances",
    "config_from_mapping",
    "load_config",
]
