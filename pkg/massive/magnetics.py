"""
Pole-piece field model, bias field and field-stability checks.

The configured gradient (10^4 T/m) is what every downstream module uses.
The uniformly magnetised sphere model is a cross-check only: it does not
reproduce the quoted single-piece figure of 5000 T/m, and the report says so.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict

from massive.errors import InvalidInputError, OutOfModelError
from massive.logging_utils import get_module_logger, log_with_context
from massive.validation import validate_non_negative, validate_positive

logger = get_module_logger(__name__)

SATURATION_FIELD = 2.4        # T, Hyperco saturation
ALIGNMENT_BIAS_FIELD = 0.05   # T
STABILITY_REQUIREMENT = 1e-9  # fractional, per day
QUOTED_SINGLE_GRADIENT = 5000.0  # T/m, quoted lower bound for one pole piece
QUOTED_PAIR_GRADIENT = 1e4       # T/m


class Arrangement(str, Enum):
    SINGLE = "single"
    OPPOSING_PAIR = "opposing_pair"


class GradientModel(str, Enum):
    CONFIGURED_CONSTANT = "configured_constant"
    DIPOLE_SPHERE = "dipole_sphere"


class DistanceConvention(str, Enum):
    """Where a quoted standoff is measured from."""
    SURFACE = "surface"
    CENTER = "center"


@dataclass(frozen=True)
class PolePieceModel:
    tip_radius: float = 20e-6
    surface_field: float = 2.4
    gap: float = 160e-6
    arrangement: Arrangement = Arrangement.OPPOSING_PAIR

    def __post_init__(self):
        validate_positive(self.tip_radius, "tip_radius", "PolePieceModel")
        validate_positive(self.surface_field, "surface_field", "PolePieceModel")
        validate_positive(self.gap, "gap", "PolePieceModel")
        object.__setattr__(self, "arrangement", Arrangement(self.arrangement))

    @property
    def saturation_ok(self) -> bool:
        return self.surface_field >= SATURATION_FIELD

    @property
    def midpoint_distance(self) -> float:
        """Distance from a tip centre to the gap midpoint (gap is surface to surface)."""
        return self.tip_radius + self.gap / 2.0


@dataclass(frozen=True)
class FieldEnvironment:
    bias_field: float = 0.05
    gradient: float = 1e4
    gradient_model: GradientModel = GradientModel.CONFIGURED_CONSTANT
    run_to_run_stability: float = 1e-9

    def __post_init__(self):
        validate_non_negative(self.bias_field, "bias_field", "FieldEnvironment")
        validate_non_negative(self.gradient, "gradient", "FieldEnvironment")
        validate_non_negative(self.run_to_run_stability, "run_to_run_stability", "FieldEnvironment")
        object.__setattr__(self, "gradient_model", GradientModel(self.gradient_model))

    @property
    def alignment_ok(self) -> bool:
        return self.bias_field >= ALIGNMENT_BIAS_FIELD


def _check_radius(model: PolePieceModel, r: float, context: str) -> float:
    r = validate_positive(r, "r", context)
    if r < model.tip_radius:
        raise OutOfModelError(f"{context}: r = {r} m lies inside the tip sphere (R = {model.tip_radius} m)")
    return r


def sphere_field(model: PolePieceModel, r: float) -> float:
    """On-axis field B_s (R/r)^3 outside a uniformly magnetised sphere, T."""
    r = _check_radius(model, r, "sphere_field")
    return model.surface_field * (model.tip_radius / r) ** 3


def sphere_gradient(model: PolePieceModel, r: float, at_midpoint: bool = False) -> float:
    """
    Field gradient magnitude 3 B_s R^3 / r^4, T/m.

    With ``at_midpoint`` and an opposing pair, the two tips sit symmetrically
    about the point and their gradients add.
    """
    r = _check_radius(model, r, "sphere_gradient")
    single = 3.0 * model.surface_field * model.tip_radius ** 3 / r ** 4
    if at_midpoint and model.arrangement is Arrangement.OPPOSING_PAIR:
        return 2.0 * single
    return single


def midpoint_gradient(model: PolePieceModel) -> float:
    """Model gradient at the centre of the gap."""
    return sphere_gradient(model, model.midpoint_distance, at_midpoint=True)


def standoff_gradient(model: PolePieceModel, standoff: float, convention: DistanceConvention) -> float:
    """Single-tip gradient at a standoff measured from the tip surface or centre."""
    convention = DistanceConvention(convention)
    r = standoff + model.tip_radius if convention is DistanceConvention.SURFACE else standoff
    return sphere_gradient(model, r)


def downstream_gradient(env: FieldEnvironment, model: PolePieceModel) -> float:
    """The gradient the kinematics use, chosen by env.gradient_model."""
    if env.gradient_model is GradientModel.DIPOLE_SPHERE:
        return midpoint_gradient(model)
    return env.gradient


@dataclass
class EnvironmentReport:
    saturation_ok: bool
    alignment_ok: bool
    stability_ok: bool
    gradient: float
    gradient_model: GradientModel
    model_gradients: Dict[str, float] = field(default_factory=dict)
    notes: Dict[str, str] = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return self.saturation_ok and self.alignment_ok and self.stability_ok


def environment_report(env: FieldEnvironment, model: PolePieceModel) -> EnvironmentReport:
    """
    Aggregate saturation, alignment and stability flags plus the gradient used downstream.

    The dipole-sphere values at the quoted 80 um standoff are listed under both
    distance conventions next to the quoted figures, so the discrepancy is visible.
    """
    if not isinstance(env, FieldEnvironment) or not isinstance(model, PolePieceModel):
        raise InvalidInputError("environment_report expects a FieldEnvironment and a PolePieceModel")
    standoff = model.gap / 2.0
    model_gradients = {
        "single_surface_convention": standoff_gradient(model, standoff, DistanceConvention.SURFACE),
        "single_center_convention": standoff_gradient(model, max(standoff, model.tip_radius), DistanceConvention.CENTER),
        "pair_midpoint": midpoint_gradient(model),
        "quoted_single": QUOTED_SINGLE_GRADIENT,
        "quoted_pair": QUOTED_PAIR_GRADIENT,
    }
    ratio = QUOTED_PAIR_GRADIENT / model_gradients["pair_midpoint"]
    report = EnvironmentReport(
        saturation_ok=model.saturation_ok,
        alignment_ok=env.alignment_ok,
        stability_ok=env.run_to_run_stability <= STABILITY_REQUIREMENT,
        gradient=downstream_gradient(env, model),
        gradient_model=env.gradient_model,
        model_gradients=model_gradients,
        notes={
            "gradient_discrepancy": (
                f"dipole-sphere pair gradient {model_gradients['pair_midpoint']:.4g} T/m is "
                f"{ratio:.3g}x below the quoted {QUOTED_PAIR_GRADIENT:.0e} T/m"
            ),
        },
    )
    if ratio > 2.0:
        log_with_context(
            logger,
            logging.WARNING,
            "Magnetics",
            "Dipole-sphere gradient disagrees with quoted value",
            {"model_pair_gradient": model_gradients["pair_midpoint"], "quoted": QUOTED_PAIR_GRADIENT}
        )
    return report
