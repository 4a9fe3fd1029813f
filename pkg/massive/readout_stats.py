"""
Readout economics and fringe simulation/fitting.

Two readout kinds are modelled. Room-temperature readout has a small
single-shot SNR and its noise is added as Gaussian photon noise on the
aggregated counts. Cryogenic single-shot readout has a fidelity F that
flips each outcome with probability 1 - F.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from scipy.optimize import leastsq

from massive.errors import ConvergenceError, InvalidInputError
from massive.logging_utils import get_module_logger, log_with_context
from massive.random_streams import named_stream
from massive.reporting import DEFAULT_PRECISION, read_csv, write_csv
from massive.validation import (
    validate_int_at_least,
    validate_positive,
    validate_probability,
)

logger = get_module_logger(__name__)

DEFAULT_SNR_CAP = 100.0
MIN_FIT_POINTS = 8
FRINGE_CSV_FIELDS = ["scan_value", "drops", "successes"]


class ReadoutKind(str, Enum):
    ROOM_TEMPERATURE = "room_temperature"
    CRYOGENIC_SINGLE_SHOT = "cryogenic_single_shot"


def snr_from_fidelity(fidelity: float, cap: float = DEFAULT_SNR_CAP) -> float:
    """
    Two-outcome discriminability (2F - 1) / sqrt(2 F (1 - F)).

    Raises:
        InvalidInputError: If F <= 0.5 (no information) or F > 1
    """
    fidelity = validate_probability(fidelity, "fidelity", "snr_from_fidelity")
    cap = validate_positive(cap, "cap", "snr_from_fidelity")
    if fidelity <= 0.5:
        raise InvalidInputError(f"snr_from_fidelity: fidelity must exceed 0.5, got {fidelity}")
    if fidelity == 1.0:
        return cap
    return min(cap, (2.0 * fidelity - 1.0) / math.sqrt(2.0 * fidelity * (1.0 - fidelity)))


@dataclass(frozen=True)
class ReadoutModel:
    kind: ReadoutKind = ReadoutKind.CRYOGENIC_SINGLE_SHOT
    single_shot_snr: float = 0.03
    fidelity: float = 0.95
    snr_cap: float = DEFAULT_SNR_CAP

    def __post_init__(self):
        object.__setattr__(self, "kind", ReadoutKind(self.kind))
        validate_positive(self.single_shot_snr, "single_shot_snr", "ReadoutModel")
        validate_positive(self.snr_cap, "snr_cap", "ReadoutModel")
        fidelity = validate_probability(self.fidelity, "fidelity", "ReadoutModel")
        if fidelity <= 0.5:
            raise InvalidInputError(f"ReadoutModel: fidelity must exceed 0.5, got {fidelity}")

    @property
    def effective_snr(self) -> float:
        if self.kind is ReadoutKind.ROOM_TEMPERATURE:
            return self.single_shot_snr
        return snr_from_fidelity(self.fidelity, self.snr_cap)

    @property
    def flip_fidelity(self) -> float:
        """Fidelity applied to each outcome; room readout corrupts counts additively instead."""
        return 1.0 if self.kind is ReadoutKind.ROOM_TEMPERATURE else self.fidelity

    @property
    def extra_variance(self) -> float:
        """Additive per-drop variance of the aggregated count."""
        if self.kind is ReadoutKind.ROOM_TEMPERATURE:
            return 1.0 / self.single_shot_snr ** 2
        return 0.0

    @classmethod
    def room(cls, single_shot_snr: float = 0.03) -> "ReadoutModel":
        return cls(ReadoutKind.ROOM_TEMPERATURE, single_shot_snr=single_shot_snr)

    @classmethod
    def cryogenic(cls, fidelity: float = 0.95) -> "ReadoutModel":
        return cls(ReadoutKind.CRYOGENIC_SINGLE_SHOT, fidelity=fidelity)


def drops_required(model: ReadoutModel, target_snr: float) -> int:
    """ceil((target / single-shot SNR)^2), at least one drop."""
    target_snr = validate_positive(target_snr, "target_snr", "drops_required")
    ratio = (target_snr / model.effective_snr) ** 2
    # guard against 1.0000000000000002 rounding up to 2
    return max(1, math.ceil(ratio * (1.0 - 1e-12)))


def fold_readout(p: np.ndarray, fidelity: float) -> np.ndarray:
    """p_obs = F p + (1 - F)(1 - p)."""
    return fidelity * p + (1.0 - fidelity) * (1.0 - p)


def unfold_readout(p_obs: np.ndarray, fidelity: float) -> np.ndarray:
    """Inverse of fold_readout."""
    return (p_obs - (1.0 - fidelity)) / (2.0 * fidelity - 1.0)


@dataclass
class FringeDataset:
    """
    Per scan point: scan value, number of drops and number of bright outcomes.

    ``successes`` may be fractional for expected-count (noiseless) data.
    """
    scan_values: np.ndarray
    drops: np.ndarray
    successes: np.ndarray
    axis_label: str = "drop_time_s"
    fidelity: float = 1.0
    extra_variance: float = 0.0

    def __post_init__(self):
        self.scan_values = np.asarray(self.scan_values, dtype=float)
        self.drops = np.asarray(self.drops)
        self.successes = np.asarray(self.successes)
        if not (self.scan_values.shape == self.drops.shape == self.successes.shape):
            raise InvalidInputError("FringeDataset: scan_values, drops and successes must have equal length")
        if np.any(self.drops < 1):
            raise InvalidInputError("FringeDataset: every point needs at least one drop")
        if np.any(self.successes < 0) or np.any(self.successes > self.drops):
            raise InvalidInputError("FringeDataset: need 0 <= successes <= drops at every point")

    def __len__(self) -> int:
        return len(self.scan_values)

    @property
    def observed_fraction(self) -> np.ndarray:
        return self.successes / self.drops

    @property
    def total_drops(self) -> int:
        return int(np.sum(self.drops))


def simulate_fringe_scan(
    phase_model: Callable[[float], float],
    visibility: float,
    model: ReadoutModel,
    scan_values: Sequence[float],
    drops_per_point: int,
    seed: int,
    axis_label: str = "drop_time_s",
) -> FringeDataset:
    """
    Draw binomial outcomes for p = (1 + V cos phi) / 2 at each scan value.

    Args:
        phase_model: Maps a scan value to the interferometer phase, rad
        visibility: Fringe visibility in [0, 1]
        model: Readout model applied to every outcome
        scan_values: Points of the scan
        drops_per_point: Drops at each point (>= 1)
        seed: Scenario seed

    Returns:
        FringeDataset carrying the readout fidelity and extra variance used
    """
    visibility = validate_probability(visibility, "visibility", "simulate_fringe_scan")
    drops_per_point = validate_int_at_least(drops_per_point, 1, "drops_per_point", "simulate_fringe_scan")
    x = np.asarray(scan_values, dtype=float)
    phases = np.array([phase_model(value) for value in x], dtype=float)
    p = 0.5 * (1.0 + visibility * np.cos(phases))
    p_obs = np.clip(fold_readout(p, model.flip_fidelity), 0.0, 1.0)

    rng = named_stream(seed, "readout_stats", "fringe_scan")
    drops = np.full(len(x), drops_per_point, dtype=np.int64)
    successes = rng.binomial(drops, p_obs)
    if model.kind is ReadoutKind.ROOM_TEMPERATURE:
        noise = rng.normal(0.0, math.sqrt(drops_per_point * model.extra_variance), size=len(x))
        successes = np.clip(np.rint(successes + noise), 0, drops).astype(np.int64)

    return FringeDataset(
        scan_values=x,
        drops=drops,
        successes=successes,
        axis_label=axis_label,
        fidelity=model.flip_fidelity,
        extra_variance=model.extra_variance,
    )


@dataclass
class FringeFit:
    """Fit of p(x) = (1 + V cos(omega (x - x_c) + phi)) / 2; phase is referred to the scan centre x_c."""
    visibility: float
    visibility_error: float
    phase_offset: float
    phase_offset_error: float
    frequency: float
    frequency_error: float
    scan_center: float
    chi_square: float
    dof: int
    degenerate: bool = False
    notes: List[str] = field(default_factory=list)

    def covers(self, value: float, n_sigma: float = 1.0) -> bool:
        return abs(self.visibility - value) <= n_sigma * self.visibility_error


def _point_sigma(data: FringeDataset) -> np.ndarray:
    # shrunk estimate keeps the weight finite at p = 0 or 1
    p_shrunk = (data.successes + 0.5) / (data.drops + 1.0)
    var_obs = (p_shrunk * (1.0 - p_shrunk) + data.extra_variance) / data.drops
    return np.sqrt(var_obs) / (2.0 * data.fidelity - 1.0)


def _linear_fit(x: np.ndarray, y: np.ndarray, sigma: np.ndarray, omega: float):
    design = np.column_stack([np.cos(omega * x), np.sin(omega * x)]) / sigma[:, None]
    coef, *_ = np.linalg.lstsq(design, y / sigma, rcond=None)
    chi2 = float(np.sum((design @ coef - y / sigma) ** 2))
    return coef, chi2


def _frequency_grid(x: np.ndarray) -> np.ndarray:
    span = float(np.ptp(x))
    spacing = float(np.min(np.diff(np.sort(x))))
    if span <= 0 or spacing <= 0:
        raise InvalidInputError("fit_fringes: scan values must be distinct")
    step = 2.0 * math.pi / (span * 10.0)
    count = int(math.ceil((math.pi / spacing - 0.5 * math.pi / span) / step)) + 1
    return np.linspace(0.5 * math.pi / span, math.pi / spacing, max(count, 2))


def fit_fringes(data: FringeDataset, frequency: Optional[float] = None) -> FringeFit:
    """
    Weighted least-squares fringe fit with readout-fidelity unfolding.

    The frequency is located by a linear-model scan over a grid (or fixed
    when ``frequency`` is given) and then refined jointly with V and the
    phase by Levenberg-Marquardt. Uncertainties are 1 sigma from the fit
    covariance with binomial weights.

    Raises:
        InvalidInputError: If fewer than 8 points are given
        ConvergenceError: If the refinement fails
    """
    if len(data) < MIN_FIT_POINTS:
        raise InvalidInputError(f"fit_fringes: need >= {MIN_FIT_POINTS} scan points, got {len(data)}")
    center = float(np.mean(data.scan_values))
    x = data.scan_values - center
    y = unfold_readout(data.observed_fraction, data.fidelity) - 0.5
    sigma = _point_sigma(data)
    dof = max(len(x) - (2 if frequency is not None else 3), 1)

    if np.ptp(data.observed_fraction) < 1e-12:
        log_with_context(
            logger,
            logging.WARNING,
            "Readout",
            "Degenerate fringe data: all points identical",
            {"points": len(data), "fraction": float(data.observed_fraction[0])}
        )
        return FringeFit(
            visibility=float(abs(2.0 * y[0])),
            visibility_error=math.inf,
            phase_offset=0.0,
            phase_offset_error=math.inf,
            frequency=0.0 if frequency is None else float(frequency),
            frequency_error=math.inf,
            scan_center=center,
            chi_square=0.0,
            dof=dof,
            degenerate=True,
            notes=["all scan points identical; visibility and phase are not separable"],
        )

    grid = np.array([float(frequency)]) if frequency is not None else _frequency_grid(x)
    fits = [_linear_fit(x, y, sigma, omega) for omega in grid]
    best = int(np.argmin([chi2 for _, chi2 in fits]))
    (a, b), _ = fits[best]
    omega0 = float(grid[best])
    v0 = 2.0 * math.hypot(a, b)
    phi0 = math.atan2(-b, a)

    if frequency is None:
        def residuals(params):
            v, phi, omega = params
            return (0.5 * v * np.cos(omega * x + phi) - y) / sigma
        start = [v0, phi0, omega0]
    else:
        def residuals(params):
            v, phi = params
            return (0.5 * v * np.cos(omega0 * x + phi) - y) / sigma
        start = [v0, phi0]

    params, cov, info, message, ier = leastsq(residuals, start, full_output=1)
    chi2 = float(np.sum(info["fvec"] ** 2))
    if ier not in (1, 2, 3, 4):
        raise ConvergenceError(f"fit_fringes did not converge: {message}", chi2)

    errors = np.full(len(params), math.inf) if cov is None else np.sqrt(np.abs(np.diag(cov)))
    v, phi = float(params[0]), float(params[1])
    omega = float(params[2]) if frequency is None else omega0
    if v < 0:
        v, phi = -v, phi + math.pi
    phi = (phi + math.pi) % (2.0 * math.pi) - math.pi

    fit = FringeFit(
        visibility=v,
        visibility_error=float(errors[0]),
        phase_offset=phi,
        phase_offset_error=float(errors[1]),
        frequency=omega,
        frequency_error=float(errors[2]) if frequency is None else 0.0,
        scan_center=center,
        chi_square=chi2,
        dof=dof,
    )
    log_with_context(
        logger,
        logging.DEBUG,
        "Readout",
        "Fringe fit",
        {"visibility": fit.visibility, "sigma": fit.visibility_error, "chi2_per_dof": chi2 / dof}
    )
    return fit


def fringe_dataset_to_csv(data: FringeDataset, path: Union[str, Path], precision: int = DEFAULT_PRECISION) -> Path:
    """Export as CSV with columns scan_value, drops, successes."""
    rows = [
        {"scan_value": float(x), "drops": int(n), "successes": s.item()}
        for x, n, s in zip(data.scan_values, data.drops, data.successes)
    ]
    return write_csv(path, FRINGE_CSV_FIELDS, rows, precision)


def fringe_dataset_from_csv(
    path: Union[str, Path],
    axis_label: str = "drop_time_s",
    fidelity: float = 1.0,
    extra_variance: float = 0.0,
) -> FringeDataset:
    """Load a dataset written by fringe_dataset_to_csv (or by hand)."""
    rows = read_csv(path)
    missing = [name for name in FRINGE_CSV_FIELDS if rows and name not in rows[0]]
    if not rows or missing:
        raise InvalidInputError(f"fringe CSV {path}: expected columns {FRINGE_CSV_FIELDS}")
    try:
        scan = [float(row["scan_value"]) for row in rows]
        drops = [int(float(row["drops"])) for row in rows]
        successes = [float(row["successes"]) for row in rows]
    except ValueError as e:
        raise InvalidInputError(f"fringe CSV {path}: {e}")
    if all(s.is_integer() for s in successes):
        successes = [int(s) for s in successes]
    return FringeDataset(scan, drops, successes, axis_label, fidelity, extra_variance)
