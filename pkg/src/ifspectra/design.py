"""Closed-form design laws for the low-frequency spectral dip.

The block envelope of duration T_b = (n_s - 1 + 2a)/R_s broadens under
dispersion to T_b' = T_b + kappa * D * L * R_s * lambda^2 / c, and the induced
spectral dip has width ~ 2/T_b'.  Maximizing that width over the symbol rate
gives closed-form optimal rates; literature presets expose competing rules on
the same footing R = sqrt(OL / (2 pi |beta2| L nu)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .psd_model import PsdDecomposition
from .pulses import SPEED_OF_LIGHT, FiberDispersion


class DesignError(ValueError):
    pass


def block_duration(block_length: int, main_lobe_ratio: float, symbol_rate: float) -> float:
    """Duration of one shaping block including the single-pulse main lobes."""
    if block_length < 1 or main_lobe_ratio <= 0.0 or symbol_rate <= 0.0:
        raise DesignError("block length, lobe ratio, and symbol rate must be positive")
    return (block_length - 1 + 2.0 * main_lobe_ratio) / symbol_rate


def dispersion_broadening(symbol_rate: float, fiber: FiberDispersion,
                          bandwidth_expansion: float) -> float:
    """Group-delay spread across the occupied bandwidth after the fiber."""
    if bandwidth_expansion < 1.0:
        raise DesignError("bandwidth expansion factor must be >= 1")
    return (
        bandwidth_expansion
        * fiber.dispersion_si
        * fiber.length_m
        * symbol_rate
        * fiber.wavelength_m**2
        / SPEED_OF_LIGHT
    )


def dispersed_duration(block_length: int, main_lobe_ratio: float, symbol_rate: float,
                       fiber: FiberDispersion, bandwidth_expansion: float) -> float:
    """Block duration plus the dispersion-induced broadening."""
    return block_duration(block_length, main_lobe_ratio, symbol_rate) + dispersion_broadening(
        symbol_rate, fiber, bandwidth_expansion
    )


def dip_width(block_length: int, main_lobe_ratio: float, symbol_rate: float,
              fiber: FiberDispersion, bandwidth_expansion: float) -> float:
    """Predicted full width of the low-frequency dip: twice the inverse
    broadened block duration."""
    return 2.0 / dispersed_duration(
        block_length, main_lobe_ratio, symbol_rate, fiber, bandwidth_expansion
    )


def opt_rate_shaped(block_length: int, main_lobe_ratio: float,
                    fiber: FiberDispersion, bandwidth_expansion: float) -> float:
    """Symbol rate maximizing the dip width for a length-n_s block."""
    if fiber.length_m <= 0.0:
        raise DesignError(
            "optimal rate is unbounded at zero fiber length (dip width grows "
            "monotonically with symbol rate)"
        )
    overlap = block_length - 1 + 2.0 * main_lobe_ratio
    return math.sqrt(
        overlap
        / (2.0 * math.pi * abs(fiber.beta2) * fiber.length_m * bandwidth_expansion)
    )


def opt_rate_unshaped(main_lobe_ratio: float, fiber: FiberDispersion,
                      bandwidth_expansion: float) -> float:
    """Single-symbol limit of the shaped optimal rate."""
    return opt_rate_shaped(1, main_lobe_ratio, fiber, bandwidth_expansion)


@dataclass(frozen=True)
class RatePreset:
    """One optimal-rate rule R = sqrt(OL / (2 pi |beta2| L nu))."""

    name: str
    overlap_factor: float
    spacing_factor: float

    def __post_init__(self) -> None:
        if self.overlap_factor <= 0.0:
            raise DesignError("overlap factor must be positive")
        if self.spacing_factor <= 0.0:
            raise DesignError(f"preset {self.name!r} has nonpositive spacing factor")


PRESET_NAMES = ("dip_shaped", "dip_unshaped", "poggiolini", "wang")


def rate_preset(name: str, *, block_length: int | None = None,
                main_lobe_ratio: float | None = None,
                bandwidth_expansion: float | None = None,
                spacing_ratio: float | None = None) -> RatePreset:
    """Build a preset.

    dip_shaped/dip_unshaped need block_length (shaped only), main_lobe_ratio,
    and bandwidth_expansion; poggiolini and wang need spacing_ratio, the ratio
    of channel spacing to symbol rate.
    """
    if name in ("dip_shaped", "dip_unshaped"):
        if main_lobe_ratio is None or bandwidth_expansion is None:
            raise DesignError(f"preset {name!r} needs main_lobe_ratio and bandwidth_expansion")
        if name == "dip_shaped":
            if block_length is None:
                raise DesignError("preset 'dip_shaped' needs block_length")
            overlap = block_length - 1 + 2.0 * main_lobe_ratio
        else:
            overlap = 2.0 * main_lobe_ratio
        return RatePreset(name, overlap, bandwidth_expansion)
    if name == "poggiolini":
        if spacing_ratio is None:
            raise DesignError("preset 'poggiolini' needs spacing_ratio")
        nu = 2.0 * spacing_ratio - 1.0
        if nu <= 0.0:
            raise DesignError("preset 'poggiolini' needs spacing_ratio > 0.5")
        return RatePreset(name, 4.0, nu)
    if name == "wang":
        if spacing_ratio is None:
            raise DesignError("preset 'wang' needs spacing_ratio")
        return RatePreset(name, 1.0, spacing_ratio**2)
    raise DesignError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


def general_rate(preset: RatePreset, fiber: FiberDispersion) -> float:
    """Evaluate a preset's optimal-rate rule on one fiber."""
    if fiber.length_m <= 0.0:
        raise DesignError("optimal rate is unbounded at zero fiber length")
    return math.sqrt(
        preset.overlap_factor
        / (2.0 * math.pi * abs(fiber.beta2) * fiber.length_m * preset.spacing_factor)
    )


def numeric_optimal_rate(block_length: int, main_lobe_ratio: float,
                         fiber: FiberDispersion, bandwidth_expansion: float,
                         rate_lo: float = 1e8, rate_hi: float = 1e12) -> float:
    """Argmax of the dip width over symbol rate by bounded scalar search."""
    if fiber.length_m <= 0.0:
        raise DesignError("optimal rate is unbounded at zero fiber length")

    def duration(log_rate: float) -> float:
        return dispersed_duration(
            block_length, main_lobe_ratio, math.exp(log_rate), fiber, bandwidth_expansion
        )

    res = optimize.minimize_scalar(
        duration,
        bounds=(math.log(rate_lo), math.log(rate_hi)),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return math.exp(res.x)


DIP_METHODS = ("half_plateau", "correction_null")


def measure_dip_width(dec: PsdDecomposition, symbol_period: float,
                      method: str = "half_plateau") -> float:
    """Numeric dip width of a model decomposition, as a full (two-sided) width.

    half_plateau: twice the frequency where the total continuous density first
    recovers to half the plateau level, the plateau being the median total over
    [0.1/T, 0.3/T].  correction_null: twice the frequency of the first local
    minimum of the envelope-correction magnitude (the edge of its central
    lobe).  Returns 0.0 when no dip exists.
    """
    f = dec.freqs
    if method == "half_plateau":
        band = (f >= 0.1 / symbol_period) & (f <= 0.3 / symbol_period)
        if not band.any():
            raise DesignError("grid does not cover the plateau band")
        plateau = float(np.median(dec.total[band]))
        half = 0.5 * plateau
        total = dec.total
        if total[0] >= half:
            return 0.0
        above = np.flatnonzero(total >= half)
        k = int(above[0])
        # linear interpolation between the bracketing bins
        frac = (half - total[k - 1]) / (total[k] - total[k - 1])
        return 2.0 * (f[k - 1] + frac * (f[k] - f[k - 1]))
    if method == "correction_null":
        mag = np.abs(dec.shaping_correction)
        if mag.max() == 0.0:
            return 0.0
        interior = np.flatnonzero((mag[1:-1] <= mag[:-2]) & (mag[1:-1] < mag[2:]))
        if len(interior) == 0:
            return 0.0
        return 2.0 * f[int(interior[0]) + 1]
    raise DesignError(f"unknown dip measurement {method!r}; choose from {DIP_METHODS}")
