"""Square-QAM alphabets and Maxwell-Boltzmann probability fitting."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

SUPPORTED_ORDERS = (4, 16, 64, 256)

PROB_SUM_TOL = 1e-12
MEAN_ENERGY_TOL = 1e-9
ENTROPY_TOL_BITS = 1e-6


class ShapingError(ValueError):
    """Unsupported alphabet or infeasible shaping target."""


def entropy_bits(probs: np.ndarray) -> float:
    """Shannon entropy in bits; zero-probability entries contribute nothing."""
    p = np.asarray(probs, dtype=float)
    p = p[p > 0.0]
    return float(-(p * np.log2(p)).sum())


@dataclass(eq=False)
class Constellation:
    """Complex symbol alphabet with per-point probabilities.

    Points are stored as an odd-integer lattice plus one real scale factor, so
    the block codecs can keep all energy bookkeeping in exact integers.  The
    scaled points are always normalized to unit mean energy under ``probs``.
    """

    lattice_re: np.ndarray
    lattice_im: np.ndarray
    probs: np.ndarray
    order: int
    scale: float

    def __post_init__(self) -> None:
        self.lattice_re = np.asarray(self.lattice_re, dtype=np.int64)
        self.lattice_im = np.asarray(self.lattice_im, dtype=np.int64)
        self.probs = np.asarray(self.probs, dtype=float)
        if not (len(self.lattice_re) == len(self.lattice_im) == len(self.probs) == self.order):
            raise ShapingError("lattice and probability arrays must each have `order` entries")
        if np.any(self.probs < 0.0):
            raise ShapingError("probabilities must be nonnegative")
        if abs(float(self.probs.sum()) - 1.0) > PROB_SUM_TOL:
            raise ShapingError("probabilities must sum to 1")
        if abs(self.mean_energy() - 1.0) > MEAN_ENERGY_TOL:
            raise ShapingError("points must be normalized to unit mean energy")

    @classmethod
    def from_lattice(cls, lattice_re, lattice_im, probs) -> "Constellation":
        """Build a unit-mean-energy constellation from integer lattice points."""
        re = np.asarray(lattice_re, dtype=np.int64)
        im = np.asarray(lattice_im, dtype=np.int64)
        p = np.asarray(probs, dtype=float)
        total = float(p.sum())
        if total <= 0.0:
            raise ShapingError("probabilities must have positive total mass")
        p = p / total
        mean_sq = float(p @ (re.astype(float) ** 2 + im.astype(float) ** 2))
        if mean_sq <= 0.0:
            raise ShapingError("alphabet mean energy must be positive")
        return cls(re, im, p, order=len(p), scale=1.0 / float(np.sqrt(mean_sq)))

    @property
    def points(self) -> np.ndarray:
        return (self.lattice_re + 1j * self.lattice_im) * self.scale

    @property
    def energies(self) -> np.ndarray:
        """Per-point symbol energy |a|^2 of the scaled points."""
        return (self.lattice_re.astype(float) ** 2 + self.lattice_im.astype(float) ** 2) * self.scale**2

    def mean_energy(self) -> float:
        return float(self.probs @ self.energies)

    def energy_variance(self) -> float:
        e = self.energies
        mu = float(self.probs @ e)
        return float(self.probs @ (e - mu) ** 2)

    def iq_moments(self) -> tuple[float, float, float]:
        """Second moments (E[I^2], E[Q^2], E[IQ]) of the scaled points."""
        i = self.lattice_re.astype(float) * self.scale
        q = self.lattice_im.astype(float) * self.scale
        return (
            float(self.probs @ i**2),
            float(self.probs @ q**2),
            float(self.probs @ (i * q)),
        )

    def entropy_bits(self) -> float:
        return entropy_bits(self.probs)

    def amplitude_levels(self) -> np.ndarray:
        """Sorted positive per-dimension amplitude levels of the integer lattice."""
        return np.unique(np.abs(self.lattice_re))

    def amplitude_marginal(self) -> np.ndarray:
        """Probability of each in-phase amplitude level, signs summed out."""
        levels = self.amplitude_levels()
        return np.array([float(self.probs[np.abs(self.lattice_re) == a].sum()) for a in levels])

    def with_probs(self, probs) -> "Constellation":
        """Same lattice with new probabilities, re-normalized to unit mean energy."""
        return Constellation.from_lattice(self.lattice_re, self.lattice_im, probs)

    @cached_property
    def _index_by_lattice(self) -> dict[tuple[int, int], int]:
        return {
            (int(re), int(im)): k
            for k, (re, im) in enumerate(zip(self.lattice_re, self.lattice_im))
        }

    def index_of(self, lattice_re: int, lattice_im: int) -> int:
        try:
            return self._index_by_lattice[(int(lattice_re), int(lattice_im))]
        except KeyError:
            raise ShapingError(f"({lattice_re}, {lattice_im}) is not a lattice point") from None


def build_constellation(order: int, normalization: str = "unit_mean_energy") -> Constellation:
    """Uniform square QAM on the odd-integer lattice, unit mean energy.

    Args:
        order: one of 4, 16, 64, 256.
        normalization: only "unit_mean_energy" is defined.
    """
    if order not in SUPPORTED_ORDERS:
        raise ShapingError(f"unsupported constellation order {order}; choose from {SUPPORTED_ORDERS}")
    if normalization != "unit_mean_energy":
        raise ShapingError(f"unknown normalization {normalization!r}")
    side = int(round(np.sqrt(order)))
    axis = np.arange(-side + 1, side, 2, dtype=np.int64)
    re, im = np.meshgrid(axis, axis, indexing="ij")
    probs = np.full(order, 1.0 / order)
    return Constellation.from_lattice(re.ravel(), im.ravel(), probs)


@dataclass(frozen=True)
class MaxwellBoltzmann:
    """Exponential-in-energy probability weighting fitted to an entropy target."""

    rate_param: float
    target_rate: float


def maxwell_boltzmann_probs(energies, rate_param: float) -> np.ndarray:
    e = np.asarray(energies, dtype=float)
    w = np.exp(-rate_param * (e - e.min()))
    return w / w.sum()


def fit_rate_param(energies, target_bits: float, tol_bits: float = ENTROPY_TOL_BITS) -> float:
    """Bisect the exponential rate parameter until the entropy hits the target.

    Entropy is strictly decreasing in the rate parameter (for non-degenerate
    energy sets), from log2(M) at zero toward log2(#minimum-energy points).
    Targets outside that open-closed range are infeasible.
    """
    e = np.asarray(energies, dtype=float)
    h_uniform = float(np.log2(len(e)))
    if target_bits > h_uniform + 1e-9:
        raise ShapingError(f"target entropy {target_bits} exceeds log2(M) = {h_uniform}")
    if abs(target_bits - h_uniform) <= 1e-9:
        return 0.0
    n_min = int(np.sum(np.isclose(e, e.min(), rtol=0.0, atol=1e-12)))
    h_floor = float(np.log2(n_min))
    if target_bits <= h_floor + 1e-9:
        raise ShapingError(
            f"target entropy {target_bits} is unreachable; the alphabet floor is {h_floor} bits"
        )

    def h(lam: float) -> float:
        return entropy_bits(maxwell_boltzmann_probs(e, lam))

    hi = 1.0
    while h(hi) > target_bits:
        hi *= 2.0
        if hi > 1e9:
            raise ShapingError("rate-parameter search failed to bracket the entropy target")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) > target_bits:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    if abs(h(lam) - target_bits) > tol_bits:
        raise ShapingError("entropy bisection did not converge")
    return lam


def fit_mb(constellation: Constellation, target_rate: float) -> tuple[MaxwellBoltzmann, Constellation]:
    """Fit exponential-in-energy point probabilities to a bits-per-symbol target.

    Returns the fitted parameters and a new constellation carrying the shaped
    probabilities, re-normalized to unit mean energy under them.
    """
    lam = fit_rate_param(constellation.energies, target_rate)
    probs = maxwell_boltzmann_probs(constellation.energies, lam)
    return MaxwellBoltzmann(rate_param=lam, target_rate=target_rate), constellation.with_probs(probs)
