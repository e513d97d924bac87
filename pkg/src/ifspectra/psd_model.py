"""Semi-analytical intensity-fluctuation PSD of a block-shaped symbol stream.

The model splits the power spectral density of |x(t)|^2, x the modulated
waveform, into

* spectral lines at multiples of the symbol rate, carried by the periodic
  mean intensity;
* a self-beating term, the symbol energy variance filtered by the lag-0 pulse
  beat spectrum;
* a neighbor-beating term summing the squared beat spectra over all nonzero
  symbol lags; and
* a block-shaping correction, the signed block-energy correlation weight
  filtered by the squared transform of the mean block intensity.

All terms are two-sided densities evaluated on the nonnegative half of an FFT
grid; the density is an even function of frequency, so nothing is lost.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sp_fft

from .pulses import PulseError, PulseField
from .shaping import BlockStats

NEIGHBOR_WEIGHTINGS = ("double_mean", "iq")

# relative floor applied to model values before dB conversion
DB_FLOOR_REL = 1e-12

_LAG_CHUNK = 64


class ModelError(ValueError):
    pass


@dataclass(eq=False)
class PsdCurve:
    """Two-sided spectral density sampled at nonnegative frequencies.

    ``lines`` holds (frequency, power) pairs for discrete spectral components;
    they are not folded into ``values``.
    """

    freqs: np.ndarray
    values: np.ndarray
    lines: tuple[tuple[float, float], ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.freqs.shape != self.values.shape:
            raise ModelError("frequency and value grids must match")

    def interp(self, freqs) -> np.ndarray:
        return np.interp(np.asarray(freqs, dtype=float), self.freqs, self.values)

    def db(self, floor_rel: float = DB_FLOOR_REL) -> np.ndarray:
        floor = floor_rel * float(self.values.max())
        return 10.0 * np.log10(np.maximum(self.values, floor))

    def total_power(self) -> float:
        """Integral of the two-sided density plus non-DC line powers."""
        cont = 2.0 * float(np.trapezoid(self.values, self.freqs))
        line = 2.0 * sum(p for f, p in self.lines if f != 0.0)
        return cont + line

    def write_csv(self, path, extra_meta: dict | None = None) -> None:
        meta = dict(self.meta)
        if extra_meta:
            meta.update(extra_meta)
        with open(path, "w", newline="") as fh:
            for key in sorted(meta):
                fh.write(f"# {key}={meta[key]}\n")
            writer = csv.writer(fh)
            writer.writerow(["f_hz", "psd", "psd_db"])
            db = self.db()
            for f, v, d in zip(self.freqs, self.values, db):
                writer.writerow([f"{f:.10e}", f"{v:.10e}", f"{d:.4f}"])
            if self.lines:
                writer.writerow([])
                writer.writerow(["line_f_hz", "line_power", ""])
                for f, p in self.lines:
                    writer.writerow([f"{f:.10e}", f"{p:.10e}", ""])


def fejer_sq(freqs, symbol_period: float, block_length: int) -> np.ndarray:
    """Squared normalized Dirichlet factor mapping a pulse beat spectrum to the
    beat spectrum of the mean intensity over block_length consecutive slots."""
    x = np.asarray(freqs, dtype=float) * symbol_period
    num = np.sin(np.pi * block_length * x)
    den = block_length * np.sin(np.pi * x)
    out = np.ones_like(x)
    ok = np.abs(den) > 1e-12
    out[ok] = (num[ok] / den[ok]) ** 2
    return out


@dataclass(eq=False)
class BeatTable:
    """Frequency-domain pulse data entering the PSD model.

    g0_sq is |FT of |s|^2|^2, neighbor_sq_sum the sum of squared beat spectra
    over every nonzero lag with overlap, env_sq the squared transform of the
    per-block mean intensity.  line_g_sq holds g0_sq evaluated exactly at
    multiples of the symbol rate.
    """

    freqs: np.ndarray
    g0_sq: np.ndarray
    neighbor_sq_sum: np.ndarray
    env_sq: np.ndarray
    symbol_period: float
    block_length: int
    n_fft: int
    dt: float
    max_lag: int
    line_freqs: np.ndarray
    line_g_sq: np.ndarray


def build_beat_table(pulse: PulseField, symbol_period: float, block_length: int,
                     n_fft: int | None = None, workers: int = 1) -> BeatTable:
    """Accumulate the lag-beat spectra of a (possibly dispersed) pulse.

    Every lag with any overlap contributes, so truncation of the neighbor sum
    is exact.  Negative lags reuse the positive-lag FFTs through the frequency
    reversal |G(-m, f)| = |G(m, -f)|.
    """
    if block_length < 1:
        raise ModelError("block length must be at least 1")
    sps_f = symbol_period / pulse.dt
    sps = round(sps_f)
    if abs(sps_f - sps) > 1e-9 or sps < 4:
        raise ModelError("symbol period must be an integer (>= 4) number of samples")
    n = pulse.n
    if n_fft is None:
        n_fft = _default_nfft(n, sps, block_length)
    if n_fft < n:
        raise ModelError("n_fft must be at least the pulse length")
    if n_fft % sps:
        raise ModelError("n_fft must be a multiple of samples_per_symbol")

    x = pulse.samples
    prod0 = (x * np.conj(x)).real.astype(np.complex128)
    g0 = sp_fft.fft(prod0, n_fft, workers=workers) * pulse.dt
    g0_sq_full = np.abs(g0) ** 2

    max_lag = (n - 1) // sps
    neighbor_full = np.zeros(n_fft)
    for start in range(1, max_lag + 1, _LAG_CHUNK):
        stop = min(start + _LAG_CHUNK, max_lag + 1)
        rows = np.zeros((stop - start, n), np.complex128)
        for i, m in enumerate(range(start, stop)):
            s = m * sps
            rows[i, s:] = x[s:] * np.conj(x[: n - s])
        spec = sp_fft.fft(rows, n_fft, axis=1, workers=workers) * pulse.dt
        mag = np.abs(spec) ** 2
        acc = mag.sum(axis=0)
        neighbor_full += acc
        neighbor_full += np.roll(acc[::-1], 1)  # negative lags: bin k -> -k

    half = n_fft // 2
    freqs = np.arange(half) / (n_fft * pulse.dt)
    env = g0_sq_full[:half] * fejer_sq(freqs, symbol_period, block_length)

    n_lines = sps // 2
    line_freqs = np.arange(n_lines) / symbol_period
    line_bins = np.arange(n_lines) * (n_fft // sps)
    return BeatTable(
        freqs=freqs,
        g0_sq=g0_sq_full[:half],
        neighbor_sq_sum=neighbor_full[:half],
        env_sq=env,
        symbol_period=symbol_period,
        block_length=block_length,
        n_fft=n_fft,
        dt=pulse.dt,
        max_lag=max_lag,
        line_freqs=line_freqs,
        line_g_sq=g0_sq_full[line_bins],
    )


def _default_nfft(n: int, sps: int, block_length: int) -> int:
    # resolve the block-envelope oscillation with a few bins per period
    need = max(n, 8 * block_length * sps, 4096)
    n_fft = sps
    while n_fft < need:
        n_fft *= 2
    return n_fft


def _neighbor_weight(stats: BlockStats, neighbor_weighting: str) -> float:
    if neighbor_weighting == "double_mean":
        return 2.0 * stats.mean_energy**2
    if neighbor_weighting == "iq":
        return stats.iq_beating_weight
    raise ModelError(
        f"unknown neighbor weighting {neighbor_weighting!r}; "
        f"choose from {NEIGHBOR_WEIGHTINGS}"
    )


@dataclass(eq=False)
class PsdDecomposition:
    """Model terms on the beat-table grid; shaping_correction keeps its sign.

    ``total`` is the exact component sum (it may graze zero from below when
    sampled statistics are fed in; ``model_valid`` flags that).  ``curve``
    applies the nonnegative floor required of a PsdCurve.
    """

    freqs: np.ndarray
    self_beating: np.ndarray
    shaping_correction: np.ndarray
    neighbor_beating: np.ndarray
    total: np.ndarray
    lines: tuple[tuple[float, float], ...]
    neighbor_weighting: str
    model_valid: bool

    def curve(self, meta: dict | None = None) -> PsdCurve:
        scale = float(np.abs(self.total).max())
        values = np.maximum(self.total, DB_FLOOR_REL * scale)
        return PsdCurve(self.freqs, values, self.lines, meta or {})


def decompose(stats: BlockStats, beats: BeatTable,
              neighbor_weighting: str = "iq",
              include_correction: bool = True) -> PsdDecomposition:
    """Evaluate every model term for one source on one beat table."""
    if include_correction and stats.correction_coeff != 0.0 \
            and stats.block_length != beats.block_length:
        raise ModelError(
            f"stats are for block length {stats.block_length} but the beat table "
            f"was built for {beats.block_length}"
        )
    T = beats.symbol_period
    self_term = (stats.energy_variance / T) * beats.g0_sq
    if include_correction:
        corr_term = (stats.correction_coeff / T) * beats.env_sq
    else:
        corr_term = np.zeros_like(beats.g0_sq)
    w = _neighbor_weight(stats, neighbor_weighting)
    neigh_term = (w / T) * beats.neighbor_sq_sum
    total = self_term + corr_term + neigh_term
    scale = float(np.abs(total).max())
    model_valid = bool(total.min() >= -1e-9 * scale)
    line_scale = stats.mean_energy**2 / T**2
    lines = tuple(
        (float(f), float(line_scale * g)) for f, g in zip(beats.line_freqs, beats.line_g_sq)
    )
    return PsdDecomposition(
        freqs=beats.freqs,
        self_beating=self_term,
        shaping_correction=corr_term,
        neighbor_beating=neigh_term,
        total=total,
        lines=lines,
        neighbor_weighting=neighbor_weighting,
        model_valid=model_valid,
    )


def psd_iid(stats: BlockStats, beats: BeatTable,
            neighbor_weighting: str = "double_mean") -> PsdCurve:
    """Model PSD with symbols treated as independent (no block correction).

    The printed form of the baseline model weights the neighbor term with twice
    the squared mean energy; pass neighbor_weighting="iq" for the two-quadrature
    weighting instead.
    """
    dec = decompose(stats, beats, neighbor_weighting, include_correction=False)
    return dec.curve({"model": "iid", "neighbor_weighting": neighbor_weighting})


def psd_shaped_1d(stats: BlockStats, beats: BeatTable) -> PsdCurve:
    """Block-shaped model in its energy-only form: doubled-mean neighbor
    weighting plus the signed block-envelope correction."""
    dec = decompose(stats, beats, "double_mean", include_correction=True)
    return dec.curve({"model": "shaped_1d", "neighbor_weighting": "double_mean"})


def psd_shaped_2d(stats: BlockStats, beats: BeatTable) -> PsdCurve:
    """Block-shaped model in its two-quadrature form: neighbor weighting from
    the I/Q second moments plus the signed block-envelope correction."""
    dec = decompose(stats, beats, "iq", include_correction=True)
    return dec.curve({"model": "shaped_2d", "neighbor_weighting": "iq"})


def band_mean_db_deviation(candidate: PsdCurve, reference: PsdCurve,
                           f_lo: float, f_hi: float,
                           exclude_freqs=(), exclude_half_width: float = 0.0) -> float:
    """Mean absolute dB deviation over the reference bins inside [f_lo, f_hi].

    Bins within exclude_half_width of any excluded frequency are dropped; the
    candidate is interpolated onto the reference grid.
    """
    f = reference.freqs
    mask = (f >= f_lo) & (f <= f_hi)
    for fx in exclude_freqs:
        mask &= np.abs(f - fx) > exclude_half_width
    if not mask.any():
        raise ModelError("comparison band contains no reference bins")
    ref = reference.values[mask]
    cand = candidate.interp(f[mask])
    if (ref <= 0).any() or (cand <= 0).any():
        raise ModelError("comparison band contains nonpositive density values")
    return float(np.mean(np.abs(10.0 * np.log10(cand / ref))))
