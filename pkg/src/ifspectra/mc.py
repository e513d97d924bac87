"""Monte-Carlo oracle: waveform synthesis and empirical energy-signal spectra.

Waveforms are built on a circular grid (cyclic symbol extension), so the
linear-modulation sum and the dispersion operator are exact circular
convolutions and the interior statistics match the stationary analytic model
without windowing bias.  Spectra come from a Hann-window Welch estimator with
the record mean removed before transforming; the DC component is reported as a
separate line.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sp_fft
from scipy import signal as sp_signal

from .constellation import Constellation
from .psd_model import PsdCurve
from .pulses import FiberDispersion, PulseSpec, make_pulse
from .shaping import ShapedBlockStream

WAVEFORM_MAGIC = b"IFSW"
WAVEFORM_VERSION = 1


class McError(ValueError):
    pass


@dataclass(frozen=True)
class WelchConfig:
    """Averaged-periodogram settings; segment_len in samples, power of two."""

    segment_len: int
    overlap: float = 0.5
    window: str = "hann"

    def __post_init__(self) -> None:
        if self.segment_len < 8 or self.segment_len & (self.segment_len - 1):
            raise McError("segment_len must be a power of two >= 8")
        if not 0.0 <= self.overlap < 1.0:
            raise McError("overlap must lie in [0, 1)")
        if self.window != "hann":
            raise McError("only the hann window is supported")

    @property
    def step(self) -> int:
        return max(1, int(self.segment_len * (1.0 - self.overlap)))

    def n_segments(self, n_samples: int) -> int:
        if n_samples < self.segment_len:
            return 0
        return (n_samples - self.segment_len) // self.step + 1


@dataclass(eq=False)
class Waveform:
    """Sampled complex baseband field with its generation metadata."""

    samples: np.ndarray
    dt: float
    symbol_rate: float
    meta: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.complex128)

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return self.n * self.dt


def synthesize(stream: ShapedBlockStream, constellation: Constellation,
               pulse: PulseSpec, fiber: FiberDispersion | None = None,
               seed: int | None = None, workers: int = 1) -> Waveform:
    """Cyclic linear modulation of the stream, optionally dispersed.

    The symbol sequence is laid on a ring of n_symbols * samples_per_symbol
    samples; pulse shaping and the all-pass dispersion kernel act as circular
    convolutions, so every sample sees a full complement of neighbors.
    """
    if stream.n_symbols < 1:
        raise McError("empty stream")
    symbols = stream.symbols(constellation).ravel()
    sps = pulse.samples_per_symbol
    n = len(symbols) * sps
    shape = make_pulse(pulse)
    if shape.n > n:
        raise McError(
            f"waveform ring of {n} samples cannot hold a pulse of {shape.n} samples; "
            "use more symbols or a shorter span"
        )
    up = np.zeros(n, np.complex128)
    up[::sps] = symbols
    center = shape.n // 2
    ring = np.zeros(n, np.complex128)
    idx = (np.arange(shape.n) - center) % n
    ring[idx] = shape.samples
    spectrum = sp_fft.fft(up, workers=workers) * sp_fft.fft(ring, workers=workers)
    if fiber is not None and fiber.length_m > 0.0:
        w = 2.0 * math.pi * sp_fft.fftfreq(n, pulse.dt)
        spectrum *= np.exp(0.5j * fiber.accumulated_beta2 * w**2)
    samples = sp_fft.ifft(spectrum, workers=workers)
    meta = {
        "n_symbols": len(symbols),
        "block_length": stream.block_length,
        "method": stream.method,
        "pulse_shape": pulse.shape,
        "rolloff": pulse.rolloff,
        "samples_per_symbol": sps,
        "length_m": 0.0 if fiber is None else fiber.length_m,
    }
    return Waveform(samples, pulse.dt, 1.0 / pulse.symbol_period, meta, seed)


def energy_psd(waveform: Waveform, cfg: WelchConfig) -> PsdCurve:
    """Welch PSD of |field|^2 with the mean removed; DC reported as a line.

    The returned grid is the nonnegative half of the two-sided density, which
    matches the analytic model convention bin for bin when segment_len equals
    the model FFT length.
    """
    energy = np.abs(waveform.samples) ** 2
    mean = float(energy.mean())
    n_seg = cfg.n_segments(len(energy))
    if n_seg < 8:
        raise McError(
            f"only {n_seg} Welch segments available; need at least 8 "
            "(more symbols or a shorter segment_len)"
        )
    freqs, psd = sp_signal.welch(
        energy - mean,
        fs=1.0 / waveform.dt,
        window=cfg.window,
        nperseg=cfg.segment_len,
        noverlap=cfg.segment_len - cfg.step,
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    half = cfg.segment_len // 2
    meta = dict(waveform.meta)
    meta.update({"estimator": "welch", "segments": n_seg, "segment_len": cfg.segment_len})
    return PsdCurve(freqs[:half], psd[:half], lines=((0.0, mean**2),), meta=meta)


def intensity_spectrum(waveform: Waveform, amplitude: float, cfg: WelchConfig) -> PsdCurve:
    """Energy PSD scaled by the fourth power of the carrier amplitude."""
    base = energy_psd(waveform, cfg)
    scale = abs(amplitude) ** 4
    meta = dict(base.meta)
    meta["carrier_amplitude"] = amplitude
    return PsdCurve(
        base.freqs,
        base.values * scale,
        lines=tuple((f, p * scale) for f, p in base.lines),
        meta=meta,
    )


def dump_waveform(waveform: Waveform, path) -> None:
    """Binary dump: 4-byte magic, u32 version, u64 sample count, f64 dt,
    f64 symbol rate, then interleaved little-endian float64 re/im pairs."""
    header = WAVEFORM_MAGIC + struct.pack(
        "<IQdd", WAVEFORM_VERSION, waveform.n, waveform.dt, waveform.symbol_rate
    )
    inter = np.empty(2 * waveform.n)
    inter[0::2] = waveform.samples.real
    inter[1::2] = waveform.samples.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(inter.astype("<f8").tobytes())


def load_waveform(path) -> Waveform:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != WAVEFORM_MAGIC:
            raise McError("not a waveform dump")
        version, n, dt, rate = struct.unpack("<IQdd", fh.read(28))
        if version != WAVEFORM_VERSION:
            raise McError(f"unsupported waveform dump version {version}")
        raw = np.frombuffer(fh.read(16 * n), dtype="<f8")
    if len(raw) != 2 * n:
        raise McError("truncated waveform dump")
    return Waveform(raw[0::2] + 1j * raw[1::2], dt, rate, {"source": str(path)})
