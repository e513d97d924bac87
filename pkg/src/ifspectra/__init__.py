"""Intensity-fluctuation spectra for block-shaped optical signals.

The package splits into a small set of layers:

``constellation`` / ``shaping``
    QAM lattices, Maxwell-Boltzmann fitting, fixed-composition and
    bounded-energy block codecs, and exact block statistics.
``pulses``
    Pulse prototypes, chromatic dispersion, lagged beat spectra and the
    block envelope.
``psd_model``
    The semi-analytical energy-fluctuation PSD and its decomposition.
``mc``
    Waveform synthesis and Welch estimation used to validate the model.
``design``
    Spectral-dip geometry and optimal-symbol-rate rules.
``xpm``
    A pump-probe split-step simulator for cross-phase modulation.
``cli``
    A config-driven command line wrapping all of the above.
"""

from .constellation import (
    Constellation,
    MaxwellBoltzmann,
    ShapingError,
    build_constellation,
    entropy_bits,
    fit_mb,
    fit_rate_param,
    maxwell_boltzmann_probs,
)
from .shaping import (
    BlockStats,
    CcdmCodec,
    Composition,
    EssCodec,
    ShapedBlockStream,
    ShapedSource,
    best_composition,
    block_stats,
    ccdm_codebook_stats,
    ccdm_decode,
    ccdm_encode,
    choose_max_block_energy,
    ess_codebook_stats,
    ess_decode,
    ess_encode,
    ess_marginal_probs,
    iid_block_stats,
    make_source,
    pairwise_energy_covariance,
)
from .pulses import (
    FiberDispersion,
    PulseError,
    PulseField,
    PulseSpec,
    beat_spectrum,
    block_envelope,
    disperse,
    main_lobe_half_width,
    main_lobe_ratio,
    make_pulse,
)
from .psd_model import (
    BeatTable,
    ModelError,
    PsdCurve,
    PsdDecomposition,
    band_mean_db_deviation,
    build_beat_table,
    decompose,
    psd_iid,
    psd_shaped_1d,
    psd_shaped_2d,
)
from .mc import (
    McError,
    Waveform,
    WelchConfig,
    dump_waveform,
    energy_psd,
    intensity_spectrum,
    load_waveform,
    synthesize,
)
from .design import (
    DesignError,
    RatePreset,
    block_duration,
    dip_width,
    dispersed_duration,
    dispersion_broadening,
    general_rate,
    measure_dip_width,
    numeric_optimal_rate,
    opt_rate_shaped,
    opt_rate_unshaped,
    rate_preset,
)
from .xpm import (
    ChannelPlan,
    LinkSpec,
    PhaseNoiseResult,
    RateSweepResult,
    XpmError,
    run_pump_probe,
    ssfm_propagate,
    step_convergence,
    sweep_symbol_rate,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # constellation
    "Constellation",
    "MaxwellBoltzmann",
    "ShapingError",
    "build_constellation",
    "entropy_bits",
    "fit_mb",
    "fit_rate_param",
    "maxwell_boltzmann_probs",
    # shaping
    "BlockStats",
    "CcdmCodec",
    "Composition",
    "EssCodec",
    "ShapedBlockStream",
    "ShapedSource",
    "best_composition",
    "block_stats",
    "ccdm_codebook_stats",
    "ccdm_decode",
    "ccdm_encode",
    "choose_max_block_energy",
    "ess_codebook_stats",
    "ess_decode",
    "ess_encode",
    "ess_marginal_probs",
    "iid_block_stats",
    "make_source",
    "pairwise_energy_covariance",
    # pulses
    "FiberDispersion",
    "PulseError",
    "PulseField",
    "PulseSpec",
    "beat_spectrum",
    "block_envelope",
    "disperse",
    "main_lobe_half_width",
    "main_lobe_ratio",
    "make_pulse",
    # psd model
    "BeatTable",
    "ModelError",
    "PsdCurve",
    "PsdDecomposition",
    "band_mean_db_deviation",
    "build_beat_table",
    "decompose",
    "psd_iid",
    "psd_shaped_1d",
    "psd_shaped_2d",
    # monte carlo
    "McError",
    "Waveform",
    "WelchConfig",
    "dump_waveform",
    "energy_psd",
    "intensity_spectrum",
    "load_waveform",
    "synthesize",
    # design rules
    "DesignError",
    "RatePreset",
    "block_duration",
    "dip_width",
    "dispersed_duration",
    "dispersion_broadening",
    "general_rate",
    "measure_dip_width",
    "numeric_optimal_rate",
    "opt_rate_shaped",
    "opt_rate_unshaped",
    "rate_preset",
    # xpm
    "ChannelPlan",
    "LinkSpec",
    "PhaseNoiseResult",
    "RateSweepResult",
    "XpmError",
    "run_pump_probe",
    "ssfm_propagate",
    "step_convergence",
    "sweep_symbol_rate",
]
