"""Coherent optical fiber link simulator with Parzen-window detection.

Simulates 16-QAM dual-polarization transmission over dispersion-managed
and unmanaged multi-span fiber links and compares a Parzen-window
classifier against minimum-Euclidean-distance detection in terms of BER,
Q-factor, and reach.
"""

from .channel import AmpParams, FiberParams, LinkSpec, amplify, propagate_link, propagate_span
from .constellation import Alphabet, SymbolBlock, build_qam, demap_symbols, map_bits
from .detectors import (
    PwDetector,
    med_classify,
    optimize_radius,
    pw_classify,
    rasterize_regions,
    train_pw_detector,
    window_value,
)
from .dsp import (
    IqWaveform,
    RrcSpec,
    cd_compensate,
    dump_iq_csv,
    estimate_phase_rotation,
    matched_filter_downsample,
    rrc_shape,
)
from .errors import BlowupError, ConfigError, EstimationError, InputError, InternalError
from .harness import (
    RunConfig,
    SweepRow,
    dump_constellation,
    dump_regions,
    reach_at_q_threshold,
    run_point,
    sweep_power,
    sweep_reach,
    validate_channel,
    write_sweep_csv,
)
from .metrics import ErrorReport, count_errors, finalize_report, q_from_ber

__version__ = "0.1.0"
