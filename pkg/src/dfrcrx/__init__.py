"""Coherent receive-filter design and simulation for multi-waveform radar-comm.

A transmitter that embeds data by switching waveforms pulse to pulse breaks
the classic assumption behind slow-time Doppler processing: each waveform's
receive filter produces different range sidelobes.  This package designs,
in closed form, banks of receive filters whose outputs are exactly
identical across the waveform alphabet (on a linear- or circular-
convolution model), plus the scene simulation, range-Doppler processing,
and Monte-Carlo detection/SER machinery to evaluate them.
"""

__version__ = "0.1.0"

from .convmat import (
    BlockSystem,
    CircularConvMatrix,
    Feasibility,
    LinearConvMatrix,
    assemble_block_system,
    build_circular_conv,
    build_linear_conv,
    check_feasibility,
    default_filter_length,
    default_peak_index,
)
from .errors import (
    ConditioningError,
    ConfigError,
    DimensionError,
    InfeasibleError,
)
from .filterdesign import (
    DesignReport,
    FilterBank,
    coherence_error,
    design_coherent_circular,
    design_coherent_linear,
    design_penalized_iterative_baseline,
    design_uncoherent_ls_baseline,
    evaluate_filterbank,
    filter_outputs,
    nullspace_gradient_norm,
    solve_coherent,
    solve_constrained_ls_oracle,
)
from .processing import (
    CurvePoint,
    DetectionParams,
    DetectionResult,
    RangeDopplerMap,
    apply_filterbank,
    detect_targets,
    estimate_pd,
    nearest_doppler_bin,
    range_doppler_map,
    scene_truth,
    simulate_ser,
    snr_at_ser,
    wilson_interval,
)
from .radarsim import (
    DataMatrix,
    PulseTrain,
    Scatterer,
    Scene,
    SceneConfig,
    TargetSpec,
    generate_scene,
    paper_scene_targets,
    random_pulse_train,
    simulate_comm_received,
    simulate_ncpi,
    simulate_received_pulse,
)
from .waveform import (
    BasebandWaveform,
    ChipSequence,
    ModulationParams,
    WaveformAlphabet,
    cross_correlation_peak,
    decimate_to_baseband,
    demodulate_iq,
    generate_chip_sequence,
    make_alphabet,
    synth_dpsk,
    synth_msk,
    to_passband,
)
