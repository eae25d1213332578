"""Joint communication and sensing with compressive sidelobe beams.

A receive (or transmit) array keeps its mainlobe on the link partner while
random subsets of elements are switched off, perturbing only the sidelobes.
Data symbols are decoded under every configuration, and the per-beam
residual after mainlobe removal is correlated against predicted beam
patterns to estimate the angles of reflected paths, all from the very same
data-carrying signal.
"""

from .arrays import (
    AntennaSubset,
    ArrayGeometry,
    SidelobeCodebook,
    array_factor,
    codebook_from_dict,
    codebook_to_dict,
    directivity_loss_db,
    load_codebook,
    mainlobe_sidelobe_margin_db,
    make_weight_vector,
    pattern_matrix,
    randomness_space_size,
    sample_codebook,
    save_codebook,
    steering_vector,
)
from .channel import (
    Channel,
    FrameCapture,
    PathComponent,
    Reflector,
    Scene,
    beam_gains,
    channel_from_dict,
    channel_matrix,
    channel_to_dict,
    effective_gain,
    scene_from_dict,
    scene_to_channel,
    scene_to_dict,
    transmit_frame,
)
from .experiments import (
    ExperimentConfig,
    ExperimentResult,
    TrialRecord,
    load_result,
    rate_calculator,
    run_experiment,
    save_result,
    sweep_array_size,
    sweep_beams,
    sweep_off_antennas,
    sweep_side,
    sweep_snr,
    sweep_symbols,
    sweep_tx_beamwidth,
)
from .sensing import (
    AngleSpectrum,
    AoAEstimate,
    Fingerprint,
    JcsResult,
    JcsSetup,
    angle_spectrum,
    compute_fingerprint,
    estimate_aoa,
    estimate_mainlobe_amplitude,
    match_angles,
    run_jcs,
)
from .waveform import (
    PAM4,
    QAM4,
    QAM16,
    ModulationScheme,
    Packet,
    bit_error_rate,
    demodulate,
    estimate_equalizer,
    get_scheme,
    modulate,
)

__version__ = "0.1.0"
