"""Joint data detection and reflector angle estimation from one capture.

The receiver keeps decoding symbols under a fixed mainlobe while the
ON-subset hops pseudorandomly. Dividing each sample by its symbol leaves
the per-beam channel gain; averaging its magnitude gives the mainlobe
amplitude, and the per-beam residual after mainlobe removal is a
fingerprint that varies with the beam's sidelobes. Correlating that
fingerprint against the predicted beam responses over an angle grid
recovers where the reflected energy came from.

Two fingerprint readings are provided. The non-coherent default uses
sample magnitudes only, which makes it indifferent to any per-beam global
phase (sync drift, oscillator offsets). The coherent variant keeps the
complex residual and resolves angles noticeably better when beams are
phase-stable. Note one structural caveat of magnitude-only sensing on an
ideal symmetric array: beam magnitude patterns satisfy
``|R(m, u0+x)| = |R(m, u0-x)``| in sine space, so a reflector and its
mirror image about the mainlobe produce identical fingerprints and cannot
be told apart without phase information or a phase-asymmetric array (see
``ArrayGeometry.phase_error_rad``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .arrays import ArrayGeometry, SidelobeCodebook, pattern_matrix, steering_vector
from .channel import Channel, FrameCapture, beam_gains, transmit_frame
from .waveform import (
    ModulationScheme,
    QAM4,
    bit_error_rate,
    demodulate,
    estimate_equalizer,
    modulate,
    random_bits,
)

__all__ = [
    "Fingerprint",
    "AngleSpectrum",
    "AoAEstimate",
    "estimate_mainlobe_amplitude",
    "compute_fingerprint",
    "angle_spectrum",
    "estimate_aoa",
    "JcsSetup",
    "JcsResult",
    "run_jcs",
    "spectrum_to_csv",
    "fingerprint_to_csv",
    "match_angles",
]

VARIANTS = ("noncoherent", "noncoherent-complex", "coherent")


@dataclass(frozen=True)
class Fingerprint:
    """Per-beam residual after mainlobe removal; length equals the beam count."""

    values: np.ndarray
    variant: str
    mainlobe_amp: complex

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        vals = np.asarray(self.values)
        if self.variant == "coherent":
            vals = vals.astype(complex)
        else:
            vals = vals.astype(float)
            if np.any(vals < 0):
                raise ValueError("non-coherent fingerprint values must be non-negative")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class AngleSpectrum:
    """Correlation score over an angle grid, plus the peak-search exclusion window."""

    grid_deg: np.ndarray
    scores: np.ndarray
    exclusion_center_deg: float
    exclusion_halfwidth_deg: float

    def __post_init__(self):
        grid = np.asarray(self.grid_deg, dtype=float)
        scores = np.asarray(self.scores, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing with at least two angles")
        if scores.shape != grid.shape:
            raise ValueError("scores and grid lengths differ")
        if not np.all(np.isfinite(scores)) or np.any(scores < 0):
            raise ValueError("scores must be finite and non-negative")
        grid.flags.writeable = False
        scores.flags.writeable = False
        object.__setattr__(self, "grid_deg", grid)
        object.__setattr__(self, "scores", scores)


@dataclass(frozen=True)
class AoAEstimate:
    """Estimated angles in descending score order; ``complete`` is False when
    fewer peaks than requested were found."""

    angles_deg: tuple[float, ...]
    scores: tuple[float, ...]
    complete: bool


def estimate_mainlobe_amplitude(capture: FrameCapture) -> float:
    """Average magnitude of sample-over-symbol across the whole capture.

    The sidelobe contributions average out across many random beam
    configurations, leaving the mainlobe amplitude (times the path gain).
    """
    q = capture.samples / capture.symbols_used
    return float(np.abs(q).mean())


def compute_fingerprint(
    capture: FrameCapture,
    a_ml: complex | float | None = None,
    variant: str = "noncoherent",
) -> Fingerprint:
    """Per-beam residual after removing the mainlobe amplitude.

    Variants:

    * ``"noncoherent"`` (default): ``F[m] = mean_n | |y/s| - A |`` with the
      real mainlobe amplitude ``A``; uses magnitudes only, so per-beam
      phase rotations do not affect it.
    * ``"noncoherent-complex"``: ``F[m] = mean_n | y/s - A |`` with the
      same real ``A`` subtracted from the complex samples.
    * ``"coherent"``: complex mainlobe estimate ``A = mean(y/s)`` and
      complex residual ``F[m] = mean_n (y/s - A)``; the fingerprint sums
      to zero across beams by construction.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    q = capture.samples / capture.symbols_used
    if variant == "coherent":
        aml = complex(q.mean()) if a_ml is None else complex(a_ml)
        values = (q - aml).mean(axis=0)
    else:
        aml = estimate_mainlobe_amplitude(capture) if a_ml is None else float(a_ml)
        if not math.isfinite(aml):
            raise ValueError("mainlobe amplitude must be finite")
        if variant == "noncoherent":
            values = np.abs(np.abs(q) - aml).mean(axis=0)
        else:
            values = np.abs(q - aml).mean(axis=0)
    return Fingerprint(values=values, variant=variant, mainlobe_amp=aml)


def _beam_response(codebook: SidelobeCodebook, grid_deg, codebook_on_tx: bool) -> np.ndarray:
    resp = pattern_matrix(codebook, grid_deg)
    return resp.conj() if codebook_on_tx else resp


def angle_spectrum(
    fingerprint: Fingerprint,
    codebook: SidelobeCodebook,
    grid_deg,
    exclusion_center_deg: float | None = None,
    exclusion_halfwidth_deg: float = 3.3,
    codebook_on_tx: bool = False,
) -> AngleSpectrum:
    """Correlate the fingerprint against predicted beam responses per grid angle.

    Scores are normalized matched-filter correlations: per angle, the beam
    response column (its magnitude for the non-coherent variants) is
    centered across beams and scaled to unit norm before the inner product
    with the beam-centered fingerprint. Centering removes the response the
    mainlobe itself would produce (a beam-independent constant), and the
    normalization makes the score comparable across angles; the peak angle
    of a noise-free single-path fingerprint is then exact by
    Cauchy-Schwarz. Non-coherent scores are clamped at zero.
    """
    grid = np.asarray(grid_deg, dtype=float)
    resp = _beam_response(codebook, grid, codebook_on_tx)
    if fingerprint.values.shape[0] != resp.shape[0]:
        raise ValueError(
            f"fingerprint has {fingerprint.values.shape[0]} beams, codebook has {resp.shape[0]}"
        )
    if fingerprint.variant == "coherent":
        cols = resp - resp.mean(axis=0, keepdims=True)
        norms = np.linalg.norm(cols, axis=0)
        norms[norms < 1e-12] = np.inf
        scores = np.abs(cols.conj().T @ fingerprint.values) / norms
    else:
        mag = np.abs(resp)
        cols = mag - mag.mean(axis=0, keepdims=True)
        norms = np.linalg.norm(cols, axis=0)
        norms[norms < 1e-12] = np.inf
        centered = fingerprint.values - fingerprint.values.mean()
        scores = np.maximum(centered @ cols / norms, 0.0)
    center = codebook.mainlobe_deg if exclusion_center_deg is None else float(exclusion_center_deg)
    return AngleSpectrum(
        grid_deg=grid,
        scores=scores,
        exclusion_center_deg=center,
        exclusion_halfwidth_deg=float(exclusion_halfwidth_deg),
    )


def estimate_aoa(
    spectrum: AngleSpectrum,
    num_paths: int = 1,
    min_separation_deg: float = 5.0,
) -> AoAEstimate:
    """Top peaks of the spectrum outside the exclusion window.

    Peaks are strict interior local maxima of the kept region (a rising
    edge into the exclusion boundary is not a peak). The highest-scoring
    peaks are taken greedily subject to the pairwise separation, ties
    breaking toward the smaller angle. Fewer peaks than requested yields a
    shorter list with ``complete=False``.
    """
    if num_paths < 1:
        raise ValueError("num_paths must be >= 1")
    grid = spectrum.grid_deg
    keep = np.abs(grid - spectrum.exclusion_center_deg) > spectrum.exclusion_halfwidth_deg
    if not keep.any():
        raise ValueError("exclusion window removes the entire grid")
    sc = np.where(keep, spectrum.scores, -np.inf)
    interior = np.zeros(grid.size, dtype=bool)
    interior[1:-1] = (
        keep[1:-1]
        & keep[:-2]
        & keep[2:]
        & (sc[1:-1] > sc[:-2])
        & (sc[1:-1] >= sc[2:])
    )
    idx = np.where(interior)[0]
    order = sorted(idx, key=lambda i: (-sc[i], grid[i]))
    chosen: list[int] = []
    for i in order:
        if all(abs(grid[i] - grid[j]) >= min_separation_deg for j in chosen):
            chosen.append(i)
        if len(chosen) == num_paths:
            break
    return AoAEstimate(
        angles_deg=tuple(float(grid[i]) for i in chosen),
        scores=tuple(float(sc[i]) for i in chosen),
        complete=len(chosen) == num_paths,
    )


def match_angles(true_deg, est_deg) -> list[float]:
    """Per-true-angle absolute errors under the best one-to-one assignment.

    Unmatched true angles (when fewer estimates exist) get NaN.
    """
    from scipy.optimize import linear_sum_assignment

    true_arr = np.atleast_1d(np.asarray(true_deg, dtype=float))
    est_arr = np.atleast_1d(np.asarray(est_deg, dtype=float))
    errors = [math.nan] * true_arr.size
    if est_arr.size == 0:
        return errors
    cost = np.abs(true_arr[:, None] - est_arr[None, :])
    rows, cols = linear_sum_assignment(cost)
    for r, c in zip(rows, cols):
        errors[r] = float(cost[r, c])
    return errors


@dataclass(frozen=True)
class JcsSetup:
    """Everything one joint detection-plus-sensing run needs, in concrete form."""

    channel: Channel
    codebook: SidelobeCodebook
    fixed_weight: np.ndarray
    fixed_geometry: ArrayGeometry
    scheme: ModulationScheme = QAM4
    symbols_per_beam: int = 100
    noise_sigma: float = 0.0
    seed: int = 0
    preamble_len: int = 16
    genie: bool = False
    grid_deg: np.ndarray = field(default_factory=lambda: np.arange(-50.0, 50.0001, 0.25))
    exclusion_halfwidth_deg: float = 3.3
    variant: str = "coherent"
    num_paths: int = 1
    min_separation_deg: float = 5.0
    codebook_on_tx: bool = False


@dataclass(frozen=True)
class JcsResult:
    ber: float
    aoa_estimates: tuple[float, ...]
    spectrum: AngleSpectrum
    fingerprint: Fingerprint
    mainlobe_amp: complex
    capture: FrameCapture
    estimate: AoAEstimate
    true_nlos_angles_deg: tuple[float, ...]
    equalizer_gain: complex
    payload_bits: np.ndarray
    detected_bits: np.ndarray


def _synthesize_capture(setup: JcsSetup, symbols: np.ndarray, noise_seed) -> FrameCapture:
    gains = beam_gains(
        setup.channel,
        setup.codebook,
        setup.fixed_weight,
        setup.fixed_geometry,
        setup.codebook_on_tx,
    )
    y = gains[None, :] * symbols
    if setup.noise_sigma > 0:
        rng = np.random.default_rng(noise_seed)
        z = rng.standard_normal(symbols.shape) + 1j * rng.standard_normal(symbols.shape)
        y = y + (setup.noise_sigma / np.sqrt(2.0)) * z
    return FrameCapture(
        samples=y,
        codebook=setup.codebook,
        symbols_used=symbols,
        codebook_on_tx=setup.codebook_on_tx,
    )


def run_jcs(setup: JcsSetup) -> JcsResult:
    """Detect the payload, then sense reflector angles from the same capture.

    The preamble rides under the full-array beam; the single-tap gain it
    yields, scaled by the known subset-to-full mainlobe ratio, sets the
    decision boundary for the compressive-beam payload. Sensing divides by
    the detector's decisions unless ``genie`` supplies the true symbols.
    """
    cb = setup.codebook
    n_cb = cb.geometry.num_elements
    scale = cb.subset_size / n_cb

    rng_bits = np.random.default_rng([setup.seed, 11])
    n_payload = setup.symbols_per_beam * cb.num_beams
    bits = random_bits(rng_bits, n_payload * setup.scheme.bits_per_symbol)
    symbols = modulate(bits, setup.scheme).reshape(setup.symbols_per_beam, cb.num_beams)

    capture = _synthesize_capture(setup, symbols, noise_seed=[setup.seed, 12])

    # preamble under the all-ON beam on the codebook side
    full = SidelobeCodebook(
        geometry=cb.geometry,
        mainlobe_deg=cb.mainlobe_deg,
        subsets=(tuple(range(n_cb)),),
    )
    pre_bits = random_bits(np.random.default_rng([setup.seed, 13]), 2 * setup.preamble_len)
    pre_symbols = modulate(pre_bits, QAM4)
    g_full = beam_gains(
        setup.channel, full, setup.fixed_weight, setup.fixed_geometry, setup.codebook_on_tx
    )[0]
    y_pre = g_full * pre_symbols
    if setup.noise_sigma > 0:
        rng = np.random.default_rng([setup.seed, 14])
        z = rng.standard_normal(pre_symbols.shape) + 1j * rng.standard_normal(pre_symbols.shape)
        y_pre = y_pre + (setup.noise_sigma / np.sqrt(2.0)) * z

    g_hat = estimate_equalizer(y_pre, pre_symbols)
    detected_bits, decisions = demodulate(capture.samples, g_hat, setup.scheme, scale)
    ber = bit_error_rate(bits, detected_bits)

    sensing_symbols = symbols if setup.genie else decisions
    sensing_capture = capture.with_symbols(sensing_symbols)
    fingerprint = compute_fingerprint(sensing_capture, variant=setup.variant)
    los_angle = setup.channel.los.aod_deg if setup.codebook_on_tx else setup.channel.los.aoa_deg
    spectrum = angle_spectrum(
        fingerprint,
        cb,
        setup.grid_deg,
        exclusion_center_deg=los_angle,
        exclusion_halfwidth_deg=setup.exclusion_halfwidth_deg,
        codebook_on_tx=setup.codebook_on_tx,
    )
    estimate = estimate_aoa(spectrum, setup.num_paths, setup.min_separation_deg)
    true_angles = tuple(
        (p.aod_deg if setup.codebook_on_tx else p.aoa_deg) for p in setup.channel.nlos
    )
    return JcsResult(
        ber=ber,
        aoa_estimates=estimate.angles_deg,
        spectrum=spectrum,
        fingerprint=fingerprint,
        mainlobe_amp=fingerprint.mainlobe_amp,
        capture=sensing_capture,
        estimate=estimate,
        true_nlos_angles_deg=true_angles,
        equalizer_gain=g_hat,
        payload_bits=bits,
        detected_bits=detected_bits,
    )


def spectrum_to_csv(spectrum: AngleSpectrum, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["angle_deg", "score"])
        for angle, score in zip(spectrum.grid_deg, spectrum.scores):
            writer.writerow([f"{angle:.6g}", f"{score:.10g}"])


def fingerprint_to_csv(fingerprint: Fingerprint, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beam_index", "F_value_re", "F_value_im", "variant"])
        for i, v in enumerate(np.atleast_1d(fingerprint.values)):
            c = complex(v)
            writer.writerow([i, f"{c.real:.10g}", f"{c.imag:.10g}", fingerprint.variant])
