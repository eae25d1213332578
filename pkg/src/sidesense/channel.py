"""Sparse multipath channels, reflector scene geometry, and frame synthesis.

A channel is a line-of-sight path plus a handful of single-bounce reflected
paths, each carrying an arrival angle (at the receiver), a departure angle
(at the transmitter) and a complex amplitude. Scenes describe the same
thing geometrically (node positions, reflector positions, reflection
coefficients) and are lowered to channels with free-space amplitudes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .arrays import ArrayGeometry, SidelobeCodebook, pattern_matrix, steering_vector

__all__ = [
    "PathComponent",
    "Channel",
    "Reflector",
    "Scene",
    "scene_to_channel",
    "channel_matrix",
    "effective_gain",
    "beam_gains",
    "transmit_frame",
    "FrameCapture",
    "scene_to_dict",
    "scene_from_dict",
    "channel_to_dict",
    "channel_from_dict",
]

_DEG = np.pi / 180.0


def _check_angle(angle_deg: float, what: str) -> float:
    a = float(angle_deg)
    if not -90.0 <= a <= 90.0 or not math.isfinite(a):
        raise ValueError(f"{what} angle {angle_deg!r} outside [-90, +90] degrees")
    return a


@dataclass(frozen=True)
class PathComponent:
    """One propagation path: arrival/departure angles and complex amplitude."""

    aoa_deg: float
    aod_deg: float
    amp: complex

    def __post_init__(self):
        object.__setattr__(self, "aoa_deg", _check_angle(self.aoa_deg, "arrival"))
        object.__setattr__(self, "aod_deg", _check_angle(self.aod_deg, "departure"))
        object.__setattr__(self, "amp", complex(self.amp))


@dataclass(frozen=True)
class Channel:
    """LOS path plus K sparse reflected paths."""

    los: PathComponent
    nlos: tuple[PathComponent, ...] = ()

    def __post_init__(self):
        if abs(self.los.amp) <= 0.0:
            raise ValueError("LOS amplitude must be nonzero")
        object.__setattr__(self, "nlos", tuple(self.nlos))

    @property
    def paths(self) -> tuple[PathComponent, ...]:
        return (self.los,) + self.nlos

    def scaled(self, c: complex) -> "Channel":
        """All path amplitudes multiplied by ``c``."""
        return Channel(
            los=PathComponent(self.los.aoa_deg, self.los.aod_deg, self.los.amp * c),
            nlos=tuple(PathComponent(p.aoa_deg, p.aod_deg, p.amp * c) for p in self.nlos),
        )

    def mirrored(self) -> "Channel":
        """Role-swapped link: arrival and departure angles exchanged, amplitudes conjugated.

        Running the codebook on the transmit side of this channel produces,
        sample for sample, the complex conjugate of the receive-side capture
        on the original channel, hence identical magnitudes. Plain physical
        reciprocity (no conjugation) preserves the statistics but not the
        literal sample values.
        """
        return Channel(
            los=PathComponent(self.los.aod_deg, self.los.aoa_deg, self.los.amp.conjugate()),
            nlos=tuple(
                PathComponent(p.aod_deg, p.aoa_deg, p.amp.conjugate()) for p in self.nlos
            ),
        )


@dataclass(frozen=True)
class Reflector:
    """Point reflector: 2-D position (m) and complex reflection coefficient."""

    position: tuple[float, float]
    gamma: complex

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "gamma", complex(self.gamma))


@dataclass(frozen=True)
class Scene:
    """Physical layout: node positions, boresights, reflectors, wavelength."""

    tx_pos: tuple[float, float]
    rx_pos: tuple[float, float]
    tx_boresight_deg: float = 0.0
    rx_boresight_deg: float = 180.0
    reflectors: tuple[Reflector, ...] = ()
    carrier_wavelength_m: float = 0.005

    def __post_init__(self):
        tx = (float(self.tx_pos[0]), float(self.tx_pos[1]))
        rx = (float(self.rx_pos[0]), float(self.rx_pos[1]))
        if tx == rx:
            raise ValueError("tx_pos and rx_pos must differ")
        for i, r in enumerate(self.reflectors):
            if r.position == tx or r.position == rx:
                raise ValueError(f"reflector {i} coincides with a node position")
        if not self.carrier_wavelength_m > 0:
            raise ValueError("carrier_wavelength_m must be positive")
        object.__setattr__(self, "tx_pos", tx)
        object.__setattr__(self, "rx_pos", rx)
        object.__setattr__(self, "reflectors", tuple(self.reflectors))


def _relative_angle_deg(from_pos, to_pos, boresight_deg: float, what: str) -> float:
    """Angle of ``to_pos`` as seen from ``from_pos``, relative to a boresight."""
    dx = to_pos[0] - from_pos[0]
    dy = to_pos[1] - from_pos[1]
    world = math.degrees(math.atan2(dy, dx))
    rel = (world - boresight_deg + 180.0) % 360.0 - 180.0
    if not -90.0 <= rel <= 90.0:
        raise ValueError(f"{what} at {rel:.1f} degrees is outside the [-90, +90] field of view")
    return rel


def scene_to_channel(scene: Scene) -> Channel:
    """Lower a geometric scene to a path-list channel.

    LOS amplitude is the free-space value ``lambda / (4*pi*d)`` with zero
    phase (the phase reference). Each reflected path gets the free-space
    amplitude over its two-segment length, the reflector's complex
    coefficient, and the propagation phase ``exp(-j*2*pi*length/lambda)``.
    """
    lam = scene.carrier_wavelength_m
    d_los = math.dist(scene.tx_pos, scene.rx_pos)
    los = PathComponent(
        aoa_deg=_relative_angle_deg(scene.rx_pos, scene.tx_pos, scene.rx_boresight_deg, "LOS"),
        aod_deg=_relative_angle_deg(scene.tx_pos, scene.rx_pos, scene.tx_boresight_deg, "LOS"),
        amp=lam / (4.0 * math.pi * d_los),
    )
    nlos = []
    for i, refl in enumerate(scene.reflectors):
        aod = _relative_angle_deg(
            scene.tx_pos, refl.position, scene.tx_boresight_deg, f"reflector {i} (from TX)"
        )
        aoa = _relative_angle_deg(
            scene.rx_pos, refl.position, scene.rx_boresight_deg, f"reflector {i} (from RX)"
        )
        length = math.dist(scene.tx_pos, refl.position) + math.dist(refl.position, scene.rx_pos)
        amp = refl.gamma * lam / (4.0 * math.pi * length)
        amp *= complex(math.cos(-2.0 * math.pi * length / lam), math.sin(-2.0 * math.pi * length / lam))
        nlos.append(PathComponent(aoa_deg=aoa, aod_deg=aod, amp=amp))
    return Channel(los=los, nlos=tuple(nlos))


def channel_matrix(
    channel: Channel, rx_geometry: ArrayGeometry, tx_geometry: ArrayGeometry
) -> np.ndarray:
    """Dense channel matrix ``H = sum_k amp_k b(aoa_k) a(aod_k)^H``, shape (N_rx, N_tx)."""
    H = np.zeros((rx_geometry.num_elements, tx_geometry.num_elements), dtype=complex)
    for p in channel.paths:
        b = steering_vector(rx_geometry, p.aoa_deg)
        a = steering_vector(tx_geometry, p.aod_deg)
        H += p.amp * np.outer(b, a.conj())
    return H


def effective_gain(
    channel: Channel,
    w_t: np.ndarray,
    w_r: np.ndarray,
    tx_geometry: ArrayGeometry,
    rx_geometry: ArrayGeometry,
) -> complex:
    """End-to-end complex gain ``conj(w_r)^T H w_t`` through the sparse channel.

    Computed path-wise as ``sum_k amp_k (conj(w_r)^T b(aoa_k)) (conj(a(aod_k))^T w_t)``,
    which equals the dense triple product.
    """
    w_t = np.asarray(w_t, dtype=complex)
    w_r = np.asarray(w_r, dtype=complex)
    if w_t.shape != (tx_geometry.num_elements,):
        raise ValueError(
            f"w_t has length {w_t.shape}, expected ({tx_geometry.num_elements},)"
        )
    if w_r.shape != (rx_geometry.num_elements,):
        raise ValueError(
            f"w_r has length {w_r.shape}, expected ({rx_geometry.num_elements},)"
        )
    total = 0.0 + 0.0j
    for p in channel.paths:
        rx_fac = np.vdot(w_r, steering_vector(rx_geometry, p.aoa_deg))
        tx_fac = np.vdot(steering_vector(tx_geometry, p.aod_deg), w_t)
        total += p.amp * rx_fac * tx_fac
    return complex(total)


def beam_gains(
    channel: Channel,
    codebook: SidelobeCodebook,
    w_fixed: np.ndarray,
    fixed_geometry: ArrayGeometry,
    codebook_on_tx: bool = False,
) -> np.ndarray:
    """Per-beam complex gains for every codebook configuration, shape (M,).

    By default the codebook drives the receive side and ``w_fixed`` is the
    transmit beam. With ``codebook_on_tx`` the roles flip: the codebook
    weights transmit (their response toward a departure angle is the
    conjugate of the receive-side array factor) and ``w_fixed`` receives.
    """
    w_fixed = np.asarray(w_fixed, dtype=complex)
    if w_fixed.shape != (fixed_geometry.num_elements,):
        raise ValueError(
            f"fixed weight length {w_fixed.shape} does not match its geometry "
            f"({fixed_geometry.num_elements})"
        )
    amps = np.array([p.amp for p in channel.paths])
    if codebook_on_tx:
        cb_angles = [p.aod_deg for p in channel.paths]
        fixed_angles = [p.aoa_deg for p in channel.paths]
        cb_resp = pattern_matrix(codebook, cb_angles).conj()
        fixed_fac = np.array(
            [np.vdot(w_fixed, steering_vector(fixed_geometry, a)) for a in fixed_angles]
        )
    else:
        cb_angles = [p.aoa_deg for p in channel.paths]
        fixed_angles = [p.aod_deg for p in channel.paths]
        cb_resp = pattern_matrix(codebook, cb_angles)
        fixed_fac = np.array(
            [np.vdot(steering_vector(fixed_geometry, a), w_fixed) for a in fixed_angles]
        )
    return cb_resp @ (amps * fixed_fac)


@dataclass(frozen=True)
class FrameCapture:
    """Received samples y[n, m] for N symbols under each of M beam configurations.

    ``symbols_used`` holds the per-sample symbols the sensing stage divides
    by: the true transmitted symbols right after synthesis, or detector
    decisions once detection has run.
    """

    samples: np.ndarray
    codebook: SidelobeCodebook
    symbols_used: np.ndarray
    codebook_on_tx: bool = False

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        symbols = np.asarray(self.symbols_used, dtype=complex)
        if samples.ndim != 2:
            raise ValueError(f"samples must be 2-D (N, M), got shape {samples.shape}")
        if symbols.shape != samples.shape:
            raise ValueError(
                f"symbols_used shape {symbols.shape} does not match samples {samples.shape}"
            )
        if samples.shape[1] != self.codebook.num_beams:
            raise ValueError(
                f"samples have {samples.shape[1]} beams, codebook has {self.codebook.num_beams}"
            )
        if np.any(symbols == 0):
            raise ValueError("symbols_used contains zeros")
        samples.flags.writeable = False
        symbols.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "symbols_used", symbols)

    @property
    def num_symbols(self) -> int:
        return self.samples.shape[0]

    @property
    def num_beams(self) -> int:
        return self.samples.shape[1]

    def with_symbols(self, symbols: np.ndarray) -> "FrameCapture":
        return FrameCapture(self.samples, self.codebook, symbols, self.codebook_on_tx)


def transmit_frame(
    channel: Channel,
    w_t: np.ndarray,
    codebook: SidelobeCodebook,
    symbols: np.ndarray,
    noise_sigma: float,
    seed: int,
    tx_geometry: ArrayGeometry,
) -> FrameCapture:
    """Synthesize a capture: ``y[n, m] = gain_m * s[n, m] + z[n, m]``.

    The noise is circularly-symmetric complex Gaussian with per-sample
    variance ``noise_sigma**2``, drawn deterministically from ``seed``.
    """
    symbols = np.asarray(symbols, dtype=complex)
    if symbols.ndim != 2 or symbols.shape[1] != codebook.num_beams:
        raise ValueError(
            f"symbols must be (N, {codebook.num_beams}), got shape {symbols.shape}"
        )
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    gains = beam_gains(channel, codebook, w_t, tx_geometry)
    y = gains[None, :] * symbols
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        z = rng.standard_normal(symbols.shape) + 1j * rng.standard_normal(symbols.shape)
        y = y + (noise_sigma / np.sqrt(2.0)) * z
    return FrameCapture(samples=y, codebook=codebook, symbols_used=symbols)


def scene_to_dict(scene: Scene) -> dict:
    return {
        "tx_pos": list(scene.tx_pos),
        "rx_pos": list(scene.rx_pos),
        "boresights_deg": [scene.tx_boresight_deg, scene.rx_boresight_deg],
        "reflectors": [
            {
                "pos": list(r.position),
                "gamma_mag": abs(r.gamma),
                "gamma_phase_rad": math.atan2(r.gamma.imag, r.gamma.real),
            }
            for r in scene.reflectors
        ],
        "wavelength_m": scene.carrier_wavelength_m,
    }


def scene_from_dict(doc: dict) -> Scene:
    bores = doc.get("boresights_deg", [0.0, 180.0])
    return Scene(
        tx_pos=tuple(doc["tx_pos"]),
        rx_pos=tuple(doc["rx_pos"]),
        tx_boresight_deg=bores[0],
        rx_boresight_deg=bores[1],
        reflectors=tuple(
            Reflector(
                position=tuple(r["pos"]),
                gamma=r["gamma_mag"]
                * complex(math.cos(r["gamma_phase_rad"]), math.sin(r["gamma_phase_rad"])),
            )
            for r in doc.get("reflectors", [])
        ),
        carrier_wavelength_m=doc.get("wavelength_m", 0.005),
    )


def channel_to_dict(channel: Channel) -> dict:
    return {
        "paths": [
            {
                "aoa_deg": p.aoa_deg,
                "aod_deg": p.aod_deg,
                "amp_re": p.amp.real,
                "amp_im": p.amp.imag,
            }
            for p in channel.paths
        ]
    }


def channel_from_dict(doc: dict) -> Channel:
    paths = [
        PathComponent(p["aoa_deg"], p["aod_deg"], complex(p["amp_re"], p["amp_im"]))
        for p in doc["paths"]
    ]
    if not paths:
        raise ValueError("channel document has no paths; the first path is the LOS")
    return Channel(los=paths[0], nlos=tuple(paths[1:]))


def save_json(obj: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
