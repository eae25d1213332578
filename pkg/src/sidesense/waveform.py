"""Gray-mapped modulation, single-tap equalization, and scaled-boundary detection.

Three constellations are provided (4PAM on the in-phase axis, 4QAM, 16QAM),
all normalized to unit average symbol energy. Detection divides by the
estimated full-array channel gain times a known scale factor that accounts
for the reduced mainlobe gain of a partial-array beam.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModulationScheme",
    "Packet",
    "get_scheme",
    "PAM4",
    "QAM4",
    "QAM16",
    "modulate",
    "demodulate",
    "estimate_equalizer",
    "bit_error_rate",
    "random_bits",
]


def _gray2(bits: np.ndarray) -> np.ndarray:
    """Map 2-bit Gray labels to the 4 amplitude levels (-3, -1, +1, +3)."""
    # 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
    b0, b1 = bits[..., 0], bits[..., 1]
    return (2 * b0 - 1) * (3 - 2 * b1)


@dataclass(frozen=True)
class ModulationScheme:
    """Constellation with Gray bit labels, unit average symbol energy."""

    kind: str
    constellation: np.ndarray  # indexed by the integer value of the bit label

    def __post_init__(self):
        pts = np.asarray(self.constellation, dtype=complex)
        pts.flags.writeable = False
        object.__setattr__(self, "constellation", pts)

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(len(self.constellation)))


def _build_pam4() -> ModulationScheme:
    labels = np.array([[(i >> 1) & 1, i & 1] for i in range(4)])
    levels = _gray2(labels).astype(float) / np.sqrt(5.0)
    return ModulationScheme("pam4", levels.astype(complex))


def _build_qam4() -> ModulationScheme:
    pts = np.empty(4, dtype=complex)
    for i in range(4):
        b0, b1 = (i >> 1) & 1, i & 1
        pts[i] = complex(1 - 2 * b0, 1 - 2 * b1) / np.sqrt(2.0)
    return ModulationScheme("qam4", pts)


def _build_qam16() -> ModulationScheme:
    labels = np.array([[(i >> 3) & 1, (i >> 2) & 1, (i >> 1) & 1, i & 1] for i in range(16)])
    re = _gray2(labels[:, :2]).astype(float)
    im = _gray2(labels[:, 2:]).astype(float)
    return ModulationScheme("qam16", (re + 1j * im) / np.sqrt(10.0))


PAM4 = _build_pam4()
QAM4 = _build_qam4()
QAM16 = _build_qam16()

_SCHEMES = {"pam4": PAM4, "qam4": QAM4, "qam16": QAM16}


def get_scheme(kind: str) -> ModulationScheme:
    try:
        return _SCHEMES[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown modulation {kind!r}; choose from {sorted(_SCHEMES)}") from None


@dataclass(frozen=True)
class Packet:
    """Known preamble symbols followed by payload bits."""

    preamble: np.ndarray
    payload_bits: np.ndarray
    scheme: ModulationScheme

    def __post_init__(self):
        pre = np.asarray(self.preamble, dtype=complex)
        bits = np.asarray(self.payload_bits, dtype=np.uint8)
        if pre.size < 1:
            raise ValueError("preamble must contain at least one symbol")
        if bits.size % self.scheme.bits_per_symbol:
            raise ValueError(
                f"payload of {bits.size} bits is not a multiple of "
                f"{self.scheme.bits_per_symbol} bits per symbol"
            )
        object.__setattr__(self, "preamble", pre)
        object.__setattr__(self, "payload_bits", bits)


def random_bits(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.integers(0, 2, size=count).astype(np.uint8)


def modulate(bits, scheme: ModulationScheme) -> np.ndarray:
    """Map a bit stream to constellation symbols (Gray labels, label value = index)."""
    bits = np.asarray(bits).astype(np.uint8).ravel()
    k = scheme.bits_per_symbol
    if bits.size % k:
        raise ValueError(f"bit count {bits.size} is not a multiple of {k}")
    if bits.size and bits.max() > 1:
        raise ValueError("bits must be 0/1")
    groups = bits.reshape(-1, k)
    idx = groups @ (1 << np.arange(k - 1, -1, -1))
    return scheme.constellation[idx]


def estimate_equalizer(rx_preamble, known_preamble) -> complex:
    """Least-squares single-tap gain: ``g = sum(conj(s) y) / sum(|s|^2)``."""
    y = np.asarray(rx_preamble, dtype=complex).ravel()
    s = np.asarray(known_preamble, dtype=complex).ravel()
    if y.shape != s.shape:
        raise ValueError(f"preamble lengths differ: {y.size} vs {s.size}")
    if y.size < 1:
        raise ValueError("empty preamble")
    energy = np.vdot(s, s).real
    if energy <= 0:
        raise ValueError("all-zero preamble cannot be equalized")
    return complex(np.vdot(s, y) / energy)


def demodulate(samples, g_hat: complex, scheme: ModulationScheme, scale: float = 1.0):
    """Minimum-distance decisions after dividing out ``g_hat * scale``.

    ``scale`` is the known mainlobe gain ratio between the beam the samples
    were captured under and the beam the equalizer was estimated under
    (subset size over element count for a partial-array beam). Ties go to
    the lexicographically smallest bit label. Returns ``(bits, decisions)``
    where the decisions are constellation points.
    """
    g_eff = complex(g_hat) * float(scale)
    if abs(g_eff) == 0:
        raise ValueError("zero effective gain; cannot demodulate")
    z = np.asarray(samples, dtype=complex) / g_eff
    shape = z.shape
    # argmin returns the first (= lexicographically smallest label) among ties
    dist = np.abs(z.ravel()[:, None] - scheme.constellation[None, :])
    idx = np.argmin(dist, axis=1)
    decisions = scheme.constellation[idx].reshape(shape)
    k = scheme.bits_per_symbol
    bits = ((idx[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8).ravel()
    return bits, decisions


def bit_error_rate(bits_a, bits_b) -> float:
    """Hamming distance over length."""
    a = np.asarray(bits_a).ravel()
    b = np.asarray(bits_b).ravel()
    if a.size != b.size:
        raise ValueError(f"bit streams differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty bit streams")
    return float(np.count_nonzero(a != b) / a.size)
