"""Uniform linear array geometry, steering vectors, and random-subset beams.

A beam here is a masked steering vector: a subset of elements applies the
progressive phases that point the mainlobe at a fixed angle while the rest
are switched off. Keeping the phase profile and changing only the ON/OFF
mask leaves the mainlobe in place and scrambles the sidelobes, which is the
whole trick this package is built around.

Angle convention: degrees from array broadside, in [-90, +90]. Element l
(0-based) at broadside-relative angle theta sees the phase
``2*pi * spacing_wl * l * sin(theta)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

__all__ = [
    "ArrayGeometry",
    "AntennaSubset",
    "SidelobeCodebook",
    "steering_vector",
    "make_weight_vector",
    "array_factor",
    "pattern_matrix",
    "sample_codebook",
    "randomness_space_size",
    "directivity_loss_db",
    "mainlobe_sidelobe_margin_db",
    "codebook_to_dict",
    "codebook_from_dict",
    "save_codebook",
    "load_codebook",
]

_DEG = np.pi / 180.0


def _check_angle(angle_deg: float) -> float:
    angle = float(angle_deg)
    if not -90.0 <= angle <= 90.0 or not math.isfinite(angle):
        raise ValueError(f"angle {angle_deg!r} outside [-90, +90] degrees")
    return angle


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: element count, spacing, per-element phase offsets.

    ``phase_error_rad`` models intrinsic per-element phase offsets of the
    hardware (transmission-line mismatch and the like). They enter the wave
    response (:func:`steering_vector`) but not the commanded beam weights,
    so a nonzero profile deliberately distorts the realized patterns.
    Default is all zeros, i.e. an ideal array.
    """

    num_elements: int
    spacing_wl: float = 0.5
    phase_error_rad: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise ValueError(f"num_elements must be a positive integer, got {self.num_elements!r}")
        object.__setattr__(self, "num_elements", int(self.num_elements))
        if not (self.spacing_wl > 0 and math.isfinite(self.spacing_wl)):
            raise ValueError(f"spacing_wl must be > 0, got {self.spacing_wl!r}")
        pe = tuple(float(x) for x in self.phase_error_rad)
        if not pe:
            pe = (0.0,) * self.num_elements
        if len(pe) != self.num_elements:
            raise ValueError(
                f"phase_error_rad has {len(pe)} entries, expected {self.num_elements}"
            )
        object.__setattr__(self, "phase_error_rad", pe)

    @property
    def phase_errors(self) -> np.ndarray:
        return np.asarray(self.phase_error_rad, dtype=float)


@dataclass(frozen=True)
class AntennaSubset:
    """Strictly increasing element indices forming one ON-set."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(idx) == 0:
            raise ValueError("subset must contain at least one element")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"subset indices must be strictly increasing, got {idx}")
        if idx[0] < 0:
            raise ValueError(f"negative element index in {idx}")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    def validate_against(self, geometry: ArrayGeometry) -> None:
        if self.indices[-1] >= geometry.num_elements:
            raise ValueError(
                f"subset index {self.indices[-1]} out of range for "
                f"{geometry.num_elements}-element array"
            )


@dataclass(frozen=True)
class SidelobeCodebook:
    """A mainlobe direction plus M random ON-subsets of fixed size L.

    All subsets share the subset size; when the subset space is at least as
    large as the number of beams the subsets must be pairwise distinct.
    """

    geometry: ArrayGeometry
    mainlobe_deg: float
    subsets: tuple[AntennaSubset, ...]
    seed: int | None = None
    sampled_with_replacement: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mainlobe_deg", _check_angle(self.mainlobe_deg))
        subs = tuple(
            s if isinstance(s, AntennaSubset) else AntennaSubset(tuple(s)) for s in self.subsets
        )
        if not subs:
            raise ValueError("codebook needs at least one subset")
        sizes = {len(s) for s in subs}
        if len(sizes) != 1:
            raise ValueError(f"all subsets must have the same size, got sizes {sorted(sizes)}")
        for s in subs:
            s.validate_against(self.geometry)
        space = randomness_space_size(self.geometry.num_elements, len(subs[0]))
        if space >= len(subs) and len({s.indices for s in subs}) != len(subs):
            raise ValueError(
                "duplicate subsets in codebook although the subset space is large enough"
            )
        object.__setattr__(self, "subsets", subs)

    @property
    def num_beams(self) -> int:
        return len(self.subsets)

    @property
    def subset_size(self) -> int:
        return len(self.subsets[0])


def steering_vector(geometry: ArrayGeometry, angle_deg: float) -> np.ndarray:
    """Array response to a plane wave from ``angle_deg`` (unit-magnitude entries).

    Entry l is ``exp(j * (l * 2*pi*spacing_wl*sin(angle) + phase_error_rad[l]))``.
    """
    angle = _check_angle(angle_deg)
    l = np.arange(geometry.num_elements)
    phase = l * (2.0 * np.pi * geometry.spacing_wl * np.sin(angle * _DEG))
    return np.exp(1j * (phase + geometry.phase_errors))


def make_weight_vector(codebook: SidelobeCodebook, m: int) -> np.ndarray:
    """Weight vector of beam ``m``: commanded steering phases on the ON-set, zero elsewhere.

    The weights carry only the progressive phases for the mainlobe angle;
    the geometry's per-element phase offsets are physical and live in
    :func:`steering_vector`, so they are deliberately not pre-compensated
    here. With the default all-zero offsets this is exactly the masked
    steering vector.
    """
    if not 0 <= m < codebook.num_beams:
        raise IndexError(f"beam index {m} out of range [0, {codebook.num_beams})")
    geom = codebook.geometry
    l = np.arange(geom.num_elements)
    phase = l * (2.0 * np.pi * geom.spacing_wl * np.sin(codebook.mainlobe_deg * _DEG))
    w = np.zeros(geom.num_elements, dtype=complex)
    idx = list(codebook.subsets[m].indices)
    w[idx] = np.exp(1j * phase[idx])
    return w


def array_factor(codebook: SidelobeCodebook, m: int, angle_deg: float) -> complex:
    """Complex response of beam ``m`` toward ``angle_deg``.

    Closed form ``sum_{l in S_m} exp(j*(l*2*pi*d*(sin(theta)-sin(theta0)) + pe_l))``,
    identical to ``conj(w_m)^T steering_vector(theta)``. At the mainlobe angle
    this equals the subset size exactly when the phase offsets are zero.
    """
    if not 0 <= m < codebook.num_beams:
        raise IndexError(f"beam index {m} out of range [0, {codebook.num_beams})")
    angle = _check_angle(angle_deg)
    geom = codebook.geometry
    idx = np.asarray(codebook.subsets[m].indices)
    du = np.sin(angle * _DEG) - np.sin(codebook.mainlobe_deg * _DEG)
    phases = idx * (2.0 * np.pi * geom.spacing_wl * du) + geom.phase_errors[idx]
    return complex(np.exp(1j * phases).sum())


def pattern_matrix(codebook: SidelobeCodebook, grid_deg: Sequence[float]) -> np.ndarray:
    """All beams' responses over an angle grid, shape (num_beams, len(grid)).

    Vectorized :func:`array_factor`; row m equals
    ``[array_factor(codebook, m, g) for g in grid_deg]``.
    """
    grid = np.asarray(grid_deg, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-D angle sequence")
    if np.any(grid < -90.0) or np.any(grid > 90.0):
        raise ValueError("grid angles must lie in [-90, +90] degrees")
    geom = codebook.geometry
    du = np.sin(grid * _DEG) - np.sin(codebook.mainlobe_deg * _DEG)
    l = np.arange(geom.num_elements)
    element_resp = np.exp(
        1j * (2.0 * np.pi * geom.spacing_wl * np.outer(l, du) + geom.phase_errors[:, None])
    )
    mask = np.zeros((codebook.num_beams, geom.num_elements))
    for i, s in enumerate(codebook.subsets):
        mask[i, list(s.indices)] = 1.0
    return mask @ element_resp


def randomness_space_size(num_elements: int, subset_size: int) -> int:
    """Number of distinct ON-subsets, the exact binomial coefficient C(N, L)."""
    n, k = int(num_elements), int(subset_size)
    if n < 0 or k < 0 or k > n:
        raise ValueError(f"need 0 <= L <= N, got N={num_elements}, L={subset_size}")
    return math.comb(n, k)


def directivity_loss_db(num_elements: int, num_off: int) -> float:
    """Mainlobe gain change (dB, <= 0) from switching ``num_off`` elements off."""
    n, off = int(num_elements), int(num_off)
    if n < 1 or off < 0 or off >= n:
        raise ValueError(f"need 0 <= num_off < N, got N={num_elements}, num_off={num_off}")
    return 20.0 * math.log10((n - off) / n)


def sample_codebook(
    geometry: ArrayGeometry,
    mainlobe_deg: float,
    subset_size: int,
    num_beams: int,
    seed: int,
) -> SidelobeCodebook:
    """Draw ``num_beams`` uniform random ON-subsets of ``subset_size`` elements.

    Sampling is without repetition (rejection against a hash set) while the
    subset space holds at least ``num_beams`` subsets; otherwise beams are
    drawn i.i.d. with repetition and the codebook is flagged accordingly.
    Bit-identical output for a fixed seed.
    """
    L = int(subset_size)
    n = geometry.num_elements
    if not 1 <= L <= n:
        raise ValueError(f"subset size {subset_size} outside [1, {n}]")
    if num_beams < 1:
        raise ValueError(f"need at least one beam, got {num_beams}")
    rng = np.random.default_rng(seed)
    space = randomness_space_size(n, L)
    with_replacement = num_beams > space
    subsets: list[tuple[int, ...]] = []
    if with_replacement:
        for _ in range(num_beams):
            subsets.append(tuple(np.sort(rng.choice(n, size=L, replace=False)).tolist()))
    else:
        seen: set[tuple[int, ...]] = set()
        while len(subsets) < num_beams:
            cand = tuple(np.sort(rng.choice(n, size=L, replace=False)).tolist())
            if cand not in seen:
                seen.add(cand)
                subsets.append(cand)
    return SidelobeCodebook(
        geometry=geometry,
        mainlobe_deg=mainlobe_deg,
        subsets=tuple(AntennaSubset(s) for s in subsets),
        seed=seed,
        sampled_with_replacement=with_replacement,
    )


def _nominal_null_angles(geometry: ArrayGeometry, mainlobe_deg: float) -> np.ndarray:
    """Null directions of the full-array pattern, in degrees.

    These are the angles where ``sin(theta) = sin(theta0) + k/(N*d)`` for
    nonzero integers k. The full pattern vanishes there, so any residual
    response is entirely due to the switched-off elements.
    """
    n, d = geometry.num_elements, geometry.spacing_wl
    u0 = math.sin(mainlobe_deg * math.pi / 180.0)
    step = 1.0 / (n * d)
    us = []
    k = 1
    while True:
        hit = False
        for u in (u0 + k * step, u0 - k * step):
            if -1.0 <= u <= 1.0:
                us.append(u)
                hit = True
        if not hit:
            break
        k += 1
    if not us:
        raise ValueError(
            "empty sidelobe region: the full-array pattern has no nulls in the visible range"
        )
    return np.rad2deg(np.arcsin(np.sort(np.asarray(us))))


def mainlobe_sidelobe_margin_db(
    geometry: ArrayGeometry,
    subset_size: int,
    mainlobe_deg: float = 0.0,
    region: str = "nominal_nulls",
    grid_step_deg: float = 0.1,
    enumeration_cap: int = 20000,
    seed: int = 0,
) -> float:
    """Worst-case mainlobe-to-sidelobe gain margin over the subset ensemble, in dB.

    For each ON-subset the margin is ``20*log10(L)`` minus the peak ``|R|``
    (in dB) over the sidelobe region; the minimum over all subsets is
    returned. All C(N, L) subsets are enumerated when the space is within
    ``enumeration_cap``, else that many are sampled (seeded).

    ``region`` selects the sidelobe region:

    * ``"nominal_nulls"`` (default): the null directions of the full-array
      pattern. There the nominal beam is silent and the response is purely
      the perturbation from the OFF elements, so the margin measures how
      far sidelobe perturbations can rise relative to the mainlobe; the
      worst case is ``20*log10(L / num_off)``.
    * ``"beyond_first_null"``: every grid angle outside the full-array
      null-to-null main beam, i.e. ``|sin(theta) - sin(theta0)| >= 1/(N*d)``,
      scanned at ``grid_step_deg``. This charges near-mainlobe shoulder
      lobes to the margin and gives markedly smaller values.
    """
    n = geometry.num_elements
    L = int(subset_size)
    if not 1 <= L < n:
        raise ValueError(f"need 1 <= L < N for a sidelobe margin, got L={subset_size}, N={n}")
    mainlobe = _check_angle(mainlobe_deg)

    if region == "nominal_nulls":
        angles = _nominal_null_angles(geometry, mainlobe)
    elif region == "beyond_first_null":
        grid = np.arange(-90.0, 90.0 + 1e-9, grid_step_deg)
        u = np.sin(grid * _DEG)
        u0 = math.sin(mainlobe * _DEG)
        keep = np.abs(u - u0) >= 1.0 / (n * geometry.spacing_wl) - 1e-12
        if not keep.any():
            raise ValueError("empty sidelobe region for this geometry")
        angles = grid[keep]
    else:
        raise ValueError(f"unknown sidelobe region {region!r}")

    space = randomness_space_size(n, L)
    if space <= enumeration_cap:
        all_subsets = [AntennaSubset(c) for c in combinations(range(n), L)]
    else:
        cb = sample_codebook(geometry, mainlobe, L, enumeration_cap, seed)
        all_subsets = list(cb.subsets)

    probe = SidelobeCodebook(geometry=geometry, mainlobe_deg=mainlobe, subsets=tuple(all_subsets))
    resp = np.abs(pattern_matrix(probe, angles))
    worst_sidelobe = resp.max(axis=1)
    # a subset whose removed elements cancel everywhere would have -inf sidelobe level
    worst_sidelobe = np.maximum(worst_sidelobe, 1e-300)
    margins = 20.0 * np.log10(L) - 20.0 * np.log10(worst_sidelobe)
    return float(margins.min())


def codebook_to_dict(codebook: SidelobeCodebook) -> dict:
    """JSON-ready codebook document."""
    return {
        "geometry": {
            "n": codebook.geometry.num_elements,
            "spacing_wl": codebook.geometry.spacing_wl,
            "phase_error_rad": list(codebook.geometry.phase_error_rad),
        },
        "mainlobe_deg": codebook.mainlobe_deg,
        "subsets": [list(s.indices) for s in codebook.subsets],
        "seed": codebook.seed,
        "sampled_with_replacement": codebook.sampled_with_replacement,
    }


def codebook_from_dict(doc: dict) -> SidelobeCodebook:
    geom = doc["geometry"]
    geometry = ArrayGeometry(
        num_elements=geom["n"],
        spacing_wl=geom.get("spacing_wl", 0.5),
        phase_error_rad=tuple(geom.get("phase_error_rad", ())),
    )
    return SidelobeCodebook(
        geometry=geometry,
        mainlobe_deg=doc["mainlobe_deg"],
        subsets=tuple(AntennaSubset(tuple(s)) for s in doc["subsets"]),
        seed=doc.get("seed"),
        sampled_with_replacement=bool(doc.get("sampled_with_replacement", False)),
    )


def save_codebook(codebook: SidelobeCodebook, path) -> None:
    with open(path, "w") as fh:
        json.dump(codebook_to_dict(codebook), fh, indent=1)


def load_codebook(path) -> SidelobeCodebook:
    with open(path) as fh:
        return codebook_from_dict(json.load(fh))
