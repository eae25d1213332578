"""Seeded Monte-Carlo studies: random reflector scenes, parameter sweeps, persistence.

Each experiment draws random single- or multi-reflector scenes, runs the
joint detection-and-sensing pipeline per trial, and aggregates angle errors
and bit error rates. Sweeps derive one sub-seed per point by hashing the
master seed with the swept value, so points are independent yet every run
is bit-reproducible from (config, seed).

Results persist as one JSON summary plus one CSV of per-trial records in a
directory named by the config hash; a manifest records run status and is
written before any results so an interrupted run leaves a visible
"incomplete" marker.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .arrays import ArrayGeometry, sample_codebook
from .channel import Channel, PathComponent, Reflector, Scene, scene_to_channel
from .sensing import JcsSetup, match_angles, run_jcs
from .waveform import get_scheme

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "ExperimentResult",
    "run_experiment",
    "sweep_beams",
    "sweep_symbols",
    "sweep_off_antennas",
    "sweep_array_size",
    "sweep_side",
    "sweep_tx_beamwidth",
    "sweep_snr",
    "rate_calculator",
    "save_result",
    "begin_run",
    "finish_run",
    "trend_non_increasing",
    "load_result",
    "default_output_dir",
]

ARTIFACT_VERSION = "0.1.0"


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of one Monte-Carlo experiment. Defaults live here and only here."""

    seed: int
    trials: int = 100
    # arrays
    n_tx: int = 16
    n_rx: int = 16
    spacing_wl: float = 0.5
    num_off: int = 4
    num_beams: int = 189
    side: str = "rx_codebook"  # or "tx_codebook"
    # waveform
    scheme: str = "qam4"
    symbols_per_beam: int = 100
    preamble_len: int = 16
    # noise: target_snr_db applies the mainlobe SNR model; noise_sigma overrides it
    target_snr_db: float | None = 30.0
    noise_sigma: float | None = None
    # scene
    d_los_m: float = 2.0
    wavelength_m: float = 0.005
    reflection_mag: float = 0.5
    n_reflectors: int = 1
    reflector_angles_deg: tuple[float, ...] | None = None
    reflector_gap_deg: float = 10.0
    placement_fov_deg: float = 45.0
    placement_clearance_deg: float = 1.7
    abstract_paths: tuple[dict, ...] | None = None
    # estimator
    variant: str = "coherent"
    genie: bool = False
    grid_start_deg: float = -50.0
    grid_stop_deg: float = 50.0
    grid_step_deg: float = 0.25
    exclusion_halfwidth_deg: float | None = None
    num_paths: int | None = None
    min_separation_deg: float = 5.0
    # optional sweep parameter lists (used by the matching sweep commands)
    m_list: tuple[int, ...] | None = None
    n_list: tuple[int, ...] | None = None
    off_list: tuple[int, ...] | None = None
    sizes: tuple[int, ...] | None = None
    n_tx_list: tuple[int, ...] | None = None
    snr_list_db: tuple[float, ...] | None = None
    target_error_deg: float = 2.0
    threads: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for name in ("n_tx", "n_rx", "num_beams", "symbols_per_beam", "preamble_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.side not in ("rx_codebook", "tx_codebook"):
            raise ValueError(f"side must be rx_codebook or tx_codebook, got {self.side!r}")
        n_cb = self.n_tx if self.side == "tx_codebook" else self.n_rx
        if not 0 <= self.num_off < n_cb:
            raise ValueError(
                f"num_off={self.num_off} leaves no usable subset on a {n_cb}-element array"
            )
        if (self.noise_sigma is None) == (self.target_snr_db is None):
            raise ValueError("set exactly one of target_snr_db and noise_sigma")
        if self.noise_sigma is not None and self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        get_scheme(self.scheme)  # validates
        if self.grid_step_deg <= 0 or self.grid_stop_deg <= self.grid_start_deg:
            raise ValueError("grid must be increasing with positive step")
        for tup_name in ("reflector_angles_deg", "m_list", "n_list", "off_list", "sizes",
                         "n_tx_list", "snr_list_db", "abstract_paths"):
            val = getattr(self, tup_name)
            if val is not None:
                object.__setattr__(self, tup_name, tuple(val))

    # --- derived quantities -------------------------------------------------
    @property
    def codebook_elements(self) -> int:
        return self.n_tx if self.side == "tx_codebook" else self.n_rx

    @property
    def fixed_elements(self) -> int:
        return self.n_rx if self.side == "tx_codebook" else self.n_tx

    @property
    def subset_size(self) -> int:
        return self.codebook_elements - self.num_off

    @property
    def effective_num_paths(self) -> int:
        return self.num_paths if self.num_paths is not None else max(1, self.n_reflectors)

    def exclusion_deg(self) -> float:
        """Exclusion half-width; scales inversely with the codebook aperture.

        3.3 degrees for a 16-element half-wavelength array (half of its
        half-power beamwidth), never below 2.
        """
        if self.exclusion_halfwidth_deg is not None:
            return self.exclusion_halfwidth_deg
        return max(2.0, 3.3 * 8.0 / (self.codebook_elements * self.spacing_wl))

    def grid(self) -> np.ndarray:
        return np.arange(self.grid_start_deg, self.grid_stop_deg + 1e-9, self.grid_step_deg)

    def to_dict(self) -> dict:
        doc = asdict(self)
        for k, v in list(doc.items()):
            if isinstance(v, tuple):
                doc[k] = list(v)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = [k for k in doc if k not in known]
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        if "seed" not in doc:
            raise ValueError("missing required config key: seed")
        return cls(**doc)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    true_angles_deg: tuple[float, ...]
    est_angles_deg: tuple[float, ...]
    abs_error_deg: float  # NaN when no estimate could be matched
    ber: float
    warning: bool


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[TrialRecord]
    timing_s: float = 0.0
    run_dir: str | None = None

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.abs_error_deg for r in self.records])

    def aggregates(self) -> dict:
        errs = self.errors
        valid = errs[~np.isnan(errs)]
        bers = np.array([r.ber for r in self.records])
        return {
            "mean_error_deg": float(valid.mean()) if valid.size else math.nan,
            "std_error_deg": float(valid.std()) if valid.size else math.nan,
            "p90_error_deg": float(np.percentile(valid, 90)) if valid.size else math.nan,
            "mean_ber": float(bers.mean()),
            "n_trials": len(self.records),
            "n_valid": int(valid.size),
            "n_warnings": int(sum(r.warning for r in self.records)),
        }

    @property
    def mean_error(self) -> float:
        return self.aggregates()["mean_error_deg"]

    def stderr_error(self) -> float:
        errs = self.errors
        valid = errs[~np.isnan(errs)]
        if valid.size < 2:
            return math.nan
        return float(valid.std(ddof=1) / math.sqrt(valid.size))


def _derived_seed(master: int, *parts) -> int:
    text = "|".join([str(int(master))] + [repr(p) for p in parts])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def _steer_weights(n: int, spacing_wl: float, angle_deg: float) -> np.ndarray:
    l = np.arange(n)
    return np.exp(1j * l * 2.0 * np.pi * spacing_wl * np.sin(np.deg2rad(angle_deg)))


def _reflector_position(rx_pos, tx_pos, aoa_world_deg: float, total_len: float):
    """Point on the ray from RX at the given world angle whose two-segment
    path through TX has the requested total length."""
    u = np.array([math.cos(math.radians(aoa_world_deg)), math.sin(math.radians(aoa_world_deg))])
    v = np.array(tx_pos) - np.array(rx_pos)
    d = np.linalg.norm(v)
    denom = 2.0 * (total_len + float(v @ u))
    d2 = (total_len**2 - d**2) / denom
    return tuple(np.array(rx_pos) + d2 * u)


def _draw_scene(config: ExperimentConfig, rng: np.random.Generator) -> Scene:
    """TX at the origin facing +x, RX opposite facing back; reflectors random.

    Reflector arrival angles are uniform over the placement field of view,
    kept clear of the mainlobe exclusion region (reflections that close to
    the LOS are not separable from it) and of each other; the two-segment
    path length is uniform in [1.2, 3] times the LOS distance. Departure
    angles outside the field of view are redrawn.
    """
    d = config.d_los_m
    tx, rx = (0.0, 0.0), (d, 0.0)
    fov = config.placement_fov_deg
    clear = config.exclusion_deg() + config.placement_clearance_deg
    on_tx = config.side == "tx_codebook"
    pinned = config.reflector_angles_deg
    reflectors = []
    chosen: list[float] = []  # codebook-side angles already taken
    for k in range(config.n_reflectors):
        for attempt in range(10000):
            cb_angle = (
                float(pinned[k]) if pinned is not None else float(rng.uniform(-fov, fov))
            )
            total_len = d * float(rng.uniform(1.2, 3.0))
            if on_tx:
                # pinned/drawn angle is the departure angle; TX boresight is +x
                pos = _reflector_position(tx, rx, cb_angle, total_len)
                other = math.degrees(math.atan2(pos[1] - rx[1], pos[0] - rx[0]))
                other = (other - 180.0 + 180.0) % 360.0 - 180.0  # relative to RX boresight
            else:
                # RX boresight faces -x (world 180 deg); world ray angle of the AoA:
                pos = _reflector_position(rx, tx, 180.0 + cb_angle, total_len)
                other = math.degrees(math.atan2(pos[1] - tx[1], pos[0] - tx[0]))
            if abs(other) > 89.5:
                continue
            if pinned is None:
                if abs(other) > fov:
                    continue
                # the sensed side must keep clear of the mainlobe exclusion
                if abs(cb_angle) < clear:
                    continue
                if any(abs(cb_angle - prev) < config.reflector_gap_deg for prev in chosen):
                    continue
            phase = float(rng.uniform(0.0, 2.0 * np.pi))
            gamma = config.reflection_mag * complex(math.cos(phase), math.sin(phase))
            reflectors.append(Reflector(position=pos, gamma=gamma))
            chosen.append(cb_angle)
            break
        else:
            raise RuntimeError("could not place a reflector satisfying the constraints")
    return Scene(
        tx_pos=tx,
        rx_pos=rx,
        tx_boresight_deg=0.0,
        rx_boresight_deg=180.0,
        reflectors=tuple(reflectors),
        carrier_wavelength_m=config.wavelength_m,
    )


def _abstract_channel(config: ExperimentConfig) -> Channel:
    """Channel straight from path descriptors, LOS amplitude 1."""
    nlos = []
    for p in config.abstract_paths:
        ratio = float(p.get("ratio", 0.3))
        phase = float(p.get("phase_rad", 0.0))
        nlos.append(
            PathComponent(
                aoa_deg=p["aoa_deg"],
                aod_deg=p["aod_deg"],
                amp=ratio * complex(math.cos(phase), math.sin(phase)),
            )
        )
    return Channel(los=PathComponent(0.0, 0.0, 1.0), nlos=tuple(nlos))


def _noise_sigma(config: ExperimentConfig, channel: Channel) -> float:
    if config.noise_sigma is not None:
        return config.noise_sigma
    alpha0 = abs(channel.los.amp) ** 2
    gain = (config.fixed_elements * config.subset_size) ** 2
    return math.sqrt(alpha0 * gain / 10 ** (config.target_snr_db / 10.0))


def _trial_setup(config: ExperimentConfig, trial_seed: int) -> tuple[JcsSetup, tuple[float, ...]]:
    rng = np.random.default_rng([trial_seed, 1])
    if config.abstract_paths is not None:
        channel = _abstract_channel(config)
    else:
        channel = scene_to_channel(_draw_scene(config, rng))
    on_tx = config.side == "tx_codebook"
    cb_geom = ArrayGeometry(config.codebook_elements, config.spacing_wl)
    fixed_geom = ArrayGeometry(config.fixed_elements, config.spacing_wl)
    mainlobe = channel.los.aod_deg if on_tx else channel.los.aoa_deg
    fixed_angle = channel.los.aoa_deg if on_tx else channel.los.aod_deg
    codebook = sample_codebook(
        cb_geom,
        mainlobe_deg=mainlobe,
        subset_size=config.subset_size,
        num_beams=config.num_beams,
        seed=_derived_seed(trial_seed, "codebook"),
    )
    w_fixed = _steer_weights(config.fixed_elements, config.spacing_wl, fixed_angle)
    setup = JcsSetup(
        channel=channel,
        codebook=codebook,
        fixed_weight=w_fixed,
        fixed_geometry=fixed_geom,
        scheme=get_scheme(config.scheme),
        symbols_per_beam=config.symbols_per_beam,
        noise_sigma=_noise_sigma(config, channel),
        seed=_derived_seed(trial_seed, "frame"),
        preamble_len=config.preamble_len,
        genie=config.genie,
        grid_deg=config.grid(),
        exclusion_halfwidth_deg=config.exclusion_deg(),
        variant=config.variant,
        num_paths=config.effective_num_paths,
        min_separation_deg=config.min_separation_deg,
        codebook_on_tx=on_tx,
    )
    true_angles = tuple((p.aod_deg if on_tx else p.aoa_deg) for p in channel.nlos)
    return setup, true_angles


def _run_trial(config: ExperimentConfig, trial: int) -> TrialRecord:
    trial_seed = _derived_seed(config.seed, "trial", trial)
    setup, true_angles = _trial_setup(config, trial_seed)
    result = run_jcs(setup)
    errors = match_angles(true_angles, result.aoa_estimates) if true_angles else []
    matched = [e for e in errors if not math.isnan(e)]
    abs_error = float(np.mean(matched)) if matched else math.nan
    warning = (not result.estimate.complete) or (len(matched) < len(true_angles))
    return TrialRecord(
        trial=trial,
        true_angles_deg=true_angles,
        est_angles_deg=result.aoa_estimates,
        abs_error_deg=abs_error,
        ber=result.ber,
        warning=warning,
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run all trials; deterministic for a fixed config (records keyed by trial)."""
    t0 = time.perf_counter()
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            records = list(pool.map(lambda t: _run_trial(config, t), range(config.trials)))
    else:
        records = [_run_trial(config, t) for t in range(config.trials)]
    return ExperimentResult(config=config, records=records, timing_s=time.perf_counter() - t0)


def _run_point(sub: ExperimentConfig, out_root: str | None, name: str) -> ExperimentResult:
    """Run one sweep point, persisting around the computation when requested."""
    if out_root is None:
        return run_experiment(sub)
    run_dir = begin_run(sub, out_root, name)
    result = run_experiment(sub)
    finish_run(run_dir, result)
    result.run_dir = run_dir
    return result


def _sweep(config: ExperimentConfig, param: str, values, out_root=None, prefix="", **extra):
    results = []
    for v in values:
        sub = replace(
            config,
            **{param: v},
            seed=_derived_seed(config.seed, param, v),
            **extra,
        )
        results.append(_run_point(sub, out_root, f"{prefix}{v:g}" if prefix else "run"))
    return results


def sweep_beams(config: ExperimentConfig, m_list=None, out_root=None) -> list[ExperimentResult]:
    """Angle error versus the number of tested beam configurations."""
    values = m_list if m_list is not None else config.m_list
    if not values:
        raise ValueError("no beam counts given (m_list)")
    return _sweep(config, "num_beams", [int(v) for v in values], out_root, "beams-M")


def sweep_symbols(config: ExperimentConfig, n_list=None, out_root=None) -> list[ExperimentResult]:
    """Angle error versus symbols captured per beam."""
    values = n_list if n_list is not None else config.n_list
    if not values:
        raise ValueError("no symbol counts given (n_list)")
    return _sweep(config, "symbols_per_beam", [int(v) for v in values], out_root, "symbols-N")


def sweep_off_antennas(config: ExperimentConfig, off_list=None, out_root=None) -> list[ExperimentResult]:
    """Angle error versus the number of switched-off elements."""
    values = off_list if off_list is not None else config.off_list
    if not values:
        raise ValueError("no off-counts given (off_list)")
    return _sweep(config, "num_off", [int(v) for v in values], out_root, "off-")


def sweep_array_size(
    config: ExperimentConfig, sizes=None, target_error_deg=None, out_root=None
) -> list[dict]:
    """Minimal off-count reaching the target mean error, per codebook-side size.

    The swept size applies to whichever side carries the codebook; the
    fixed end keeps its configured aperture. Off-counts are tried in
    increasing order up to half the array. Each table row carries the
    per-off-count mean errors actually measured.
    """
    values = sizes if sizes is not None else config.sizes
    if not values:
        raise ValueError("no array sizes given (sizes)")
    target = config.target_error_deg if target_error_deg is None else float(target_error_deg)
    size_field = "n_tx" if config.side == "tx_codebook" else "n_rx"
    table = []
    for size in values:
        size = int(size)
        row = {"size": size, "minimal_off": None, "errors_by_off": {}, "results": []}
        for off in range(1, size // 2 + 1):
            sub = replace(
                config,
                **{size_field: size},
                num_off=off,
                seed=_derived_seed(config.seed, "array_size", size, off),
            )
            res = _run_point(sub, out_root, f"size-{size}-off{off}")
            row["errors_by_off"][off] = res.mean_error
            row["results"].append(res)
            if res.mean_error <= target:
                row["minimal_off"] = off
                break
        table.append(row)
    return table


def sweep_side(config: ExperimentConfig, out_root=None) -> dict:
    """Matched pair of runs with the codebook on the receive vs transmit side.

    The transmit-side arm swaps the two array sizes so the codebook rides
    the same aperture in both runs and the fixed beam the same partner
    aperture (the mirrored link).
    """
    rx_cfg = replace(config, side="rx_codebook")
    tx_cfg = replace(config, side="tx_codebook", n_tx=config.n_rx, n_rx=config.n_tx)
    return {
        "rx_codebook": _run_point(rx_cfg, out_root, "rx_codebook"),
        "tx_codebook": _run_point(tx_cfg, out_root, "tx_codebook"),
    }


def sweep_tx_beamwidth(config: ExperimentConfig, n_tx_list=None, out_root=None) -> list[dict]:
    """Wider transmit beams (fewer TX elements) trade link power for illumination."""
    values = n_tx_list if n_tx_list is not None else config.n_tx_list
    if not values:
        raise ValueError("no TX sizes given (n_tx_list)")
    out = []
    for n_tx in values:
        sub = replace(
            config,
            n_tx=int(n_tx),
            seed=_derived_seed(config.seed, "n_tx", int(n_tx)),
        )
        res = _run_point(sub, out_root, f"txw-{int(n_tx)}")
        # received mainlobe power for a unit-energy symbol, averaged over trials
        powers = []
        for t in range(sub.trials):
            trial_seed = _derived_seed(sub.seed, "trial", t)
            setup, _ = _trial_setup(sub, trial_seed)
            gain = abs(setup.channel.los.amp) * sub.fixed_elements * sub.subset_size
            powers.append(gain**2)
        out.append(
            {
                "n_tx": int(n_tx),
                "received_power": float(np.mean(powers)),
                "sensing_error": res.mean_error,
                "result": res,
            }
        )
    return out


def sweep_snr(config: ExperimentConfig, snr_list_db=None, out_root=None) -> list[ExperimentResult]:
    """BER and angle error across link SNR levels."""
    values = snr_list_db if snr_list_db is not None else config.snr_list_db
    if not values:
        raise ValueError("no SNR points given (snr_list_db)")
    return _sweep(config, "target_snr_db", [float(v) for v in values], out_root, "snr-", noise_sigma=None)


def rate_calculator(symbol_rate_hz: float, symbols_per_beam: int, num_beams: int) -> dict:
    """Beam switching rate f_s/N and sensing rate f_s/(N*M)."""
    if symbol_rate_hz <= 0 or symbols_per_beam <= 0 or num_beams <= 0:
        raise ValueError("symbol rate, symbols per beam, and beam count must all be positive")
    switch = symbol_rate_hz / symbols_per_beam
    return {"beam_switch_rate_hz": switch, "sensing_rate_hz": switch / num_beams}


# --- persistence -------------------------------------------------------------


def default_output_dir() -> str:
    return os.environ.get("PANOPTIC_OUT", "runs")


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _records_csv_text(records: list[TrialRecord]) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["trial", "true_angles", "est_angles", "abs_error_deg", "ber"])
    for r in records:
        writer.writerow(
            [
                r.trial,
                "|".join(repr(a) for a in r.true_angles_deg),
                "|".join(repr(a) for a in r.est_angles_deg),
                repr(r.abs_error_deg),
                repr(r.ber),
            ]
        )
    return buf.getvalue()


def begin_run(config: ExperimentConfig, out_root: str | None = None, name: str = "run") -> str:
    """Create the run directory and write its manifest, marked incomplete.

    Called before any computation so that an interrupted run is visible on
    disk. Returns the run directory.
    """
    root = out_root if out_root is not None else default_output_dir()
    cfg_hash = config.config_hash()
    run_dir = os.path.join(root, f"{name}-{cfg_hash}")
    os.makedirs(run_dir, exist_ok=True)
    manifest = {
        "artifact_version": ARTIFACT_VERSION,
        "config_hash": cfg_hash,
        "seed": config.seed,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "status": "incomplete",
        "timing_s": None,
        "outputs": ["summary.json", "trials.csv"],
    }
    _atomic_write(os.path.join(run_dir, "manifest.json"), json.dumps(manifest, indent=1))
    return run_dir


def finish_run(run_dir: str, result: ExperimentResult) -> None:
    """Write the result files and flip the manifest to complete.

    Timing lives in the manifest only, so the result files are
    byte-identical across reruns of the same config.
    """
    _atomic_write(os.path.join(run_dir, "trials.csv"), _records_csv_text(result.records))
    summary = {
        "config": result.config.to_dict(),
        "aggregates": result.aggregates(),
    }
    _atomic_write(os.path.join(run_dir, "summary.json"), json.dumps(summary, indent=1))
    manifest_path = os.path.join(run_dir, "manifest.json")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    manifest["status"] = "complete"
    manifest["timing_s"] = result.timing_s
    _atomic_write(manifest_path, json.dumps(manifest, indent=1))
    _update_global_manifest(os.path.dirname(run_dir), run_dir, manifest)


def save_result(result: ExperimentResult, out_root: str | None = None, name: str = "run") -> str:
    """Persist one finished experiment: manifest first, then records and summary."""
    run_dir = begin_run(result.config, out_root, name)
    finish_run(run_dir, result)
    return run_dir


def trend_non_increasing(results: list[ExperimentResult]) -> bool:
    """True when consecutive mean errors never rise by more than two combined
    standard errors (the documented trend check for sweeps)."""
    for a, b in zip(results, results[1:]):
        slack = 2 * math.hypot(a.stderr_error(), b.stderr_error())
        if not (b.mean_error <= a.mean_error + slack):
            return False
    return True


def _update_global_manifest(root: str, run_dir: str, manifest: dict) -> None:
    path = os.path.join(root, "manifest.json")
    entries = []
    if os.path.exists(path):
        with open(path) as fh:
            entries = json.load(fh).get("runs", [])
    rel = os.path.relpath(run_dir, root)
    entries = [e for e in entries if e.get("dir") != rel]
    entries.append({"dir": rel, **{k: manifest[k] for k in ("config_hash", "seed", "status")}})
    _atomic_write(path, json.dumps({"runs": entries}, indent=1))


def load_result(run_dir: str) -> ExperimentResult:
    """Rehydrate a persisted experiment and verify the stored aggregates."""
    with open(os.path.join(run_dir, "summary.json")) as fh:
        summary = json.load(fh)
    config = ExperimentConfig.from_dict(summary["config"])
    records = []
    with open(os.path.join(run_dir, "trials.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            true_angles = tuple(float(x) for x in row["true_angles"].split("|") if x)
            est_angles = tuple(float(x) for x in row["est_angles"].split("|") if x)
            err = float(row["abs_error_deg"])
            records.append(
                TrialRecord(
                    trial=int(row["trial"]),
                    true_angles_deg=true_angles,
                    est_angles_deg=est_angles,
                    abs_error_deg=err,
                    ber=float(row["ber"]),
                    warning=math.isnan(err) or len(est_angles) < len(true_angles),
                )
            )
    result = ExperimentResult(config=config, records=records)
    stored = summary["aggregates"]
    recomputed = result.aggregates()
    for key, val in stored.items():
        new = recomputed[key]
        same = (val == new) or (
            isinstance(val, float) and math.isnan(val) and isinstance(new, float) and math.isnan(new)
        )
        if not same:
            raise ValueError(f"stored aggregate {key}={val!r} does not match recomputed {new!r}")
    return result
