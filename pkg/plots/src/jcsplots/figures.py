"""Figure rendering from the simulator's documented CSV/JSON contracts.

Strictly a view layer: inputs are read-only, every figure is a pure
function of its input files, and re-rendering identical inputs produces an
identical image. Five figure kinds are supported:

* ``pattern``  -- per-beam gain over angle, dB normalized to the mainlobe
  (wide CSV: ``angle_deg, beam_0, beam_1, ...``)
* ``spectrum`` -- correlation score over angle (``angle_deg,score``)
* ``sweep``    -- mean angle error with one-sigma bars per swept value
  (``sweep_<kind>.json`` with a ``points`` list)
* ``ber``      -- mean BER per swept value, log scale (same JSON contract)
* ``cdf``      -- empirical CDF of per-trial angle error (``trials.csv``)
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "ContractError", "render"]

KINDS = ("pattern", "sweep", "ber", "cdf", "spectrum")

PATTERN_FLOOR_DB = -40.0


class ContractError(ValueError):
    """An input file does not match its declared column contract."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[str, ...]
    output: str
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown figure kind {self.kind!r}, expected one of {KINDS}")
        inputs = tuple(self.inputs)
        if not inputs:
            raise ContractError("figure spec names no inputs")
        for path in inputs:
            if not os.path.exists(path):
                raise ContractError(f"input does not exist: {path}")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.xlim is not None:
            object.__setattr__(self, "xlim", (float(self.xlim[0]), float(self.xlim[1])))
        if self.ylim is not None:
            object.__setattr__(self, "ylim", (float(self.ylim[0]), float(self.ylim[1])))

    @classmethod
    def from_file(cls, path: str) -> "FigureSpec":
        with open(path) as fh:
            doc = json.load(fh)
        known = {"kind", "inputs", "output", "title", "xlabel", "ylabel", "xlim", "ylim", "labels"}
        unknown = set(doc) - known
        if unknown:
            raise ContractError(f"unknown figure spec key(s): {', '.join(sorted(unknown))}")
        doc.setdefault("labels", ())
        for key in ("xlim", "ylim"):
            if key in doc and doc[key] is not None:
                doc[key] = tuple(doc[key])
        return cls(**doc)


def _read_csv(path: str, required: list[str]) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise ContractError(f"{path}: missing column {col!r} (found {header})")
        rows = list(reader)
    if not rows:
        raise ContractError(f"{path}: no data rows")
    return header, rows


def _load_pattern(path: str):
    header, rows = _read_csv(path, ["angle_deg"])
    beam_cols = [c for c in header if c.startswith("beam_")]
    if not beam_cols:
        raise ContractError(f"{path}: no beam_* columns")
    angles = np.array([float(r["angle_deg"]) for r in rows])
    gains = np.array([[float(r[c]) for c in beam_cols] for r in rows])
    return angles, gains, beam_cols


def _load_spectrum(path: str):
    _, rows = _read_csv(path, ["angle_deg", "score"])
    angles = np.array([float(r["angle_deg"]) for r in rows])
    scores = np.array([float(r["score"]) for r in rows])
    return angles, scores


def _load_sweep_points(path: str) -> list[dict]:
    with open(path) as fh:
        doc = json.load(fh)
    points = doc.get("points") if isinstance(doc, dict) else None
    if not points:
        raise ContractError(f"{path}: no 'points' list (is this a sweep summary JSON?)")
    for p in points:
        for key in ("value", "mean_error_deg"):
            if key not in p:
                raise ContractError(f"{path}: sweep point missing key {key!r}")
    return points


def _load_trial_errors(path: str) -> np.ndarray:
    _, rows = _read_csv(path, ["trial", "abs_error_deg"])
    errors = np.array([float(r["abs_error_deg"]) for r in rows])
    errors = errors[~np.isnan(errors)]
    if errors.size == 0:
        raise ContractError(f"{path}: every trial error is NaN")
    return errors


def _series_label(spec: FigureSpec, index: int, path: str) -> str:
    if index < len(spec.labels):
        return spec.labels[index]
    return os.path.splitext(os.path.basename(path))[0]


def _new_figure():
    return plt.subplots(figsize=(6.0, 4.0), dpi=120)


def render(spec: FigureSpec) -> dict:
    """Render one figure; returns the plotted extents for verification.

    The return dict carries ``output``, image ``width_px``/``height_px``,
    and the final axis limits, so callers can check that re-rendering
    identical inputs reproduces identical geometry.
    """
    fig, ax = _new_figure()
    try:
        if spec.kind == "pattern":
            for path in spec.inputs:
                angles, gains, _ = _load_pattern(path)
                peak = gains.max()
                if peak <= 0:
                    raise ContractError(f"{path}: pattern has no positive gain")
                db = 20.0 * np.log10(np.maximum(gains / peak, 10 ** (PATTERN_FLOOR_DB / 20)))
                for b in range(db.shape[1]):
                    ax.plot(angles, db[:, b], linewidth=0.8)
            ax.set_xlabel(spec.xlabel or "angle (deg)")
            ax.set_ylabel(spec.ylabel or "gain rel. mainlobe (dB)")
            ax.set_ylim(PATTERN_FLOOR_DB, 2.0)
        elif spec.kind == "spectrum":
            for i, path in enumerate(spec.inputs):
                angles, scores, = _load_spectrum(path)
                ax.plot(angles, scores, label=_series_label(spec, i, path))
            ax.set_xlabel(spec.xlabel or "angle (deg)")
            ax.set_ylabel(spec.ylabel or "correlation score")
            if len(spec.inputs) > 1:
                ax.legend()
        elif spec.kind == "sweep":
            for i, path in enumerate(spec.inputs):
                points = _load_sweep_points(path)
                x = [p["value"] for p in points]
                y = [p["mean_error_deg"] for p in points]
                yerr = [p.get("std_error_deg", 0.0) or 0.0 for p in points]
                ax.errorbar(x, y, yerr=yerr, marker="o", capsize=3,
                            label=_series_label(spec, i, path))
            ax.set_xlabel(spec.xlabel or "swept value")
            ax.set_ylabel(spec.ylabel or "mean angle error (deg)")
            if len(spec.inputs) > 1:
                ax.legend()
        elif spec.kind == "ber":
            for i, path in enumerate(spec.inputs):
                points = _load_sweep_points(path)
                x = [p["value"] for p in points]
                y = [max(p.get("mean_ber", 0.0), 1e-12) for p in points]
                ax.semilogy(x, y, marker="s", label=_series_label(spec, i, path))
            ax.set_xlabel(spec.xlabel or "swept value")
            ax.set_ylabel(spec.ylabel or "bit error rate")
            if len(spec.inputs) > 1:
                ax.legend()
        elif spec.kind == "cdf":
            for i, path in enumerate(spec.inputs):
                errors = np.sort(_load_trial_errors(path))
                frac = np.arange(1, errors.size + 1) / errors.size
                ax.step(errors, frac, where="post", label=_series_label(spec, i, path))
            ax.set_xlabel(spec.xlabel or "angle error (deg)")
            ax.set_ylabel(spec.ylabel or "empirical CDF")
            ax.set_ylim(0.0, 1.02)
            if len(spec.inputs) > 1:
                ax.legend()
        if spec.title:
            ax.set_title(spec.title)
        if spec.xlim is not None:
            ax.set_xlim(*spec.xlim)
        if spec.ylim is not None:
            ax.set_ylim(*spec.ylim)
        ax.grid(True, alpha=0.3)
        out_dir = os.path.dirname(os.path.abspath(spec.output))
        os.makedirs(out_dir, exist_ok=True)
        fig.savefig(spec.output, metadata={"Software": "sidesense-plots"})
        width, height = fig.canvas.get_width_height()
        xlim, ylim = ax.get_xlim(), ax.get_ylim()
    finally:
        plt.close(fig)
    return {
        "output": spec.output,
        "width_px": int(width),
        "height_px": int(height),
        "xlim": [float(xlim[0]), float(xlim[1])],
        "ylim": [float(ylim[0]), float(ylim[1])],
    }
