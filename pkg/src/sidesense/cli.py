"""Command-line entry point.

Subcommands:

* ``pattern`` -- dump |R| over an angle grid for every beam of a codebook
* ``jcs``     -- one joint detection-and-sensing run, artifacts to disk
* ``sweep``   -- any of the parameter sweeps (beams, symbols, off, array-size,
  side, tx-beamwidth, snr)
* ``rates``   -- beam-switching and sensing rates from the symbol rate
* ``margin``  -- worst-case mainlobe-to-sidelobe margin for a subset size

Configs are JSON files validated against the experiment schema; ``--set
key=value`` overrides individual entries. Exit code 0 on success, 2 for
configuration problems, 1 for runtime failures. The output directory
defaults to ``runs`` and can be overridden with ``--out`` or the
``PANOPTIC_OUT`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .arrays import (
    ArrayGeometry,
    codebook_from_dict,
    mainlobe_sidelobe_margin_db,
    pattern_matrix,
    sample_codebook,
)
from .experiments import (
    ExperimentConfig,
    rate_calculator,
    sweep_array_size,
    sweep_beams,
    sweep_off_antennas,
    sweep_side,
    sweep_snr,
    sweep_symbols,
    sweep_tx_beamwidth,
    trend_non_increasing,
    default_output_dir,
    _derived_seed,
    _trial_setup,
)
from .sensing import fingerprint_to_csv, run_jcs, spectrum_to_csv

__all__ = ["main", "load_config"]


class ConfigError(Exception):
    pass


def load_config(path: str, overrides: list[str] | None = None) -> ExperimentConfig:
    """Load and validate an experiment config; unknown keys are rejected by name."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    aliases = {"M_list": "m_list", "N_list": "n_list", "L": "num_off_complement"}
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key = aliases.get(key, key)
        try:
            doc[key] = json.loads(raw)
        except json.JSONDecodeError:
            doc[key] = raw
    for old, new in aliases.items():
        if old in doc:
            doc[new] = doc.pop(old)
    if "num_off_complement" in doc:
        # subset size L given instead of the off-count
        n_cb = doc.get("n_tx", 16) if doc.get("side") == "tx_codebook" else doc.get("n_rx", 16)
        doc["num_off"] = n_cb - int(doc.pop("num_off_complement"))
    try:
        return ExperimentConfig.from_dict(doc)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


def _parse_grid(spec: str) -> np.ndarray:
    try:
        lo, step, hi = (float(x) for x in spec.split(":"))
    except ValueError:
        raise ConfigError(f"grid must be lo:step:hi, got {spec!r}") from None
    if step <= 0 or hi <= lo:
        raise ConfigError(f"grid {spec!r} is not increasing")
    return np.arange(lo, hi + 1e-9, step)


def _load_codebook_doc(path: str):
    if not os.path.exists(path):
        raise ConfigError(f"codebook file not found: {path}")
    with open(path) as fh:
        doc = json.load(fh)
    if "subsets" in doc:
        return codebook_from_dict(doc)
    # sampling description instead of explicit subsets
    needed = {"geometry", "mainlobe_deg", "subset_size", "num_beams", "seed"}
    missing = needed - set(doc)
    if missing:
        raise ConfigError(f"codebook document missing key(s): {', '.join(sorted(missing))}")
    geom = doc["geometry"]
    geometry = ArrayGeometry(
        num_elements=geom["n"],
        spacing_wl=geom.get("spacing_wl", 0.5),
        phase_error_rad=tuple(geom.get("phase_error_rad", ())),
    )
    return sample_codebook(
        geometry, doc["mainlobe_deg"], doc["subset_size"], doc["num_beams"], doc["seed"]
    )


def _cmd_pattern(args) -> int:
    codebook = _load_codebook_doc(args.config)
    grid = _parse_grid(args.grid)
    resp = np.abs(pattern_matrix(codebook, grid))
    out = args.output or "pattern.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["angle_deg"] + [f"beam_{m}" for m in range(codebook.num_beams)])
        for i, angle in enumerate(grid):
            writer.writerow([f"{angle:.6g}"] + [f"{v:.10g}" for v in resp[:, i]])
    print(out)
    return 0


def _cmd_jcs(args) -> int:
    from .experiments import ARTIFACT_VERSION

    config = load_config(args.config, args.set)
    config = replace(config, seed=args.seed)
    out_root = args.out or default_output_dir()
    run_dir = os.path.join(out_root, f"jcs-{config.config_hash()}")
    os.makedirs(run_dir, exist_ok=True)
    manifest = {
        "artifact_version": ARTIFACT_VERSION,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "status": "incomplete",
        "outputs": ["summary.json", "spectrum.csv", "fingerprint.csv"],
    }
    manifest_path = os.path.join(run_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=1)

    setup, true_angles = _trial_setup(config, _derived_seed(config.seed, "trial", 0))
    result = run_jcs(setup)
    spectrum_to_csv(result.spectrum, os.path.join(run_dir, "spectrum.csv"))
    fingerprint_to_csv(result.fingerprint, os.path.join(run_dir, "fingerprint.csv"))
    summary = {
        "config": config.to_dict(),
        "ber": result.ber,
        "true_angles_deg": list(true_angles),
        "est_angles_deg": list(result.aoa_estimates),
        "mainlobe_amp": abs(result.mainlobe_amp),
        "complete": result.estimate.complete,
    }
    with open(os.path.join(run_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1)
    manifest["status"] = "complete"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=1)
    print(run_dir)
    return 0


def _write_sweep_summary(out_root: str, kind: str, doc) -> str:
    path = os.path.join(out_root, f"sweep_{kind.replace('-', '_')}.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
    return path


def _cmd_sweep(args) -> int:
    config = load_config(args.config, args.set)
    config = replace(config, seed=args.seed, threads=args.threads)
    out_root = args.out or default_output_dir()
    os.makedirs(out_root, exist_ok=True)
    kind = args.kind
    dirs: list[str] = []
    if kind in ("beams", "symbols", "off", "snr"):
        sweep_fn = {
            "beams": sweep_beams,
            "symbols": sweep_symbols,
            "off": sweep_off_antennas,
            "snr": sweep_snr,
        }[kind]
        param = {
            "beams": "num_beams",
            "symbols": "symbols_per_beam",
            "off": "num_off",
            "snr": "target_snr_db",
        }[kind]
        results = sweep_fn(config, out_root=out_root)
        dirs = [r.run_dir for r in results]
        summary = {
            "kind": kind,
            "points": [
                {
                    "value": getattr(r.config, param),
                    "mean_error_deg": r.mean_error,
                    "std_error_deg": r.aggregates()["std_error_deg"],
                    "mean_ber": r.aggregates()["mean_ber"],
                    "dir": os.path.basename(r.run_dir),
                }
                for r in results
            ],
            "trend_non_increasing": trend_non_increasing(results),
        }
        dirs.append(_write_sweep_summary(out_root, kind, summary))
    elif kind == "array-size":
        table = sweep_array_size(config, out_root=out_root)
        for row in table:
            dirs.extend(res.run_dir for res in row["results"])
        doc = [
            {
                "size": row["size"],
                "minimal_off": row["minimal_off"],
                "errors_by_off": row["errors_by_off"],
            }
            for row in table
        ]
        dirs.append(_write_sweep_summary(out_root, kind, doc))
    elif kind == "side":
        pair = sweep_side(config, out_root=out_root)
        dirs = [pair[k].run_dir for k in ("rx_codebook", "tx_codebook")]
        doc = {k: pair[k].mean_error for k in pair}
        dirs.append(_write_sweep_summary(out_root, kind, doc))
    elif kind == "tx-beamwidth":
        rows = sweep_tx_beamwidth(config, out_root=out_root)
        dirs = [r["result"].run_dir for r in rows]
        doc = [{k: r[k] for k in ("n_tx", "received_power", "sensing_error")} for r in rows]
        dirs.append(_write_sweep_summary(out_root, kind, doc))
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown sweep kind {kind!r}")
    for d in dirs:
        print(d)
    return 0


def _cmd_rates(args) -> int:
    rates = rate_calculator(args.fs, args.n, args.m)
    print(json.dumps(rates))
    return 0


def _cmd_margin(args) -> int:
    geometry = ArrayGeometry(args.n, args.spacing)
    margin = mainlobe_sidelobe_margin_db(
        geometry,
        subset_size=args.n - args.off,
        mainlobe_deg=args.mainlobe,
        region=args.region,
        grid_step_deg=args.grid_step,
        enumeration_cap=args.cap,
        seed=args.seed if args.seed is not None else 0,
    )
    print(json.dumps({"margin_db": margin}))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sidesense", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pattern", help="per-beam |R| over an angle grid, as CSV")
    p.add_argument("--config", required=True, help="codebook JSON document")
    p.add_argument("--grid", default="-50:0.25:50", help="lo:step:hi in degrees")
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_pattern, needs_seed=False)

    p = sub.add_parser("jcs", help="single joint detection + sensing run")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_jcs)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument(
        "kind",
        choices=["beams", "symbols", "off", "array-size", "side", "tx-beamwidth", "snr"],
    )
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("rates", help="beam-switching and sensing rates")
    p.add_argument("--fs", type=float, required=True, help="symbol rate in Hz")
    p.add_argument("--n", type=int, required=True, help="symbols per beam")
    p.add_argument("--m", type=int, required=True, help="beam configurations per sensing cycle")
    p.set_defaults(func=_cmd_rates)

    p = sub.add_parser("margin", help="worst-case mainlobe-to-sidelobe margin (dB)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--off", type=int, required=True)
    p.add_argument("--spacing", type=float, default=0.5)
    p.add_argument("--mainlobe", type=float, default=0.0)
    p.add_argument("--region", choices=["nominal_nulls", "beyond_first_null"],
                   default="nominal_nulls")
    p.add_argument("--grid-step", type=float, default=0.1)
    p.add_argument("--cap", type=int, default=20000)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_margin)

    return parser


def _merge_dash_values(argv: list[str]) -> list[str]:
    """Join ``--grid -50:0.25:50`` into ``--grid=-50:0.25:50`` so argparse does
    not mistake the negative-leading value for an option."""
    out = []
    skip = False
    for i, tok in enumerate(argv):
        if skip:
            skip = False
            continue
        if tok == "--grid" and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"--grid={argv[i + 1]}")
            skip = True
        else:
            out.append(tok)
    return out


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    if argv is None:
        argv = sys.argv[1:]
    argv = _merge_dash_values(list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
