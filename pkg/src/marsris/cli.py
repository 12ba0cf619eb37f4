"""Command-line front end.

Subcommands: generate-terrain, simulate, sweep, compare, recommend, reference.
Every run writes its artifacts plus a manifest recording the input digest,
seed and versions, so results can be reproduced byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .config import format_config, parse_config
from .errors import SimulationError
from .localization import SweepContext, beam_sweep, estimate_angle
from .ris import Active, Amplifying, Passive, RisKind, SemiPassive, Star, StarMode, generate_codebook
from .scenario import (
    CodebookStrategy,
    OracleCsi,
    build_reference_crater_scenario,
    compare_ris_kinds,
    recommend_ris,
    run_heatmap,
    write_comparison_csv,
    write_heatmap_csv,
    write_heatmap_pgm,
    POWER_CLASS_BY_KIND,
)
from .terrain import Position3, dump_ascii_grid

_KIND_ALIASES: Dict[str, RisKind] = {
    "passive": Passive(),
    "semi_passive": SemiPassive(),
    "active": Active(),
    "amplifying": Amplifying(),
    "star": Star(StarMode.REFLECT),
    "star_transmit": Star(StarMode.TRANSMIT),
    "star_dual": Star(StarMode.DUAL_SIDED),
}

_MARK = {True: "✓", False: "✗"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marsris",
        description="Terrain-aware RIS coverage simulator for Martian surface links",
    )
    parser.add_argument("--version", action="version", version=f"marsris {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("config", help="scenario configuration file")
        p.add_argument("-o", "--output-dir",
                       default=os.environ.get("MARSRIS_OUTPUT_DIR", "."),
                       help="directory for artifacts (env MARSRIS_OUTPUT_DIR)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--workers", type=int, default=1, help="parallel cell workers")
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p = sub.add_parser("generate-terrain", help="synthesise terrain and write an ASCII grid")
    add_common(p)

    p = sub.add_parser("simulate", help="run an SNR heatmap")
    add_common(p)
    p.add_argument("--pgm", action="store_true", help="also write an ASCII graymap")
    p.add_argument("--pgm-window", nargs=2, type=float, default=(-20.0, 40.0),
                   metavar=("MIN_DB", "MAX_DB"), help="SNR clamp window for the graymap")
    p.add_argument("--coherent", action="store_true",
                   help="coherently combine mechanisms instead of best-path")

    p = sub.add_parser("sweep", help="beam-sweep localization for the configured receiver")
    add_common(p)

    p = sub.add_parser("compare", help="compare RIS kinds on one scenario")
    add_common(p)
    p.add_argument("--kinds", default="amplifying,star",
                   help="comma-separated kinds: " + ",".join(sorted(_KIND_ALIASES)))

    p = sub.add_parser("recommend", help="print kind suitability for a landform")
    p.add_argument("--landform", required=True,
                   help="canyon | crater | mountain (hill) | plateau")

    p = sub.add_parser("reference", help="write the reference crater scenario as a config file")
    p.add_argument("-o", "--output-dir",
                   default=os.environ.get("MARSRIS_OUTPUT_DIR", "."))
    return parser


def _parse_overrides(pairs: List[str]) -> Dict[str, str]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise SimulationError(f"override '{pair}' is not KEY=VALUE")
        key, _, value = pair.partition("=")
        out[key.strip()] = value.strip()
    return out


def _load(args) -> tuple:
    with open(args.config, "r", encoding="utf-8") as fh:
        text = fh.read()
    overrides = _parse_overrides(args.overrides)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    spec = parse_config(text, overrides)
    return spec, text, overrides


def _digest(command: str, config_text: str, overrides: Dict[str, str]) -> str:
    h = hashlib.sha256()
    h.update(command.encode())
    h.update(b"\0")
    h.update(config_text.encode())
    for key in sorted(overrides):
        h.update(f"\0{key}={overrides[key]}".encode())
    return h.hexdigest()


def _write_manifest(out_dir: str, command: str, config_text: str,
                    overrides: Dict[str, str], seed: int, workers: int,
                    outputs: List[str]) -> None:
    manifest = {
        "command": command,
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "digest": _digest(command, config_text, overrides),
        "overrides": {k: overrides[k] for k in sorted(overrides)},
        "seed": seed,
        "workers": workers,
        "outputs": sorted(outputs),
        "marsris_version": __version__,
        "numpy_version": np.__version__,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_generate_terrain(args) -> int:
    spec, text, overrides = _load(args)
    os.makedirs(args.output_dir, exist_ok=True)
    out = os.path.join(args.output_dir, "terrain.asc")
    with open(out, "w", encoding="utf-8") as fh:
        dump_ascii_grid(spec.scenario.terrain, fh)
    outputs = ["terrain.asc"]
    if not args.no_figures:
        from .plotting import save_terrain_png
        save_terrain_png(spec.scenario.terrain, os.path.join(args.output_dir, "terrain.png"),
                         title=f"{spec.scenario.name}: terrain")
        outputs.append("terrain.png")
    _write_manifest(args.output_dir, "generate-terrain", text, overrides,
                    spec.scenario.seed, args.workers, outputs)
    print(f"wrote {out}")
    return 0


def _cmd_simulate(args) -> int:
    spec, text, overrides = _load(args)
    result = run_heatmap(spec.scenario, spec.grid, spec.strategy,
                         coherent=args.coherent, workers=args.workers)
    os.makedirs(args.output_dir, exist_ok=True)
    outputs = ["heatmap.csv"]
    with open(os.path.join(args.output_dir, "heatmap.csv"), "w", encoding="utf-8") as fh:
        write_heatmap_csv(result, fh)
    if args.pgm:
        with open(os.path.join(args.output_dir, "heatmap.pgm"), "w", encoding="utf-8") as fh:
            write_heatmap_pgm(result, fh, tuple(args.pgm_window))
        outputs.append("heatmap.pgm")
    if not args.no_figures:
        from .plotting import save_heatmap_png
        save_heatmap_png(result, os.path.join(args.output_dir, "heatmap.png"),
                         title=f"{spec.scenario.name}: SNR")
        outputs.append("heatmap.png")
    _write_manifest(args.output_dir, "simulate", text, overrides,
                    spec.scenario.seed, args.workers, outputs)
    covered = result.covered()
    frac = float(covered.mean()) if covered.size else 0.0
    if covered.any():
        print(f"coverage {frac:.1%}, SNR [{np.nanmin(result.snr_db):.1f}, "
              f"{np.nanmax(result.snr_db):.1f}] dB")
    else:
        print("coverage 0%")
    return 0


def _cmd_sweep(args) -> int:
    spec, text, overrides = _load(args)
    scenario = spec.scenario
    if not scenario.panels:
        raise SimulationError("sweep requires at least one panel in the scenario")
    if not isinstance(spec.strategy, CodebookStrategy):
        raise SimulationError("sweep requires strategy.kind = codebook in the config")
    strategy = spec.strategy
    panel = scenario.panels[0]
    tx = scenario.tx_position()
    rx_ground = scenario.terrain.sample_elevation(spec.sweep_rx.x_m, spec.sweep_rx.y_m)
    rx = Position3(spec.sweep_rx.x_m, spec.sweep_rx.y_m, rx_ground + spec.sweep_rx.height_m)
    codebook = generate_codebook(panel, tx, strategy.azimuth_grid_rad,
                                 strategy.elevation_grid_rad, strategy.beam_range_m,
                                 scenario.link.frequency_hz)
    ctx = SweepContext(scenario.terrain, panel, tx, rx, scenario.link)
    meas = beam_sweep(ctx, codebook, strategy.noise_stddev_db, scenario.seed)
    est = estimate_angle(meas, codebook)

    os.makedirs(args.output_dir, exist_ok=True)
    from .localization import export_sweep_csv
    with open(os.path.join(args.output_dir, "sweep.csv"), "w", encoding="utf-8") as fh:
        export_sweep_csv(meas, codebook, fh)
    outputs = ["sweep.csv"]
    if not args.no_figures:
        from .plotting import save_sweep_png
        save_sweep_png(meas, codebook, os.path.join(args.output_dir, "sweep.png"),
                       title=f"{scenario.name}: sweep")
        outputs.append("sweep.png")
    _write_manifest(args.output_dir, "sweep", text, overrides,
                    scenario.seed, args.workers, outputs)
    print(f"winning codeword {est.winning_index}: azimuth {math.degrees(est.azimuth_rad):.2f} deg, "
          f"elevation {math.degrees(est.elevation_rad):.2f} deg, "
          f"half-width {math.degrees(est.half_width_rad):.2f} deg")
    return 0


def _cmd_compare(args) -> int:
    spec, text, overrides = _load(args)
    kinds = []
    for token in args.kinds.split(","):
        token = token.strip().lower()
        if token not in _KIND_ALIASES:
            raise SimulationError(
                f"unknown kind '{token}'; expected one of {sorted(_KIND_ALIASES)}")
        kinds.append(_KIND_ALIASES[token])
    report = compare_ris_kinds(spec.scenario, spec.grid, kinds, spec.strategy,
                               workers=args.workers)
    os.makedirs(args.output_dir, exist_ok=True)
    with open(os.path.join(args.output_dir, "comparison.csv"), "w", encoding="utf-8") as fh:
        write_comparison_csv(report, fh)
    outputs = ["comparison.csv"]
    if not args.no_figures:
        from .plotting import save_comparison_png
        save_comparison_png(report, os.path.join(args.output_dir, "comparison.png"),
                            title=f"{spec.scenario.name}: kinds")
        outputs.append("comparison.png")
    _write_manifest(args.output_dir, "compare", text, overrides,
                    spec.scenario.seed, args.workers, outputs)
    for i, a in enumerate(report.labels):
        for j, b in enumerate(report.labels):
            if i < j:
                print(f"mean SNR delta {a} - {b}: {report.mean_delta_db[i, j]:+.2f} dB")
    return 0


def _cmd_recommend(args) -> int:
    table = recommend_ris(args.landform)
    landform = args.landform.strip().lower()
    pretty = {"passive": "Passive", "star": "STAR", "amplifying": "Amplifying",
              "active": "Active"}
    row = "  ".join(f"{pretty[k]} {_MARK[v]}" for k, v in table.items())
    print(f"{landform}: {row}")
    classes = "  ".join(f"{pretty[k]}={POWER_CLASS_BY_KIND[k]}" for k in table)
    print(f"power consumption: {classes}")
    return 0


def _cmd_reference(args) -> int:
    scenario, grid = build_reference_crater_scenario()
    text = format_config(scenario, grid, OracleCsi())
    os.makedirs(args.output_dir, exist_ok=True)
    path = os.path.join(args.output_dir, "reference.cfg")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    _write_manifest(args.output_dir, "reference", text, {}, scenario.seed, 1,
                    ["reference.cfg"])
    print(f"wrote {path}")
    return 0


_COMMANDS = {
    "generate-terrain": _cmd_generate_terrain,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
    "recommend": _cmd_recommend,
    "reference": _cmd_reference,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SimulationError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
