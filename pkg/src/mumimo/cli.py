"""Command-line entry point: experiment dispatch and result persistence.

Subcommands
-----------
run <config>        run an experiment described by a YAML config
list-algorithms     print registered precoders/detectors with their options
version             print the package version

``run`` writes, atomically (temp file + rename), into the output directory:
results.csv, metadata.json, optional results.json, one plotdata/<alg>.dat
xy series per algorithm, and a rendered figures/<experiment>.png.  Flag
overrides (seed, SNR grid, packets, workers, output dir) take precedence
over the config document.  Exit codes: 0 success, 1 configuration error,
2 numerical failure.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .config import CONFIG_KEYS, ConfigError, parse_config_text, spec_to_config
from .detectors import DETECTOR_REGISTRY
from .metrics import ResultTable
from .numerics import NumericsError
from .precoders import PRECODER_REGISTRY
from .simkernel import (
    DOWNLINK_BASELINE,
    UPLINK_BASELINE,
    VERSION,
    run_experiment,
)

ERROR_PREFIX = "mumimo-error"
OUTPUT_DIR_ENV = "MUMIMO_OUT"
CSV_SCHEMA_VERSION = 1


def _fail(category, message):
    print(f"{ERROR_PREFIX}: {category}: {message}", file=sys.stderr)


def _atomic_write_text(path, text):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _resolve_output_dir(flag_value, config_value):
    if flag_value:
        return Path(flag_value)
    if config_value:
        return Path(config_value)
    return Path(os.environ.get(OUTPUT_DIR_ENV, "results"))


def _write_outputs(out_dir, spec, options, result):
    table = result.table
    _atomic_write_text(out_dir / "results.csv", "\n".join(table.to_csv_lines()) + "\n")
    if "json" in options["formats"]:
        rows = [
            {
                "algorithm": r.algorithm,
                "snr_db": r.snr_db,
                "metric": r.metric,
                "value": r.value,
                "trials": r.trials,
                "stderr": r.stderr,
            }
            for r in table.rows
        ]
        _atomic_write_text(out_dir / "results.json", json.dumps(rows, indent=2) + "\n")

    metadata = dict(result.metadata)
    metadata["csv_schema"] = {
        "version": CSV_SCHEMA_VERSION,
        "header": ResultTable.CSV_HEADER,
    }
    metadata["config"] = spec_to_config(spec, options)
    metadata["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    _atomic_write_text(out_dir / "metadata.json", json.dumps(metadata, indent=2) + "\n")

    if options["plotdata"]:
        plot_dir = out_dir / "plotdata"
        plot_dir.mkdir(parents=True, exist_ok=True)
        from .plotting import series_by_algorithm

        for name, (xs, ys) in series_by_algorithm(table).items():
            lines = [f"{x!r} {y!r}" for x, y in zip(xs, ys)]
            _atomic_write_text(plot_dir / f"{name}.dat", "\n".join(lines) + "\n")

    if options["figures"]:
        from .plotting import render_figure

        fig_dir = out_dir / "figures"
        fig_dir.mkdir(parents=True, exist_ok=True)
        render_figure(table, spec.experiment.value, fig_dir / f"{spec.experiment.value}.png")


def cmd_run(args):
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        _fail("config", f"cannot read config {args.config!r}: {exc}")
        return 1
    try:
        spec, options = parse_config_text(text)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.snr is not None:
            overrides["snr_db"] = [float(s) for s in args.snr.split(",")]
        if args.packets is not None:
            overrides["n_packets"] = args.packets
        if overrides:
            doc = spec_to_config(spec, options)
            doc.update(overrides)
            from .config import parse_config

            spec, options = parse_config(doc)
        if args.workers is not None:
            options["workers"] = args.workers
        if args.no_plotdata:
            options["plotdata"] = False
        if args.no_figures:
            options["figures"] = False
    except ConfigError as exc:
        _fail("config", str(exc))
        return 1
    except ValueError as exc:
        _fail("config", str(exc))
        return 1

    out_dir = _resolve_output_dir(args.out, options["output_dir"])
    options = dict(options)
    options["output_dir"] = str(out_dir)

    try:
        print(
            f"running {spec.experiment.value}: N_A={spec.scenario.n_a} "
            f"K={spec.scenario.k_users} N_U={spec.scenario.n_u} "
            f"packets={spec.scenario.n_packets} snr={list(spec.scenario.snr_grid_db)} "
            f"workers={options['workers']}"
        )
        result = run_experiment(spec, workers=options["workers"])
    except NumericsError as exc:
        _fail("numerical", str(exc))
        return 2
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_outputs(out_dir, spec, options, result)
    print(f"wrote {out_dir / 'results.csv'} ({len(result.table)} rows)")
    return 0


def cmd_list_algorithms(_args):
    print("precoders (downlink_sumrate):")
    for name, info in PRECODER_REGISTRY.items():
        opts = "; ".join(f"{k}: {v}" for k, v in info["options"].items()) or "no options"
        print(f"  {name:8s} {opts}")
    print(f"  {DOWNLINK_BASELINE:8s} K=1 transmit matched filter baseline (appended by default)")
    print("detectors (uplink_ber):")
    for name, info in DETECTOR_REGISTRY.items():
        opts = "; ".join(f"{k}: {v}" for k, v in info["options"].items()) or "no options"
        print(f"  {name:8s} {opts}")
    print(f"  {UPLINK_BASELINE:8s} K=1 receive matched filter baseline (appended by default)")
    return 0


def cmd_version(_args):
    print(VERSION)
    return 0


def build_parser():
    epilog_keys = "\n".join(
        f"  {key:30s} {desc}" for key, (_, desc) in CONFIG_KEYS.items()
    )
    parser = argparse.ArgumentParser(
        prog="mumimo",
        description="Multiuser massive MIMO link-level simulator",
        epilog=(
            "config keys (YAML mapping):\n"
            f"{epilog_keys}\n\n"
            f"The default output directory is $" + OUTPUT_DIR_ENV + " or ./results; "
            "flag overrides take precedence over the config document."
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a YAML config")
    run_p.add_argument("config", help="path to the YAML config document")
    run_p.add_argument("--seed", type=int, help="override the RNG seed")
    run_p.add_argument("--snr", help="override the SNR grid, comma separated dB values")
    run_p.add_argument("--packets", type=int, help="override the number of packets")
    run_p.add_argument("--workers", type=int, help="parallel packet workers")
    run_p.add_argument("--out", help="output directory")
    run_p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    run_p.add_argument("--no-plotdata", action="store_true", help="skip plotdata emission")
    run_p.set_defaults(func=cmd_run)

    list_p = sub.add_parser("list-algorithms", help="print the algorithm registries")
    list_p.set_defaults(func=cmd_list_algorithms)

    ver_p = sub.add_parser("version", help="print the package version")
    ver_p.set_defaults(func=cmd_version)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericsError as exc:
        _fail("numerical", str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
