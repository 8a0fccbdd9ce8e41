"""Experiment harness: `ifm-lab <command> [--flags]`.

Each command resolves its configuration in layers (built-in defaults, then a
JSON config file, then explicit flags), runs the experiment, and writes CSV
data plus a JSON manifest into the output directory.  Re-running a command
with ``--config <manifest>`` reproduces the CSV files byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (too many
flagged estimates).
"""

import argparse
import csv
import datetime
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .schemes import (
    CascadeScheme,
    EVScheme,
    TreeScheme,
    chain_multiset,
    eta_cascade_uniform,
    eta_ev,
    eta_mismatch,
    eta_zeno,
    scheme_id,
    scheme_to_dict,
    zeno_absorption,
)
from .estimation import baseline_compare, run_mitigated
from .robustness import RobustnessConfig, robustness_histogram, summarize_std
from .optimize import optimize_reflectivities, verify_prefix_property
from .seeds import child_seed
from . import __version__

OUT_DIR_ENV = "IFM_LAB_OUT"
DEFAULT_OUT_DIR = "ifm_lab_out"

# desk-scale defaults keep every command under a few minutes; --paper-scale
# restores the publication settings for these keys only
PAPER_SCALE = {"shots": 10**6, "m_circuits": 40, "trials": 10**6}

DEFAULTS = {
    "ev-sweep": {
        "grid": "0.05:0.95:19",
        "shots": 10**5,
        "m_circuits": 8,
        "mesh_sigma": 0.0,
        "eps_band": 0.002,
        "max_flagged": 0.25,
        "seed": 1234,
    },
    "multi-object": {
        "n_max": 5,
        "mode_cap": 12,
        "r": 0.5,
        "shots": 10**5,
        "m_circuits": 8,
        "mesh_sigma": 0.0,
        "max_flagged": 0.25,
        "seed": 1234,
    },
    "noise-robustness": {
        "modes": "2,3,4,5,6",
        "fractions": "0.90,0.95,0.99",
        "sigma_r": 0.03,
        "trials": 10**5,
        "bins": 60,
        "seed": 1234,
    },
    "optimal-r": {
        "n_max": 8,
        "domain_margin": 1e-4,
        "tolerance": 1e-12,
        "prefix_tolerance": 1e-2,
    },
    "baseline": {
        "r": 0.5,
        "n_max": 5,
        "mesh_sigma": 0.005,
        "shots": 0,
        "seed": 1234,
    },
    "tree": {
        "layers": 4,
    },
    "zeno": {
        "n_min": 1,
        "n_max": 1024,
    },
}

FLAG_HELP = {
    "grid": "reflectivity grid, start:stop:count or comma list",
    "shots": "single-photon trials per circuit (0 = exact probabilities)",
    "m_circuits": "randomized-phase ensemble size M",
    "mesh_sigma": "Gaussian sigma on compiled mesh phases",
    "eps_band": "relative beamsplitter mismatch for the theory band",
    "max_flagged": "tolerated fraction of flagged estimates before exit 3",
    "seed": "master RNG seed",
    "n_max": "largest stage count / range end",
    "n_min": "range start",
    "mode_cap": "largest simulated chip size in modes",
    "r": "per-stage beamsplitter reflectivity",
    "modes": "comma list of interferometer sizes",
    "fractions": "comma list of eta-target fractions of the 0.5 ceiling",
    "sigma_r": "Gaussian sigma on each beamsplitter reflectivity",
    "trials": "Monte Carlo trials per configuration",
    "bins": "histogram bin count over [0, 0.5]",
    "domain_margin": "distance of the search box from the {0,1} endpoints",
    "tolerance": "objective-change convergence threshold",
    "prefix_tolerance": "allowed drift of stage optima across depths",
    "layers": "tree layers k",
}


class ConfigError(Exception):
    pass


class NumericalFailure(Exception):
    """Too many flagged estimates; carries the outputs written so far."""

    def __init__(self, message, outputs=()):
        super().__init__(message)
        self.outputs = list(outputs)


def _parse_float_list(text, name):
    try:
        values = [float(tok) for tok in str(text).split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad {name} {text!r}: {exc}") from None
    if not values:
        raise ConfigError(f"{name} is empty")
    return values


def _parse_grid(text):
    """Reflectivity grid: 'start:stop:count' or a comma list of points."""
    text = str(text)
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid {text!r} is not start:stop:count")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"bad grid {text!r}: {exc}") from None
        if count < 1:
            raise ConfigError(f"grid needs at least 1 point, got {count}")
        values = np.linspace(start, stop, count).tolist()
    else:
        values = _parse_float_list(text, "grid")
    for r in values:
        if not 0.0 < r < 1.0:
            raise ConfigError(f"grid point {r!r} outside (0, 1)")
    return values


def _load_config_file(path, command):
    """Config layer from a JSON file; accepts a bare config or a manifest."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} is not a JSON object")
    if "command" in data and "config" in data:
        if data["command"] != command:
            raise ConfigError(
                f"manifest {path} belongs to command {data['command']!r},"
                f" not {command!r}"
            )
        data = data["config"]
        if not isinstance(data, dict):
            raise ConfigError(f"manifest {path} has a malformed config block")
    return data


def _resolve_config(command, args):
    """Layer defaults, config file, and explicit flags; apply --paper-scale.

    Keys set in the config file or by flag count as explicit and are never
    rescaled, which keeps manifest replay idempotent.
    """
    defaults = DEFAULTS[command]
    config = dict(defaults)
    explicit = set()
    if args.config:
        file_layer = _load_config_file(args.config, command)
        unknown = set(file_layer) - set(defaults)
        if unknown:
            raise ConfigError(
                f"unknown config keys for {command}: {sorted(unknown)}"
            )
        config.update(file_layer)
        explicit.update(file_layer)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
            explicit.add(key)
    if getattr(args, "paper_scale", False):
        for key, value in PAPER_SCALE.items():
            if key in defaults and key not in explicit:
                config[key] = value
    for key in defaults:
        try:
            config[key] = type(defaults[key])(config[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {config[key]!r} ({exc})") from None
    return config


def _resolve_out_dir(flag):
    out = flag or os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out_dir, command, config, outputs, wall_clock_s):
    name = command.replace("-", "_") + "_manifest.json"
    path = out_dir / name
    payload = {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "version": __version__,
        "outputs": [str(p.name) for p in outputs],
        "wall_clock_s": wall_clock_s,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    _write_json(path, payload)
    return path


def _estimate_cells(estimate):
    """eta_hat and std_error cells; flagged estimates become missing points."""
    if estimate.flagged:
        return None, None
    return estimate.eta_hat, estimate.std_error


def _check_flagged(flagged, total, max_flagged, outputs):
    if total and flagged / total > max_flagged:
        raise NumericalFailure(
            f"{flagged}/{total} estimates flagged (limit {max_flagged:.0%})",
            outputs,
        )


# ---------------------------------------------------------------- commands


def cmd_ev_sweep(config, out_dir):
    grid = _parse_grid(config["grid"])
    rows = []
    flagged = 0
    for idx, r in enumerate(grid):
        scheme = EVScheme(r)
        est = run_mitigated(
            scheme,
            shots=config["shots"],
            m_circuits=config["m_circuits"],
            mesh_sigma=config["mesh_sigma"],
            seed=child_seed(config["seed"], idx),
        )
        flagged += est.flagged
        eta_hat, std_error = _estimate_cells(est)
        eps = config["eps_band"]
        rows.append(
            (
                scheme_id(scheme),
                r,
                eta_hat,
                std_error,
                config["shots"],
                config["m_circuits"],
                config["seed"],
                eta_ev(r),
                eta_mismatch(r, eps, -1),
                eta_mismatch(r, eps, +1),
            )
        )
    csv_path = out_dir / "ev_sweep.csv"
    _write_csv(
        csv_path,
        (
            "scheme_id",
            "r",
            "eta_hat",
            "std_error",
            "shots",
            "m_circuits",
            "seed",
            "eta_theory",
            "eta_band_minus",
            "eta_band_plus",
        ),
        rows,
    )
    svg_path = out_dir / "ev_sweep.svg"
    _plot_ev_sweep(csv_path, svg_path)
    _check_flagged(flagged, len(grid), config["max_flagged"], [csv_path, svg_path])
    return [csv_path, svg_path]


def cmd_multi_object(config, out_dir):
    n_max = config["n_max"]
    if n_max < 1:
        raise ConfigError(f"n_max must be >= 1, got {n_max}")
    if 2 * n_max + 1 > config["mode_cap"]:
        raise ConfigError(
            f"n_max={n_max} needs {2 * n_max + 1} modes,"
            f" over the {config['mode_cap']}-mode cap"
        )
    rows = []
    flagged = 0
    for n in range(1, n_max + 1):
        scheme = CascadeScheme((config["r"],) * n, (True,) * n)
        est = run_mitigated(
            scheme,
            shots=config["shots"],
            m_circuits=config["m_circuits"],
            mesh_sigma=config["mesh_sigma"],
            seed=child_seed(config["seed"], n),
        )
        flagged += est.flagged
        eta_hat, std_error = _estimate_cells(est)
        rows.append(
            (
                scheme_id(scheme),
                n,
                eta_hat,
                std_error,
                config["shots"],
                config["m_circuits"],
                config["seed"],
                eta_cascade_uniform(n, config["r"]),
                optimize_reflectivities(n).eta_opt,
            )
        )
    csv_path = out_dir / "multi_object.csv"
    _write_csv(
        csv_path,
        (
            "scheme_id",
            "n",
            "eta_hat",
            "std_error",
            "shots",
            "m_circuits",
            "seed",
            "eta_theory",
            "eta_optimal",
        ),
        rows,
    )
    svg_path = out_dir / "multi_object.svg"
    _plot_multi_object(csv_path, svg_path)
    _check_flagged(flagged, n_max, config["max_flagged"], [csv_path, svg_path])
    return [csv_path, svg_path]


def cmd_noise_robustness(config, out_dir):
    modes = [int(m) for m in _parse_float_list(config["modes"], "modes")]
    fractions = _parse_float_list(config["fractions"], "fractions")
    bins = config["bins"]
    if bins < 1:
        raise ConfigError(f"bins must be >= 1, got {bins}")
    hist_rows = []
    std_rows = []
    for m in modes:
        for frac in fractions:
            cell = RobustnessConfig(
                m=m,
                eta_target_fraction=frac,
                sigma_r=config["sigma_r"],
                trials=config["trials"],
                seed=child_seed(config["seed"], m, int(round(frac * 10000))),
            )
            samples = np.sort(robustness_histogram(cell))
            counts, edges = np.histogram(samples, bins=bins, range=(0.0, 0.5))
            for b in range(bins):
                hist_rows.append(
                    (
                        m,
                        cell.eta_target,
                        config["sigma_r"],
                        config["trials"],
                        edges[b],
                        edges[b + 1],
                        int(counts[b]),
                    )
                )
            std_rows.append((m, cell.eta_target, summarize_std(samples)))
    hist_path = out_dir / "robustness_hist.csv"
    _write_csv(
        hist_path,
        ("m", "eta_target", "sigma", "trial_count", "bin_left", "bin_right", "count"),
        hist_rows,
    )
    std_path = out_dir / "robustness_std.csv"
    _write_csv(std_path, ("m", "eta_target", "std"), std_rows)
    return [hist_path, std_path]


def cmd_optimal_r(config, out_dir):
    n_max = config["n_max"]
    if not 1 <= n_max <= 8:
        raise ConfigError(f"n_max must lie in 1..8, got {n_max}")
    report = verify_prefix_property(n_max, config["prefix_tolerance"])
    rows = []
    for result in report.results:
        for i, (r_i, flag) in enumerate(
            zip(result.r_opt, result.boundary_flags), start=1
        ):
            rows.append((result.n, i, r_i, flag, result.eta_opt))
    csv_path = out_dir / "optimal_r.csv"
    _write_csv(csv_path, ("n", "i", "R_i_opt", "boundary_flag", "eta_opt"), rows)
    report_path = out_dir / "prefix_report.json"
    _write_json(
        report_path,
        {
            "n_max": report.n_max,
            "tolerance": report.tolerance,
            "max_deviation": report.max_deviation,
            "passed": report.passed,
            "deviations": [
                {"i": i, "n": n, "n_prime": n_prime, "deviation": dev}
                for i, n, n_prime, dev in report.deviations
            ],
        },
    )
    return [csv_path, report_path]


def cmd_baseline(config, out_dir):
    n_max = config["n_max"]
    if n_max < 1:
        raise ConfigError(f"n_max must be >= 1, got {n_max}")
    schemes = [EVScheme(config["r"])]
    schemes.extend(
        CascadeScheme((config["r"],) * n, (True,) * n) for n in range(1, n_max + 1)
    )
    rows = []
    for idx, scheme in enumerate(schemes):
        pair = baseline_compare(
            scheme,
            mesh_sigma=config["mesh_sigma"],
            shots=config["shots"],
            seed=child_seed(config["seed"], idx),
        )
        rows.append(
            (
                scheme_id(scheme),
                getattr(scheme, "n_objects", 1),
                config["mesh_sigma"],
                config["shots"],
                config["seed"],
                pair.p_ifm_present,
                pair.p_abs_present,
                pair.p_ifm_absent,
                pair.p_abs_absent,
                pair.ifm_ratio(),
                pair.abs_ratio(),
            )
        )
    csv_path = out_dir / "baseline.csv"
    _write_csv(
        csv_path,
        (
            "scheme_id",
            "n_objects",
            "mesh_sigma",
            "shots",
            "seed",
            "p_ifm_present",
            "p_abs_present",
            "p_ifm_absent",
            "p_abs_absent",
            "ifm_ratio",
            "abs_ratio",
        ),
        rows,
    )
    return [csv_path]


def cmd_tree(config, out_dir):
    scheme = TreeScheme(config["layers"])
    chains = scheme.chains
    payload = {
        "scheme": scheme_to_dict(scheme),
        "modes": scheme.modes,
        "depth": scheme.depth,
        "n_objects": scheme.n_objects,
        "chains": [list(chain) for chain in chains],
        "chain_multiset": {
            str(length): count for length, count in sorted(chain_multiset(chains).items())
        },
    }
    json_path = out_dir / "tree.json"
    _write_json(json_path, payload)
    return [json_path]


def cmd_zeno(config, out_dir):
    n_min, n_max = config["n_min"], config["n_max"]
    if n_min < 1:
        raise ConfigError(f"n_min must be >= 1, got {n_min}")
    if n_max < n_min:
        raise ConfigError(f"empty range {n_min}..{n_max}")
    rows = [(n, zeno_absorption(n), eta_zeno(n)) for n in range(n_min, n_max + 1)]
    csv_path = out_dir / "zeno.csv"
    _write_csv(csv_path, ("n", "absorption", "eta"), rows)
    return [csv_path]


# ------------------------------------------------------------------ plots


def _read_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "ifm-lab"
    return plt


def _save_svg(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def _plot_ev_sweep(csv_path, svg_path):
    """Efficiency versus reflectivity, rendered from the sweep CSV."""
    plt = _pyplot()
    rows = _read_csv(csv_path)
    r = [float(row["r"]) for row in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(r, [float(row["eta_theory"]) for row in rows], "-", label="theory")
    ax.fill_between(
        r,
        [float(row["eta_band_minus"]) for row in rows],
        [float(row["eta_band_plus"]) for row in rows],
        alpha=0.3,
        label="mismatch band",
    )
    measured = [row for row in rows if row["eta_hat"]]
    ax.errorbar(
        [float(row["r"]) for row in measured],
        [float(row["eta_hat"]) for row in measured],
        yerr=[float(row["std_error"]) for row in measured],
        fmt="o",
        markersize=3,
        label="mitigated estimate",
    )
    ax.set_xlabel("reflectivity R")
    ax.set_ylabel("efficiency")
    ax.legend()
    fig.tight_layout()
    _save_svg(fig, svg_path)
    plt.close(fig)


def _plot_multi_object(csv_path, svg_path):
    """Efficiency versus object count on a log scale."""
    plt = _pyplot()
    rows = _read_csv(csv_path)
    n = [int(row["n"]) for row in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(n, [float(row["eta_theory"]) for row in rows], "s-", label="uniform R")
    ax.plot(n, [float(row["eta_optimal"]) for row in rows], "^-", label="optimal R")
    measured = [row for row in rows if row["eta_hat"]]
    ax.errorbar(
        [int(row["n"]) for row in measured],
        [float(row["eta_hat"]) for row in measured],
        yerr=[float(row["std_error"]) for row in measured],
        fmt="o",
        markersize=4,
        label="mitigated estimate",
    )
    ax.set_yscale("log")
    ax.set_xlabel("objects n")
    ax.set_ylabel("efficiency")
    ax.set_xticks(n)
    ax.legend()
    fig.tight_layout()
    _save_svg(fig, svg_path)
    plt.close(fig)


# ------------------------------------------------------------------ parser


COMMANDS = {
    "ev-sweep": cmd_ev_sweep,
    "multi-object": cmd_multi_object,
    "noise-robustness": cmd_noise_robustness,
    "optimal-r": cmd_optimal_r,
    "baseline": cmd_baseline,
    "tree": cmd_tree,
    "zeno": cmd_zeno,
}

COMMAND_HELP = {
    "ev-sweep": "efficiency sweep over beamsplitter reflectivity",
    "multi-object": "cascade efficiency versus object count",
    "noise-robustness": "efficiency histograms under reflectivity noise",
    "optimal-r": "optimal stage reflectivities and prefix report",
    "baseline": "present-versus-absent probability comparison",
    "tree": "binary-tree scheme descriptor and chain listing",
    "zeno": "multi-pass discrete-rotation efficiency curve",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ifm-lab",
        description="single-photon interaction-free-measurement experiments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command, defaults in DEFAULTS.items():
        cmd = sub.add_parser(command, help=COMMAND_HELP[command])
        cmd.add_argument("--config", help="JSON config or manifest to replay")
        cmd.add_argument("--out-dir", help=f"output directory (or ${OUT_DIR_ENV})")
        cmd.add_argument(
            "--paper-scale",
            action="store_true",
            help="restore publication-scale shots/ensemble/trials",
        )
        for key, default in defaults.items():
            kind = type(default)
            cmd.add_argument(
                "--" + key.replace("_", "-"),
                dest=key,
                type=str if kind is str else kind,
                default=None,
                help=f"{FLAG_HELP[key]} (default {default})",
            )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve_config(args.command, args)
        out_dir = _resolve_out_dir(args.out_dir)
        start = time.perf_counter()
        outputs = COMMANDS[args.command](config, out_dir)
        wall = time.perf_counter() - start
    except ConfigError as exc:
        print(f"ifm-lab: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        # outputs written before the failure keep their manifest so the run
        # stays inspectable and replayable
        wall = time.perf_counter() - start
        _write_manifest(out_dir, args.command, config, exc.outputs, wall)
        print(f"ifm-lab: numerical failure: {exc}", file=sys.stderr)
        return 3
    manifest = _write_manifest(out_dir, args.command, config, outputs, wall)
    for path in outputs + [manifest]:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
