"""Batch front-end: phantom -> simulate -> reconstruct -> metrics.

One JSON config file describes an experiment; each subcommand consumes the
sections it needs and refuses configs with unknown keys, so a typo in a
hyperparameter name fails loudly instead of running with defaults.  Stages
are chained through manifests: every command verifies the hashes of the
files it consumes and refuses stale inputs.

Exit codes: 0 success, 2 config error, 3 missing/stale input, 4 numerical
abort inside the solver.
"""

from __future__ import annotations

import argparse
import json
import numbers
import os
import sys
import time

from . import io as tio
from .grid import Grid2
from .metrics import metrics_rows, write_metrics_csv
from .radon import GatedGeometry
from .sim import NoiseSpec, PhantomSpec, add_noise, make_phantom, simulate_data, staggered_gated_geometry
from .solver import (
    RunConfig,
    SolverAbort,
    alternate,
    static_tv_reconstruct,
    write_trace_csv,
)

__all__ = ["main", "load_config", "ConfigError"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_NUMERIC = 4

_NUM = "number"
_INT = "integer"
_STR = "string"
_BOOL = "boolean"

# section -> key -> expected type tag (None allowed where noted)
_SCHEMA = {
    "name": _STR,
    "out_dir": _STR,
    "grid": {
        "nx": _INT,
        "ny": _INT,
        "x_min": _NUM,
        "x_max": _NUM,
        "y_min": _NUM,
        "y_max": _NUM,
    },
    "phantom": {
        "kind": _STR,
        "n_gates": _INT,
        "motion": _NUM,
        "n_objects": _INT,
        "seed": _INT,
    },
    "geometry": {
        "views_per_gate": _INT,
        "n_bins": _INT,
        "s_min": _NUM,
        "s_max": _NUM,
        "stagger": _BOOL,
    },
    "noise": {
        "target_snr_db": _NUM,
        "seed": _INT,
    },
    "solver": {
        "mu1": _NUM,
        "mu2": _NUM,
        "sigma": _NUM,
        "alpha": _NUM,
        "beta": _NUM,
        "M": _INT,
        "K": _INT,
        "K_template": _INT,
        "K_velocity": _INT,
        "warm_start": _INT,
        "eps_template": _NUM,
        "eps_velocity": _NUM,
        "init_template": _STR,
        "init_template_path": _STR,
        "tv_epsilon": _NUM,
        "seed": _INT,
    },
    "metrics": {
        "peak": _NUM,
    },
}


class ConfigError(ValueError):
    pass


def _check_type(path: str, value, tag: str):
    if value is None and path == "solver.init_template_path":
        return
    if tag == _INT:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif tag == _NUM:
        ok = isinstance(value, numbers.Real) and not isinstance(value, bool)
    elif tag == _BOOL:
        ok = isinstance(value, bool)
    else:
        ok = isinstance(value, str)
    if not ok:
        raise ConfigError(f"config key {path!r} must be a {tag}, got {value!r}")


def load_config(path: str) -> dict:
    """Parse and validate an experiment config; unknown keys are errors."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    for key, value in cfg.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key: {key!r}")
        spec = _SCHEMA[key]
        if isinstance(spec, str):
            _check_type(key, value, spec)
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"config section {key!r} must be a JSON object")
        for sub, sub_value in value.items():
            if sub not in spec:
                raise ConfigError(f"unknown config key: {key}.{sub!r}")
            _check_type(f"{key}.{sub}", sub_value, spec[sub])
    return cfg


def _require(cfg: dict, *sections: str):
    for s in sections:
        if s not in cfg:
            raise ConfigError(f"config section {s!r} is required for this command")


def _out_dir(cfg: dict, args) -> str:
    out = args.out or cfg.get("out_dir")
    if not out:
        raise ConfigError("no output directory: set 'out_dir' in the config or pass --out")
    os.makedirs(out, exist_ok=True)
    return out


def _grid_from(cfg: dict) -> Grid2:
    g = cfg["grid"]
    try:
        return Grid2(
            nx=g["nx"],
            ny=g["ny"],
            x_min=float(g["x_min"]),
            x_max=float(g["x_max"]),
            y_min=float(g["y_min"]),
            y_max=float(g["y_max"]),
        )
    except KeyError as exc:
        raise ConfigError(f"grid section is missing key {exc}") from exc


def _phantom_spec(cfg: dict, grid: Grid2) -> PhantomSpec:
    p = cfg["phantom"]
    try:
        return PhantomSpec(
            kind=p["kind"],
            grid=grid,
            n_gates=p["n_gates"],
            motion=float(p.get("motion", 4.0)),
            n_objects=int(p.get("n_objects", 3)),
            seed=int(p.get("seed", 0)),
        )
    except KeyError as exc:
        raise ConfigError(f"phantom section is missing key {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _run_config(cfg: dict) -> RunConfig:
    s = cfg["solver"]
    n_gates = cfg["phantom"]["n_gates"]
    try:
        return RunConfig(
            mu1=float(s["mu1"]),
            mu2=float(s["mu2"]),
            sigma=float(s["sigma"]),
            alpha=float(s["alpha"]),
            beta=float(s["beta"]),
            m_factor=s["M"],
            n_gates=n_gates,
            k_outer=s["K"],
            k_template=int(s.get("K_template", 1)),
            k_velocity=int(s.get("K_velocity", 1)),
            warm_start=int(s.get("warm_start", 50)),
            eps_template=float(s.get("eps_template", 0.0)),
            eps_velocity=float(s.get("eps_velocity", 0.0)),
            init_template=s.get("init_template", "backprojection"),
            init_template_path=s.get("init_template_path"),
            tv_epsilon=float(s.get("tv_epsilon", 1e-12)),
            seed=int(s.get("seed", 0)),
        )
    except KeyError as exc:
        raise ConfigError(f"solver section is missing key {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _gate_name(i: int) -> str:
    return f"gate_{i:02d}.raw"


def cmd_phantom(cfg: dict, args) -> int:
    _require(cfg, "grid", "phantom")
    out = _out_dir(cfg, args)
    grid = _grid_from(cfg)
    spec = _phantom_spec(cfg, grid)
    truth_dir = os.path.join(out, "truth")
    os.makedirs(truth_dir, exist_ok=True)
    gates = make_phantom(spec)
    files = []
    for i, img in enumerate(gates):
        name = _gate_name(i)
        tio.write_image(os.path.join(truth_dir, name), img)
        tio.write_png(os.path.join(truth_dir, name.replace(".raw", ".png")), img.values)
        files.extend([f"truth/{name}", f"truth/{name}.json"])
    tio.write_manifest(
        os.path.join(out, "phantom_manifest.json"),
        kind="phantom",
        config=cfg,
        files=files,
        extra={"n_gates": spec.n_gates},
    )
    print(f"phantom: wrote {len(gates)} gate images to {truth_dir}")
    return EXIT_OK


def _load_truth(out: str, n_gates: int) -> list:
    return [
        tio.read_image(os.path.join(out, "truth", _gate_name(i)))
        for i in range(n_gates + 1)
    ]


def cmd_simulate(cfg: dict, args) -> int:
    _require(cfg, "grid", "phantom", "geometry")
    out = _out_dir(cfg, args)
    tio.read_manifest(os.path.join(out, "phantom_manifest.json"))
    n_gates = cfg["phantom"]["n_gates"]
    truth = _load_truth(out, n_gates)

    geo = cfg["geometry"]
    try:
        geom = staggered_gated_geometry(
            n_gates=n_gates,
            views_per_gate=geo["views_per_gate"],
            n_bins=geo["n_bins"],
            s_min=float(geo["s_min"]),
            s_max=float(geo["s_max"]),
            stagger=bool(geo.get("stagger", True)),
        )
    except KeyError as exc:
        raise ConfigError(f"geometry section is missing key {exc}") from exc

    clean = simulate_data(truth[1:], geom)
    achieved = None
    if "noise" in cfg and cfg["noise"].get("target_snr_db") is not None:
        spec = NoiseSpec(
            target_snr_db=float(cfg["noise"]["target_snr_db"]),
            seed=int(cfg["noise"].get("seed", 0)),
        )
        noisy, achieved = add_noise(clean, spec)
    else:
        noisy = [s.copy() for s in clean]

    sino_dir = os.path.join(out, "sino")
    os.makedirs(sino_dir, exist_ok=True)
    files = []
    for idx, (c, n) in enumerate(zip(clean, noisy)):
        i = idx + 1
        for tag, s in (("clean", c), ("noisy", n)):
            name = f"{tag}_g{i:02d}.raw"
            tio.write_sinogram(os.path.join(sino_dir, name), s)
            files.extend([f"sino/{name}", f"sino/{name}.json"])
    extra = {
        "achieved_snr_db": achieved,
        "noise_seed": cfg.get("noise", {}).get("seed", 0) if "noise" in cfg else None,
    }
    tio.write_manifest(
        os.path.join(out, "simulate_manifest.json"),
        kind="simulate",
        config=cfg,
        files=files,
        extra=extra,
    )
    snr_note = "no noise" if achieved is None else f"snr {achieved:.2f} dB"
    print(f"simulate: wrote {len(clean)} gated sinograms to {sino_dir} ({snr_note})")
    return EXIT_OK


def _load_noisy(out: str, n_gates: int):
    sinos = [
        tio.read_sinogram(os.path.join(out, "sino", f"noisy_g{i:02d}.raw"))
        for i in range(1, n_gates + 1)
    ]
    geom = GatedGeometry(tuple(s.geometry for s in sinos))
    return sinos, geom


def cmd_reconstruct(cfg: dict, args) -> int:
    _require(cfg, "grid", "phantom", "solver")
    out = _out_dir(cfg, args)
    tio.read_manifest(os.path.join(out, "simulate_manifest.json"))
    grid = _grid_from(cfg)
    run_cfg = _run_config(cfg)
    sinos, geom = _load_noisy(out, run_cfg.n_gates)

    method = args.method
    t0 = time.perf_counter()
    files = []
    if method == "joint":
        template0 = None
        if run_cfg.init_template == "file":
            template0 = tio.read_image(run_cfg.init_template_path).values
        state = alternate(grid, sinos, geom, run_cfg, template0)
        rdir = os.path.join(out, "joint")
        os.makedirs(rdir, exist_ok=True)
        tio.write_image(os.path.join(rdir, "template.raw"), state.template)
        tio.write_png(os.path.join(rdir, "template.png"), state.template.values)
        files.extend(["joint/template.raw", "joint/template.raw.json"])
        for idx, img in enumerate(state.gate_reconstructions):
            name = f"recon_g{idx + 1:02d}.raw"
            tio.write_image(os.path.join(rdir, name), img)
            tio.write_png(os.path.join(rdir, name.replace(".raw", ".png")), img.values)
            files.extend([f"joint/{name}", f"joint/{name}.json"])
        # endpoint velocity slices: cheap to store, useful for motion checks
        for j, tag in ((0, "nu_first.raw"), (run_cfg.time_grid.mn, "nu_last.raw")):
            tio.write_vector_field(os.path.join(rdir, tag), state.nu[j])
            files.extend([f"joint/{tag}", f"joint/{tag}.json"])
        write_trace_csv(os.path.join(rdir, "trace.csv"), state.trace_rows)
        # the trace logs wall time, so it is referenced without a content
        # hash: repeat runs must produce hash-identical manifests
        extra = {
            "iterations": state.iteration,
            "wall_time_s": time.perf_counter() - t0,
            "trace": "joint/trace.csv",
        }
        manifest_name = "reconstruct_joint_manifest.json"
    else:
        trace = []
        recon = static_tv_reconstruct(grid, sinos, geom, run_cfg, trace_out=trace)
        rdir = os.path.join(out, "static_tv")
        os.makedirs(rdir, exist_ok=True)
        tio.write_image(os.path.join(rdir, "recon.raw"), recon)
        tio.write_png(os.path.join(rdir, "recon.png"), recon.values)
        files.extend(["static_tv/recon.raw", "static_tv/recon.raw.json"])
        write_trace_csv(os.path.join(rdir, "trace.csv"), trace)
        extra = {
            "iterations": len(trace),
            "wall_time_s": time.perf_counter() - t0,
            "trace": "static_tv/trace.csv",
        }
        manifest_name = "reconstruct_static_tv_manifest.json"

    tio.write_manifest(
        os.path.join(out, manifest_name),
        kind=f"reconstruct_{method.replace('-', '_')}",
        config=cfg,
        files=files,
        extra=extra,
    )
    print(f"reconstruct[{method}]: wrote results under {out}")
    return EXIT_OK


def _method_manifest(out: str, method: str) -> str:
    return os.path.join(out, f"reconstruct_{method}_manifest.json")


def cmd_metrics(cfg: dict, args) -> int:
    _require(cfg, "grid", "phantom")
    out = _out_dir(cfg, args)
    tio.read_manifest(os.path.join(out, "phantom_manifest.json"))
    n_gates = cfg["phantom"]["n_gates"]
    truth = _load_truth(out, n_gates)
    peak = float(cfg.get("metrics", {}).get("peak", 1.0))

    rows = []
    found = []
    for method in ("joint", "static_tv"):
        path = _method_manifest(out, method)
        if not os.path.exists(path):
            continue
        manifest = tio.read_manifest(path)
        found.append(method)
        if method == "joint":
            recons = [
                tio.read_image(os.path.join(out, "joint", f"recon_g{i:02d}.raw")).values
                for i in range(1, n_gates + 1)
            ]
        else:
            single = tio.read_image(os.path.join(out, "static_tv", "recon.raw")).values
            recons = [single] * n_gates
        rows.extend(
            metrics_rows(
                method,
                recons,
                [t.values for t in truth[1:]],
                manifest["manifest_sha256"],
                peak,
            )
        )
    if not found:
        raise FileNotFoundError(
            f"no reconstruction manifests under {out}; run 'reconstruct' first"
        )

    csv_path = os.path.join(out, "metrics.csv")
    write_metrics_csv(csv_path, rows)
    table_path = os.path.join(out, "metrics_table.txt")
    _write_metrics_table(table_path, rows, n_gates)
    tio.write_manifest(
        os.path.join(out, "metrics_manifest.json"),
        kind="metrics",
        config=cfg,
        files=["metrics.csv", "metrics_table.txt"],
        extra={"methods": found},
    )
    print(open(table_path).read(), end="")
    return EXIT_OK


def _write_metrics_table(path: str, rows: list, n_gates: int):
    """Plain-text per-gate table, one ssim and one psnr line per method."""
    by_method = {}
    for r in rows:
        by_method.setdefault(r["method"], {})[r["gate"]] = r
    with open(path, "w") as fh:
        header = "method      metric    " + "".join(
            f"g{i:<8d}" for i in range(1, n_gates + 1)
        )
        fh.write(header + "mean\n")
        for method in sorted(by_method):
            gates = by_method[method]
            for key in ("ssim", "psnr_db"):
                vals = [gates[i][key] for i in range(1, n_gates + 1)]
                cells = "".join(f"{v:<9.4f}" for v in vals)
                fh.write(
                    f"{method:<12s}{key:<10s}{cells}{sum(vals) / len(vals):.4f}\n"
                )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tomoflow",
        description="Gated tomography with joint motion estimation: batch pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("phantom", "generate the gated ground-truth images"),
        ("simulate", "project the phantom and inject calibrated noise"),
        ("reconstruct", "run a reconstruction method on simulated data"),
        ("metrics", "score reconstructions against the ground truth"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        if name == "reconstruct":
            p.add_argument(
                "--method",
                choices=("joint", "static-tv"),
                default="joint",
                help="reconstruction method",
            )
    return parser


_COMMANDS = {
    "phantom": cmd_phantom,
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "metrics": cmd_metrics,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except SolverAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        if "stale input" in str(exc):
            print(f"stale input: {exc}", file=sys.stderr)
            return EXIT_MISSING
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
