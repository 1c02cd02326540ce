"""Command-line entry points.

Subcommands: simulate, train, interpret, experiment.  Every run writes a
manifest listing the command line, config digest, seeds, and a content digest
for each artifact, so identical seeds are checkable for byte-identical output.

Exit codes: 0 success, 2 config/usage error, 3 domain/singularity error,
4 training divergence, 5 no acceptable sparse fit.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, experiments, neural, sindy, storage
from .errors import (
    ConfigError,
    DivergenceError,
    DomainError,
    FormatError,
    HamlearnError,
    NoFitError,
)
from .training import TrainConfig, train, train_chunked

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_DIVERGENCE = 4
EXIT_NOFIT = 5


def _exit_code(e: HamlearnError) -> int:
    if isinstance(e, (ConfigError, FormatError)):
        return EXIT_CONFIG
    if isinstance(e, DomainError):
        return EXIT_DOMAIN
    if isinstance(e, DivergenceError):
        return EXIT_DIVERGENCE
    if isinstance(e, NoFitError):
        return EXIT_NOFIT
    return EXIT_CONFIG


def _load_config(path) -> dict:
    if path is None:
        raise ConfigError("this command needs --config")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _apply_cli_overrides(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.scale is not None:
        cfg["scale"] = args.scale
    return cfg


def _write_manifest(outdir: Path, args, config_obj, seed, artifacts, wall, extras=None):
    manifest = {
        "command": sys.argv,
        "config_digest": storage.sha256_bytes(
            json.dumps(config_obj, sort_keys=True).encode()
        ),
        "root_seed": seed,
        "artifacts": {name: storage.sha256_file(path) for name, path in artifacts.items()},
        "versions": {
            "hamlearn": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "wall_time_s": wall,
    }
    if extras:
        manifest["extras"] = extras
    path = outdir / "manifest.json"
    storage.write_json(path, manifest)
    return path


def _build_corpus(spec):
    """Materialize the experiment's training corpus as a list of trajectories."""
    name = spec.name
    if name == experiments.SHO_NAME:
        _, corpus = experiments.sho_corpus(spec)
        return corpus, {}
    if name == experiments.DOUBLE_WELL_NAME:
        _, corpus, resamples = experiments.double_well_corpus(spec)
        return corpus, {"ic_resamples": resamples}
    if name == experiments.CENTRAL_FORCE_NAME:
        _, traj, radial, resamples = experiments.central_force_corpus(spec)
        return [radial.as_trajectory()], {"ic_resamples": resamples, "ell": radial.ell}
    _, train_set, test_set, resamples = experiments.coulomb_corpus(spec)
    return list(train_set) + list(test_set), {"ic_resamples": resamples}


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    cfg = _apply_cli_overrides(_load_config(args.config), args)
    spec = experiments.spec_from_config(cfg)
    corpus, extras = _build_corpus(spec)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    artifacts = {}
    for i, traj in enumerate(corpus):
        name = f"traj_{i:04d}.csv"
        storage.write_trajectory(outdir / name, traj)
        artifacts[name] = outdir / name
    _write_manifest(outdir, args, cfg, spec.seed, artifacts, time.perf_counter() - t0, extras)
    print(f"wrote {len(corpus)} trajectories to {outdir}", file=sys.stderr)
    return EXIT_OK


def _read_corpus_dir(path) -> list:
    p = Path(path)
    if not p.is_dir():
        raise ConfigError(f"corpus directory {path} does not exist")
    files = sorted(p.glob("traj_*.csv"))
    if not files:
        raise ConfigError(f"no traj_*.csv files in {path}")
    return [storage.read_trajectory(f) for f in files]


def cmd_train(args) -> int:
    t0 = time.perf_counter()
    cfg = _apply_cli_overrides(_load_config(args.config), args)
    spec = experiments.spec_from_config(cfg)
    corpus = _read_corpus_dir(args.corpus)
    net = neural.init_network(
        spec.network.layer_dims,
        spec.network.activations,
        spec.network.input_transform,
        spec.network.output_transform,
        seed=experiments.seeding.sub_seed(spec.seed, experiments.seeding.NETWORK_INIT),
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    artifacts = {}
    reports = []
    for i, stage in enumerate(spec.stages):
        if stage.activations is not None or stage.output_transform is not None:
            from .training import swap_activations

            net = swap_activations(
                net,
                stage.activations if stage.activations is not None else net.activations,
                stage.output_transform
                if stage.output_transform is not None
                else net.output_transform,
            )
        tc = TrainConfig(
            learning_rate=stage.learning_rate,
            steps=stage.steps,
            seed=spec.seed,
            chunk_size=stage.chunk_size,
            log_every=spec.log_every,
            loss_threshold=stage.loss_threshold,
            max_stages=stage.max_stages,
        )
        runner = train_chunked if stage.chunk_size is not None else train
        net, report = runner(net, corpus, tc)
        reports.append(report)
        name = f"loss_history_stage{i + 1}.csv"
        storage.write_loss_history(outdir / name, report)
        artifacts[name] = outdir / name
    model_path = Path(args.model) if args.model else outdir / "model.json"
    storage.write_model(model_path, net)
    artifacts[model_path.name] = model_path
    _write_manifest(
        outdir, args, cfg, spec.seed, artifacts, time.perf_counter() - t0,
        {"final_loss": reports[-1].final_loss},
    )
    print(f"final loss {reports[-1].final_loss!r}", file=sys.stderr)
    return EXIT_OK


def _interpret_points(cfg: dict, net) -> tuple[np.ndarray, np.ndarray]:
    """Resolve (design_points, raw_points) for an interpret run."""
    pts_cfg = cfg.get("points")
    if not isinstance(pts_cfg, dict):
        raise ConfigError("interpret config needs a 'points' object (grid or csv)")
    if "grid" in pts_cfg:
        g = pts_cfg["grid"]
        try:
            raw = np.linspace(float(g["min"]), float(g["max"]), int(g["n"]))[:, None]
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad grid spec: {e}") from e
        if net.raw_input_dim != 1:
            raise ConfigError("grid points only apply to models with 1-d raw input")
        return raw, raw
    if "csv" in pts_cfg:
        path = Path(pts_cfg["csv"])
        if not path.exists():
            raise ConfigError(f"points file {path} does not exist")
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
        if raw.shape[1] != net.raw_input_dim:
            raise ConfigError(
                f"points file has {raw.shape[1]} columns, model expects {net.raw_input_dim}"
            )
        if net.input_transform in (neural.PAIR_DIFFERENCE, neural.PAIR_DISTANCE):
            delta = raw[:, :3] - raw[:, 3:]
            design = np.sqrt(np.sum(delta * delta, axis=1))[:, None]
        else:
            design = raw
        return design, raw
    raise ConfigError("points object must contain 'grid' or 'csv'")


def cmd_interpret(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args.config)
    net = storage.read_model(args.model)
    sd_cfg = cfg.get("sindy")
    if not isinstance(sd_cfg, dict):
        raise ConfigError("interpret config needs a 'sindy' object")
    from dataclasses import asdict

    base = asdict(experiments.SindySpec("polynomial", 3))
    unknown = set(sd_cfg) - set(base)
    if unknown:
        raise ConfigError(f"unknown sindy config keys: {sorted(unknown)}")
    base.update(sd_cfg)
    sd = experiments.SindySpec(**base)
    if sd.degree < 1:
        raise ConfigError("library needs at least one non-constant candidate")
    lib = sd.build_library()
    design_pts, raw_pts = _interpret_points(cfg, net)
    X = sindy.build_design(lib, design_pts)
    y = neural.forward_batch(net, raw_pts)
    fit = sindy.tune_lambda(X, y, start=sd.lambda_start, factor=sd.lambda_factor, tol=sd.tol)
    expression = sindy.render_expression(fit, lib, sd.digits)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    doc = {
        "model": str(args.model),
        "library": lib.labels,
        "lambda_path": fit.lambda_path,
        "lambda": fit.lam,
        "coefficients": sindy.coefficient_map(fit, lib),
        "residual_norm": fit.residual_norm,
        "normalized_residual": fit.normalized_residual,
        "n_samples": fit.n_samples,
        "expression": expression,
    }
    storage.write_json(outdir / "fit_report.json", doc)
    lines = [
        f"model: {args.model}",
        f"library: {', '.join(lib.labels)}",
        "lambda path: " + " ".join(repr(x) for x in fit.lambda_path),
        f"selected lambda: {fit.lam!r}",
        f"normalized residual: {fit.normalized_residual!r}",
        "coefficients:",
    ]
    for label, value in doc["coefficients"].items():
        lines.append(f"  {label}: {value!r}")
    lines.append(f"expression: {expression}")
    (outdir / "fit_report.txt").write_text("\n".join(lines) + "\n")
    artifacts = {
        "fit_report.json": outdir / "fit_report.json",
        "fit_report.txt": outdir / "fit_report.txt",
    }
    _write_manifest(outdir, args, cfg, cfg.get("seed", 0), artifacts, time.perf_counter() - t0)
    print(expression)
    return EXIT_OK


def cmd_experiment(args) -> int:
    t0 = time.perf_counter()
    if args.config:
        cfg = _load_config(args.config)
        cfg.setdefault("experiment", args.name)
        if cfg["experiment"] != args.name:
            raise ConfigError(
                f"config is for experiment {cfg['experiment']!r}, not {args.name!r}"
            )
        if args.variant is not None:
            cfg["variant"] = args.variant
    else:
        cfg = {"experiment": args.name}
        if args.variant is not None:
            cfg["variant"] = args.variant
    cfg = _apply_cli_overrides(cfg, args)
    spec = experiments.spec_from_config(cfg)

    result = experiments.run_experiment(spec)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    artifacts = {}

    storage.write_model(outdir / "model.json", result.network)
    artifacts["model.json"] = outdir / "model.json"
    for i, report in enumerate(result.reports):
        name = f"loss_history_stage{i + 1}.csv"
        storage.write_loss_history(outdir / name, report)
        artifacts[name] = outdir / name
    storage.write_json(outdir / "fit_report.json", experiments.fit_report_dict(result))
    (outdir / "fit_report.txt").write_text(experiments.fit_report_text(result))
    artifacts["fit_report.json"] = outdir / "fit_report.json"
    artifacts["fit_report.txt"] = outdir / "fit_report.txt"

    rows = experiments.comparison_rows(result)
    storage.write_csv(
        outdir / "comparison.csv",
        ["label", "truth", "fitted", "rel_error", "status"],
        [
            [r[0] for r in rows],
            np.array([r[1] for r in rows]),
            np.array([r[2] for r in rows]),
            np.array([r[3] for r in rows]),
            [r[4] for r in rows],
        ],
    )
    artifacts["comparison.csv"] = outdir / "comparison.csv"

    for name, path in experiments.emit_plot_data(result, outdir).items():
        artifacts[Path(path).name] = Path(path)

    extras = {k: v for k, v in result.extras.items()}
    extras["final_loss"] = result.final_loss
    extras["expression"] = result.expression
    extras["stage_wall_times"] = [r.wall_time for r in result.reports]
    _write_manifest(outdir, args, cfg, spec.seed, artifacts, time.perf_counter() - t0, extras)
    print(result.expression)
    for label, err in result.comparison.errors.items():
        print(f"{label}: relative error {err:.4g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hamlearn",
        description="Learn neural potentials from Hamiltonian trajectories and "
        "extract sparse closed-form expressions.",
    )
    parser.add_argument("--seed", type=int, default=None, help="root seed (overrides config)")
    parser.add_argument("--scale", choices=["paper", "desk"], default=None)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--config", default=None, help="JSON config path")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", help="generate a trajectory corpus as CSV files")

    p_train = sub.add_parser("train", help="train a model on a corpus directory")
    p_train.add_argument("--corpus", required=True, help="directory of traj_*.csv files")
    p_train.add_argument("--model", default=None, help="output model path")

    p_int = sub.add_parser("interpret", help="fit a sparse expression to a saved model")
    p_int.add_argument("--model", required=True, help="model file path")

    p_exp = sub.add_parser("experiment", help="run a built-in benchmark end to end")
    p_exp.add_argument("name", help=f"one of: {', '.join(experiments.EXPERIMENT_NAMES)}")
    p_exp.add_argument("--variant", default=None, help="double-well training set (t1|t2|t3)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "train": cmd_train,
        "interpret": cmd_interpret,
        "experiment": cmd_experiment,
    }
    try:
        return handlers[args.command](args)
    except HamlearnError as e:
        print(f"error: {e}", file=sys.stderr)
        return _exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
