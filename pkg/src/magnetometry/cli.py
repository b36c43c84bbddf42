"""Command-line entry point: ``magnetometry <command> --config PATH [--seed N] [--out DIR]``.

Every command stages its artifacts in a private directory and moves them
into ``--out`` only after the whole command succeeded, together with a
``manifest.json`` listing inputs, outputs and their hashes.

Exit codes: 0 success, 1 computation error, 2 usage error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from . import __version__, persistence, pipeline
from .config import ConfigError, ExperimentConfig

logger = logging.getLogger("magnetometry")

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class RunOutput:
    """Staging directory + lock for one run's output directory."""

    def __init__(self, out_dir, config: ExperimentConfig, command: str):
        self.out = Path(out_dir)
        self.config = config
        self.command = command
        self.inputs: dict[str, str] = {}
        self.artifacts: list[Path] = []

    def __enter__(self):
        self.out.mkdir(parents=True, exist_ok=True)
        self._lock = self.out / ".lock"
        try:
            fd = os.open(self._lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise UsageError(f"output directory {self.out} is locked by another run") from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        self.staging = self.out / f".staging-{os.getpid()}"
        shutil.rmtree(self.staging, ignore_errors=True)
        self.staging.mkdir()
        self.started = _dt.datetime.now(_dt.timezone.utc).isoformat()
        return self

    def path(self, name: str) -> Path:
        return self.staging / name

    def record(self, paths) -> None:
        self.artifacts.extend(Path(p) for p in paths)

    def read_input(self, path) -> Path:
        path = Path(path)
        if not path.is_file():
            raise UsageError(f"input file not found: {path}")
        self.inputs[str(path)] = persistence.sha256_file(path)
        sidecar = path.with_suffix(".json")
        if sidecar != path and sidecar.is_file():
            self.inputs[str(sidecar)] = persistence.sha256_file(sidecar)
        return path

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                self._commit()
        finally:
            shutil.rmtree(self.staging, ignore_errors=True)
            self._lock.unlink(missing_ok=True)
        return False

    def _commit(self):
        rel = sorted(p.relative_to(self.staging).as_posix() for p in self.artifacts)
        manifest = {
            "command": self.command,
            "code_version": __version__,
            "config_hash": self.config.digest(),
            "config": self.config.to_dict(),
            "inputs": self.inputs,
            "artifacts": {r: persistence.sha256_file(self.staging / r) for r in rel},
            "started": self.started,
            "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }
        persistence.write_atomic(self.staging / "manifest.json", persistence.dumps(manifest))
        for r in rel + ["manifest.json"]:
            dst = self.out / r
            dst.parent.mkdir(parents=True, exist_ok=True)
            os.replace(self.staging / r, dst)


def _curve_meta(config, theta, n_sites=None) -> dict:
    fwd = config.forward(n_sites)
    return {**fwd.describe(), "theta": list(np.atleast_1d(theta)), "gamma": config.model.gamma}


def cmd_simulate(args, config, run: RunOutput):
    fwd = config.forward()
    for i, theta in enumerate(config.calibration_grid().nodes()):
        values = fwd(theta)
        run.record(persistence.write_curve(run.path(f"curves/curve_{i:05d}.csv"), fwd.times, values, _curve_meta(config, theta)))


def cmd_calibrate(args, config, run: RunOutput):
    ds = pipeline.calibrate(config)
    run.record(persistence.write_dataset(run.path("dataset.csv"), ds))
    return ds


def _training_summary(model) -> dict:
    m = model.metrics_
    return {
        "epochs": m.epochs,
        "best_epoch": m.best_epoch,
        "returned_epoch": m.returned_epoch,
        "final_train_cost": m.final_train_cost,
        "best_val_cost": m.best_val_cost,
        "test_cost": m.test_cost,
        "stop_reason": m.stop_reason,
        "regression": m.regression,
        "split_sizes": [len(model.train_indices_), len(model.val_indices_), len(model.test_indices_)],
    }


def cmd_train(args, config, run: RunOutput):
    if args.dataset:
        ds = persistence.read_dataset(run.read_input(args.dataset))
    else:
        ds = cmd_calibrate(args, config, run)
    model = pipeline.train(config, ds)
    digest = persistence.dataset_hash(ds)
    run.record(persistence.write_model(run.path("model.json"), model, digest))
    run.record(persistence.write_metrics(run.path("metrics.csv"), model.metrics_))
    run.record([persistence.write_atomic(run.path("training.json"), persistence.dumps(_training_summary(model)))])
    return model


def _inference_forward(args, config, run):
    if getattr(args, "model", None):
        return persistence.read_model(run.read_input(args.model))
    if config.inference.forward == "exact" or getattr(args, "exact", False):
        return config.forward()
    return cmd_train(argparse.Namespace(dataset=None), config, run)


def cmd_infer(args, config, run: RunOutput):
    forward = _inference_forward(args, config, run)
    obs = None
    if args.observations:
        obs = persistence.read_observations(run.read_input(args.observations))
    est, obs = pipeline.infer_once(config, forward, obs)
    if not args.observations:
        run.record(persistence.write_observations(run.path("observations.csv"), obs))
    summary = {
        "means": est.mean_,
        "stds": est.std_,
        "grid": est.posterior_.grid.to_dict(),
        "forward": forward.describe(),
        "prior": est.posterior_.prior,
        "observation_seed": obs.seed,
        "true_theta": obs.true_theta,
    }
    run.record(persistence.write_posterior(run.path("posterior.csv"), est.posterior_, summary))


def _parse_models(specs) -> dict:
    out = {}
    for item in specs or []:
        n, _, path = item.partition("=")
        if not path or not n.isdigit():
            raise UsageError(f"--model expects N=PATH, got {item!r}")
        out[int(n)] = path
    return out


def cmd_scale(args, config, run: RunOutput):
    sizes = [int(n) for n in config.scaling.sizes]
    given = _parse_models(args.model)
    theta = tuple(config.inference.true_theta)
    summaries = {}
    for n in sizes:
        if n in given:
            fwd = persistence.read_model(run.read_input(given[n]))
        elif config.inference.forward == "exact":
            fwd = config.forward(n)
        else:
            fwd, _ = pipeline.surrogate_for(config, n)
            run.record(persistence.write_model(run.path(f"models/model_N{n}.json"), fwd))
        summaries[n] = pipeline.estimate(config, n, theta, fwd, config.inference.n_runs)
    from .metrology import fit_scaling

    for d in range(config.n_params):
        fit = fit_scaling(sizes, [summaries[n].mean_std[d] for n in sizes])
        fit.summaries = summaries
        extra = {
            "parameter": config.model.params[d],
            "true_theta": theta,
            "per_run_means": {n: summaries[n].means[:, d] for n in sizes},
            "per_run_stds": {n: summaries[n].stds[:, d] for n in sizes},
        }
        name = "scaling.csv" if config.n_params == 1 else f"scaling_{config.model.params[d]}.csv"
        run.record(persistence.write_scaling(run.path(name), fit, d, extra))


def cmd_reproduce(args, config, run: RunOutput):
    result = pipeline.reproduce_table(args.table, config)
    m = len(pipeline.TABLE_SPECS[result.table]["params"])
    names = pipeline.TABLE_SPECS[result.table]["params"]
    header = [f"true_{p}" for p in names] + ["N"] + [f"{p}_est" for p in names] + [f"delta_{p}" for p in names]
    header += [f"ref_{p}_est" for p in names] + [f"ref_delta_{p}" for p in names] + ["mean_ok", "std_ok"]
    rows = []
    for r in result.rows:
        ref = r["reference"] or [float("nan")] * (2 * m)
        rows.append(r["theta"] + [r["N"]] + r["estimate"] + r["std"] + list(ref) + [str(r["mean_ok"]), str(r["std_ok"])])
    fits = [
        {"true_theta": list(th), "parameter": names[d], "alpha": f.alpha, "prefactor": f.prefactor, "residuals": f.residuals}
        for (th, d), f in result.fits.items()
    ]
    side = {"table": result.table, "all_within_bands": result.all_within_bands, "fits": fits, "training": result.training}
    run.record(persistence.write_table(run.path(f"table_{result.table}.csv"), header, rows, side))
    for r in result.rows:
        status = "ok" if r["mean_ok"] and r["std_ok"] else "OUTSIDE BANDS"
        print(f"{result.table} theta={r['theta']} N={r['N']:>2} est={np.round(r['estimate'], 5).tolist()} "
              f"std={np.round(r['std'], 6).tolist()} ref={r['reference']} {status}")
    return result


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "train": cmd_train,
    "infer": cmd_infer,
    "scale": cmd_scale,
    "reproduce": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config (YAML)")
    common.add_argument("--seed", type=int, default=None, help="override the root seed")
    common.add_argument("--out", default=None, help="output directory (default: ./runs/<command>)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="magnetometry", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="exact curves over the calibration grid")
    sub.add_parser("calibrate", parents=[common], help="shot-noise calibration dataset")
    p = sub.add_parser("train", parents=[common], help="train the surrogate network")
    p.add_argument("--dataset", help="calibration dataset CSV (generated if omitted)")
    p = sub.add_parser("infer", parents=[common], help="posterior for one observation set")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--model", help="trained surrogate JSON")
    group.add_argument("--exact", action="store_true", help="use the exact simulator as forward model")
    p.add_argument("--observations", help="observation CSV (synthetic if omitted)")
    p = sub.add_parser("scale", parents=[common], help="precision versus system size")
    p.add_argument("--model", action="append", metavar="N=PATH", help="surrogate per size (repeatable)")
    p = sub.add_parser("reproduce", parents=[common], help="regenerate a reference table")
    p.add_argument("--table", required=True, type=str.upper, choices=sorted(pipeline.TABLE_SPECS))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = ExperimentConfig.load(args.config)
        if args.seed is not None:
            data = config.to_dict()
            data["seed"] = args.seed
            config = ExperimentConfig.from_dict(data)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"magnetometry: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out) if args.out else Path("runs") / args.command
    try:
        with RunOutput(out, config, args.command) as run:
            COMMANDS[args.command](args, config, run)
    except UsageError as exc:
        print(f"magnetometry: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - report any computation failure with exit 1
        logger.debug("command failed", exc_info=True)
        print(f"magnetometry: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
