"""CSV + JSON sidecar readers and writers for every artifact type.

Floats are written with 17 significant digits so files round-trip exactly
and identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .grid import ParameterGrid
from .sampling import CalibrationDataset, ObservationSet


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def dumps(data) -> str:
    return json.dumps(_to_jsonable(data), indent=2, sort_keys=True) + "\n"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def write_atomic(path, text: str) -> Path:
    """Write ``text`` to a temp file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def write_table(path, header, rows, sidecar: dict | None = None) -> list[Path]:
    """CSV file plus optional ``<stem>.json`` sidecar; returns the paths written."""
    path = Path(path)
    written = [write_atomic(path, _csv_text(header, rows))]
    if sidecar is not None:
        meta = {"code_version": __version__, **sidecar}
        written.append(write_atomic(path.with_suffix(".json"), dumps(meta)))
    return written


def read_table(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))


def read_sidecar(path) -> dict:
    return json.loads(Path(path).with_suffix(".json").read_text())


# -- curves --------------------------------------------------------------


def write_curve(path, times, values, metadata: dict) -> list[Path]:
    return write_table(path, ["t", "value"], zip(times, values), metadata)


def read_curve(path):
    _, data = read_table(path)
    return data[:, 0], data[:, 1], read_sidecar(path)


# -- calibration datasets ----------------------------------------------------


def _theta_header(m: int) -> list[str]:
    return [f"theta_{k + 1}" for k in range(m)]


def write_dataset(path, ds: CalibrationDataset) -> list[Path]:
    header = _theta_header(ds.n_params) + [f"d_{j + 1}" for j in range(ds.targets.shape[1])]
    rows = (list(th) + list(tg) for th, tg in zip(ds.thetas, ds.targets))
    return write_table(path, header, rows, ds.metadata())


def dataset_hash(ds: CalibrationDataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.thetas).tobytes())
    h.update(np.ascontiguousarray(ds.targets).tobytes())
    return h.hexdigest()[:16]


def read_dataset(path) -> CalibrationDataset:
    header, data = read_table(path)
    meta = read_sidecar(path)
    m = sum(h.startswith("theta_") for h in header)
    return CalibrationDataset(
        thetas=data[:, :m],
        targets=data[:, m:],
        times=np.array(meta["times"], dtype=float),
        grid=ParameterGrid.from_dict(meta["grid"]),
        n_m=meta["n_m"],
        repetitions=int(meta["repetitions"]),
        seed=int(meta["seed"]),
        source=meta["source"],
        sub_seeds=np.array(meta.get("sub_seeds") or np.zeros(len(data)), dtype=np.int64),
    )


# -- observations -----------------------------------------------------------


def write_observations(path, obs: ObservationSet) -> list[Path]:
    rows = ((t, int(x), int(obs.n_p)) for t, x in zip(obs.times, obs.successes))
    return write_table(path, ["t", "X", "N_p"], rows, obs.metadata())


def read_observations(path) -> ObservationSet:
    _, data = read_table(path)
    meta = read_sidecar(path)
    n_p = {int(v) for v in data[:, 2]}
    if len(n_p) > 1:
        raise ValueError("observation file mixes different N_p values")
    return ObservationSet(
        times=data[:, 0],
        successes=data[:, 1].astype(np.int64),
        n_p=n_p.pop() if n_p else int(meta["n_p"]),
        true_theta=meta.get("true_theta"),
        seed=meta.get("seed"),
    )


# -- surrogate models -------------------------------------------------------------


def model_to_dict(model, dataset_digest: str | None = None) -> dict:
    return {
        "layer_sizes": model.layer_sizes_,
        "activation": "tanh",
        "output_activation": "identity",
        "weights": [w.tolist() for w in model.coefs_],
        "biases": [b.tolist() for b in model.intercepts_],
        "input_shift": model.input_shift_.tolist(),
        "input_scale": model.input_scale_.tolist(),
        "training_config": model.get_params(),
        "dataset_hash": dataset_digest,
        "code_version": __version__,
    }


def model_from_dict(data: dict):
    from .surrogate import MLPSurrogate

    config = dict(data.get("training_config") or {})
    sizes = data["layer_sizes"]
    config["hidden_layer_sizes"] = tuple(sizes[1:-1])
    for key in ("split",):
        if key in config and config[key] is not None:
            config[key] = tuple(config[key])
    model = MLPSurrogate(**config)
    model.n_features_in_, model.n_outputs_ = sizes[0], sizes[-1]
    model.coefs_ = [np.array(w, dtype=float).reshape(a, b) for w, a, b in zip(data["weights"], sizes[:-1], sizes[1:])]
    model.intercepts_ = [np.array(b, dtype=float) for b in data["biases"]]
    model.input_shift_ = np.array(data["input_shift"], dtype=float)
    model.input_scale_ = np.array(data["input_scale"], dtype=float)
    return model


def write_model(path, model, dataset_digest: str | None = None) -> list[Path]:
    return [write_atomic(path, dumps(model_to_dict(model, dataset_digest)))]


def read_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))


def write_metrics(path, metrics) -> list[Path]:
    return [write_atomic(path, _csv_text(["epoch", "train_cost", "val_cost", "grad_norm"], metrics.rows()))]


# -- posteriors and scaling ---------------------------------------------------------


def write_posterior(path, post, summary: dict) -> list[Path]:
    nodes = post.grid.nodes()
    rows = (list(n) + [p] for n, p in zip(nodes, post.probabilities.ravel()))
    header = _theta_header(post.grid.ndim) + ["probability"]
    return write_table(path, header, rows, summary)


def write_scaling(path, fit, dim: int = 0, extra: dict | None = None) -> list[Path]:
    rows = []
    for n in fit.sizes:
        s = fit.summaries.get(int(n))
        rows.append([int(n), s.mean_estimate[dim] if s else float("nan"), s.mean_std[dim] if s else float("nan")])
    side = {
        "alpha": fit.alpha,
        "prefactor": fit.prefactor,
        "residuals": fit.residuals,
        "sizes": fit.sizes,
        "precisions": fit.precisions,
        **(extra or {}),
    }
    return write_table(path, ["N", "theta_est_mean", "delta_mean"], rows, side)
