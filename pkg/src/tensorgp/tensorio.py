"""File formats: coordinate tensor files, model serialization, run configs.

Coordinate tensor files are line-oriented text:

    tensor K n1 n2 ... nK [dense]
    i1 i2 ... iK value
    ...

Indices are 1-based; unlisted cells are missing unless the header says
``dense`` (then every cell must appear exactly once).  Blank lines and lines
starting with ``#`` are ignored.  Values are written with 17 significant
digits so 64-bit floats round-trip exactly.  An optional binary container
(``tensorbin`` magic) stores the same records as little-endian int32 indices
and float64 values for large tensors.

Model files are JSON with a format/version tag; a loaded model rebuilds its
Gram matrices deterministically from the stored factors, so predictions from
a round-tripped model are bit-identical to the original's.

Run configuration files are flat ``key = value`` text with ``#`` comments;
unknown keys are rejected.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict

import numpy as np

from .errors import ConfigError, ModelFormatError, TensorFormatError
from .evaluate import ExperimentSpec
from .inference import FittedModel, ModelConfig, VariationalState
from .kernels import KernelSpec, gram_matrix

MODEL_FORMAT = "tensorgp-model"
MODEL_VERSION = 1

_TEXT_MAGIC = "tensor"
_BINARY_MAGIC = b"tensorbin"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_tensor(path, t: np.ndarray, mask: np.ndarray | None = None, binary: bool = False) -> None:
    """Write the observed cells of ``t`` (all cells when mask is None)."""
    t = np.asarray(t, dtype=np.float64)
    if mask is None:
        mask = np.ones(t.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != t.shape:
        raise TensorFormatError(f"mask shape {mask.shape} != tensor shape {t.shape}")
    dims = t.shape
    dense = bool(mask.all())
    flat_idx = np.flatnonzero(mask.ravel())
    coords = np.stack(np.unravel_index(flat_idx, dims), axis=1) + 1 if flat_idx.size else np.zeros((0, len(dims)), dtype=int)
    values = t.ravel()[flat_idx]

    if binary:
        with open(path, "wb") as fh:
            header = f"{_BINARY_MAGIC.decode()} {len(dims)} " + " ".join(map(str, dims))
            if dense:
                header += " dense"
            fh.write(header.encode() + b"\n")
            fh.write(struct.pack("<q", len(values)))
            for row, v in zip(coords, values):
                fh.write(struct.pack(f"<{len(dims)}i", *row))
                fh.write(struct.pack("<d", v))
        return

    with open(path, "w") as fh:
        header = f"{_TEXT_MAGIC} {len(dims)} " + " ".join(map(str, dims))
        if dense:
            header += " dense"
        fh.write(header + "\n")
        for row, v in zip(coords, values):
            fh.write(" ".join(map(str, row)) + " " + _fmt(v) + "\n")


def _parse_header(tokens: list[str], lineno: int) -> tuple[tuple[int, ...], bool]:
    if len(tokens) < 2:
        raise TensorFormatError(f"line {lineno}: header needs an order and dimensions")
    try:
        order = int(tokens[1])
    except ValueError:
        raise TensorFormatError(f"line {lineno}: bad tensor order {tokens[1]!r}") from None
    rest = tokens[2:]
    dense = False
    if rest and rest[-1] == "dense":
        dense = True
        rest = rest[:-1]
    if len(rest) != order:
        raise TensorFormatError(
            f"line {lineno}: header declares order {order} but lists {len(rest)} dimensions"
        )
    try:
        dims = tuple(int(x) for x in rest)
    except ValueError:
        raise TensorFormatError(f"line {lineno}: non-integer dimension in header") from None
    if order < 1 or any(d < 1 for d in dims):
        raise TensorFormatError(f"line {lineno}: dims must be positive, got {dims}")
    return dims, dense


def read_tensor(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a coordinate file; returns (tensor, observed mask).

    Missing cells hold 0.0 in the returned tensor and False in the mask.
    """
    with open(path, "rb") as fh:
        first = fh.readline()
        if first.startswith(_BINARY_MAGIC):
            return _read_binary(fh, first)

    with open(path, "r") as fh:
        dims = None
        dense = False
        t = mask = None
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if dims is None:
                if tokens[0] != _TEXT_MAGIC:
                    raise TensorFormatError(
                        f"line {lineno}: expected '{_TEXT_MAGIC}' header, got {tokens[0]!r}"
                    )
                dims, dense = _parse_header(tokens, lineno)
                t = np.zeros(dims)
                mask = np.zeros(dims, dtype=bool)
                continue
            if len(tokens) != len(dims) + 1:
                raise TensorFormatError(
                    f"line {lineno}: expected {len(dims)} indices and a value, got {len(tokens)} fields"
                )
            try:
                idx = tuple(int(x) for x in tokens[:-1])
                value = float(tokens[-1])
            except ValueError:
                raise TensorFormatError(f"line {lineno}: malformed record {line!r}") from None
            for k, (i, d) in enumerate(zip(idx, dims)):
                if not 1 <= i <= d:
                    raise TensorFormatError(
                        f"line {lineno}: index {i} out of range [1, {d}] in mode {k + 1}"
                    )
            pos = tuple(i - 1 for i in idx)
            if mask[pos]:
                raise TensorFormatError(f"line {lineno}: duplicate index {idx}")
            t[pos] = value
            mask[pos] = True
    if dims is None:
        raise TensorFormatError("line 1: empty file, no header")
    if dense and not mask.all():
        raise TensorFormatError(
            f"dense tensor file is missing {int((~mask).sum())} of {mask.size} cells"
        )
    return t, mask


def _read_binary(fh, first_line: bytes) -> tuple[np.ndarray, np.ndarray]:
    tokens = first_line.decode().split()
    dims, dense = _parse_header(tokens, 1)
    (count,) = struct.unpack("<q", fh.read(8))
    t = np.zeros(dims)
    mask = np.zeros(dims, dtype=bool)
    k = len(dims)
    record = struct.Struct(f"<{k}i d")
    for r in range(count):
        buf = fh.read(record.size)
        if len(buf) != record.size:
            raise TensorFormatError(f"record {r + 1}: truncated binary tensor file")
        *idx, value = record.unpack(buf)
        for m, (i, d) in enumerate(zip(idx, dims)):
            if not 1 <= i <= d:
                raise TensorFormatError(f"record {r + 1}: index {i} out of range [1, {d}] in mode {m + 1}")
        pos = tuple(i - 1 for i in idx)
        if mask[pos]:
            raise TensorFormatError(f"record {r + 1}: duplicate index {tuple(idx)}")
        t[pos] = value
        mask[pos] = True
    if dense and not mask.all():
        raise TensorFormatError("dense binary tensor file does not cover the grid")
    return t, mask


# ---------------------------------------------------------------------------
# Model serialization
# ---------------------------------------------------------------------------


def _config_to_dict(config: ModelConfig) -> dict:
    d = asdict(config)
    kernel = config.kernel
    if isinstance(kernel, KernelSpec):
        d["kernel"] = {"family": kernel.family, "gamma": kernel.gamma}
    else:
        d["kernel"] = [{"family": k.family, "gamma": k.gamma} for k in kernel]
    return d


def _config_from_dict(d: dict) -> ModelConfig:
    kernel = d["kernel"]
    if isinstance(kernel, dict):
        d["kernel"] = KernelSpec(**kernel)
    else:
        d["kernel"] = [KernelSpec(**k) for k in kernel]
    return ModelConfig(**d)


def _array_out(a) -> list | None:
    return None if a is None else np.asarray(a).tolist()


def save_model(path, model: FittedModel) -> None:
    state = model.state
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": _config_to_dict(model.config),
        "dims": list(model.dims),
        "factors": [u.tolist() for u in model.factors],
        "state": {
            "ez": _array_out(state.ez),
            "mu": _array_out(state.mu),
            "ups_diag": _array_out(state.ups_diag),
            "beta1": state.beta1,
            "beta2": state.beta2,
            "tau": state.tau,
            "zbar_loc": _array_out(state.zbar_loc),
        },
        "tau_star": model.tau_star,
        "objective_trace": model.objective_trace,
        "mask": None if model.mask is None else model.mask.ravel().astype(int).tolist(),
        "mstep_warnings": model.mstep_warnings,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path) -> FittedModel:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as err:
        raise ModelFormatError(f"corrupt model file {path}: {err}") from None
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path} is not a {MODEL_FORMAT} file")
    if payload.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"model version {payload.get('version')} is incompatible with {MODEL_VERSION}"
        )
    try:
        config = _config_from_dict(payload["config"])
        dims = tuple(payload["dims"])
        factors = [np.asarray(u, dtype=np.float64) for u in payload["factors"]]
        s = payload["state"]
        arr = lambda key: None if s[key] is None else np.asarray(s[key], dtype=np.float64)
        state = VariationalState(
            ez=arr("ez"),
            mu=arr("mu"),
            ups_diag=arr("ups_diag"),
            beta1=s["beta1"],
            beta2=s["beta2"],
            tau=s["tau"],
            basis=None,
            zbar_loc=arr("zbar_loc"),
        )
        mask = payload["mask"]
        mask = None if mask is None else np.asarray(mask, dtype=bool).reshape(dims)
        specs = config.kernels(len(dims))
        grams = [gram_matrix(spec, u) for spec, u in zip(specs, factors)]
        return FittedModel(
            factors=factors,
            mode_grams=grams,
            config=config,
            state=state,
            tau_star=payload["tau_star"],
            objective_trace=list(payload["objective_trace"]),
            mask=mask,
            mstep_warnings=payload.get("mstep_warnings", 0),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ModelFormatError(f"corrupt model file {path}: {err}") from None


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

_MODEL_KEYS = {
    "noise": str,
    "process": str,
    "nu": float,
    "rank": "int_list",
    "kernel": str,
    "gamma": float,
    "l1_lambda": float,
    "gaussian_sigma": float,
    "max_em_iters": int,
    "em_rel_tol": float,
    "mstep_max_iters": int,
    "seed": int,
    "truncation_energy": float,
    "n_restarts": int,
}

_EXPERIMENT_KEYS = {
    "dims": "int_list",
    "generator": str,
    "holdout_fraction": float,
    "folds": int,
    "repeats": int,
    "gamma_grid": "float_list",
    "lambda_grid": "float_list",
    "rank_grid": "int_list",
    "latent_scale": float,
    "gen_gamma": float,
    "gen_rank": int,
    "model_sigma": float,
    "data_file": str,
}

CONFIG_KEYS = {**_MODEL_KEYS, **_EXPERIMENT_KEYS}


def _coerce(key: str, raw: str, lineno: int):
    kind = CONFIG_KEYS[key]
    try:
        if kind == "int_list":
            return [int(x) for x in raw.replace(",", " ").split()]
        if kind == "float_list":
            return [float(x) for x in raw.replace(",", " ").split()]
        return kind(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value {raw!r} for key {key!r}") from None


def parse_config(path) -> dict:
    """Read a flat key=value config file into a typed dict."""
    out: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in CONFIG_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in out:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            out[key] = _coerce(key, value, lineno)
    return out


def model_config_from_dict(d: dict, seed_override: int | None = None) -> ModelConfig:
    kwargs = {}
    for key in _MODEL_KEYS:
        if key not in d:
            continue
        if key == "kernel":
            kwargs["kernel"] = KernelSpec(d["kernel"], d.get("gamma", 1.0))
        elif key == "gamma":
            continue  # folded into the kernel spec
        elif key == "rank":
            ranks = d["rank"]
            kwargs["rank"] = ranks[0] if len(ranks) == 1 else ranks
        else:
            kwargs[key] = d[key]
    if "kernel" not in kwargs and "gamma" in d:
        kwargs["kernel"] = KernelSpec("gaussian", d["gamma"])
    if seed_override is not None:
        kwargs["seed"] = seed_override
    try:
        return ModelConfig(**kwargs)
    except (ValueError, TypeError) as err:
        raise ConfigError(str(err)) from None


def experiment_spec_from_dict(d: dict, seed_override: int | None = None) -> ExperimentSpec:
    kwargs = {}
    mapping = {
        "dims": "dims",
        "generator": "generator",
        "noise": "noise",
        "process": "process",
        "holdout_fraction": "holdout_fraction",
        "folds": "folds",
        "repeats": "repeats",
        "seed": "seed",
        "gamma_grid": "gamma_grid",
        "lambda_grid": "lambda_grid",
        "rank_grid": "rank_grid",
        "kernel": "kernel_family",
        "nu": "nu",
        "gaussian_sigma": "sigma",
        "latent_scale": "latent_scale",
        "gen_gamma": "gen_gamma",
        "gen_rank": "gen_rank",
        "model_sigma": "model_sigma",
        "data_file": "data_file",
        "max_em_iters": "max_em_iters",
        "em_rel_tol": "em_rel_tol",
        "mstep_max_iters": "mstep_max_iters",
        "truncation_energy": "truncation_energy",
        "n_restarts": "n_restarts",
    }
    for key, attr in mapping.items():
        if key in d:
            kwargs[attr] = tuple(d[key]) if key == "dims" else d[key]
    if seed_override is not None:
        kwargs["seed"] = seed_override
    try:
        return ExperimentSpec(**kwargs)
    except (ValueError, TypeError) as err:
        raise ConfigError(str(err)) from None
