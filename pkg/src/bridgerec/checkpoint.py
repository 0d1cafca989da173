"""Checkpoint serialization: text manifest + little-endian raw arrays.

Layout (single file, version tag ``bridgerec-ckpt-v1``):

    bridgerec-ckpt-v1
    meta <key> <value>
    ...
    tensor <name> <dtype> <dim0,dim1,...> <byte-offset>
    ...
    blob <total-bytes>
    <raw little-endian array bytes, concatenated in manifest order>

Meta values are written with repr so floats round-trip exactly. Tensor bytes
are little-endian regardless of host order.
"""

from __future__ import annotations

import io

import numpy as np

from .cluster import ClusterModel
from .errors import ContractError, IngestError
from .model import Model, ModelConfig
from .sampler import SamplerConfig
from .schedule import ScheduleParams

VERSION_TAG = "bridgerec-ckpt-v1"

_META_TYPES = {
    "vocab": int, "dim": int, "blocks": int, "max_len": int, "dropout": float,
    "k_clusters": int, "mu": float, "sigma": float, "lam": float,
    "retrieval": str,
    "schedule.kind": str, "schedule.beta0": float, "schedule.beta1": float,
    "sampler.mode": str, "sampler.steps": int, "sampler.guidance_w": float,
    "sampler.seed": int,
}


def _le(arr: np.ndarray) -> np.ndarray:
    return arr.astype(arr.dtype.newbyteorder("<"), copy=False)


def save(path, model: Model, schedule_params: ScheduleParams,
         sampler_config: SamplerConfig, cluster: ClusterModel | None = None):
    cfg = model.config
    meta = {
        "vocab": cfg.vocab, "dim": cfg.dim, "blocks": cfg.blocks,
        "max_len": cfg.max_len, "dropout": cfg.dropout,
        "k_clusters": cfg.k_clusters, "mu": cfg.mu, "sigma": cfg.sigma,
        "lam": cfg.lam, "retrieval": cfg.retrieval,
        "schedule.kind": schedule_params.kind,
        "schedule.beta0": schedule_params.beta0,
        "schedule.beta1": schedule_params.beta1,
        "sampler.mode": sampler_config.mode,
        "sampler.steps": sampler_config.steps,
        "sampler.guidance_w": sampler_config.guidance_w,
        "sampler.seed": sampler_config.seed,
    }
    arrays = dict(model.state_dict())
    if cluster is not None:
        arrays["cluster.centers"] = cluster.centers
        arrays["cluster.labels"] = cluster.labels.astype(np.int64)

    manifest = [VERSION_TAG]
    for key, value in meta.items():
        manifest.append(f"meta {key} {value!r}" if isinstance(value, float)
                        else f"meta {key} {value}")
    blob = io.BytesIO()
    offset = 0
    for name, arr in arrays.items():
        data = _le(np.ascontiguousarray(arr))
        shape = ",".join(str(d) for d in arr.shape) or "scalar"
        manifest.append(f"tensor {name} {arr.dtype.name} {shape} {offset}")
        blob.write(data.tobytes())
        offset += data.nbytes
    manifest.append(f"blob {offset}")
    with open(path, "wb") as fh:
        fh.write(("\n".join(manifest) + "\n").encode("utf-8"))
        fh.write(blob.getvalue())


def load(path):
    """Returns (model, schedule_params, sampler_config, cluster-or-None)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0 or raw[:nl].decode("utf-8", "replace") != VERSION_TAG:
        raise IngestError(f"{path}: not a {VERSION_TAG} checkpoint")
    meta: dict = {}
    tensors: list[tuple[str, str, tuple, int]] = []
    pos = nl + 1
    blob_size = None
    while True:
        nl = raw.find(b"\n", pos)
        if nl < 0:
            raise IngestError(f"{path}: truncated manifest")
        line = raw[pos:nl].decode("utf-8")
        pos = nl + 1
        parts = line.split(" ", 1)
        if parts[0] == "meta":
            key, value = parts[1].split(" ", 1)
            if key not in _META_TYPES:
                raise IngestError(f"{path}: unknown meta key {key!r}")
            ty = _META_TYPES[key]
            try:
                meta[key] = value if ty is str else ty(value)
            except ValueError:
                raise IngestError(f"{path}: bad value for meta {key}: {value!r}") from None
        elif parts[0] == "tensor":
            name, dtype, shape_s, off_s = parts[1].rsplit(" ", 3)
            shape = () if shape_s == "scalar" else tuple(int(d) for d in shape_s.split(","))
            tensors.append((name, dtype, shape, int(off_s)))
        elif parts[0] == "blob":
            blob_size = int(parts[1])
            break
        else:
            raise IngestError(f"{path}: unexpected manifest line {line!r}")
    blob = raw[pos:]
    if blob_size is None or len(blob) != blob_size:
        raise IngestError(f"{path}: blob size mismatch "
                          f"(manifest says {blob_size}, file has {len(blob)})")

    missing = [k for k in _META_TYPES if k not in meta]
    if missing:
        raise IngestError(f"{path}: manifest missing meta keys {missing}")

    arrays = {}
    for name, dtype, shape, offset in tensors:
        dt = np.dtype(dtype).newbyteorder("<")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arr = np.frombuffer(blob, dtype=dt, count=count, offset=offset)
        arrays[name] = arr.reshape(shape).astype(np.dtype(dtype), copy=True)

    cfg = ModelConfig(vocab=meta["vocab"], dim=meta["dim"], blocks=meta["blocks"],
                      max_len=meta["max_len"], dropout=meta["dropout"],
                      k_clusters=meta["k_clusters"], mu=meta["mu"],
                      sigma=meta["sigma"], lam=meta["lam"],
                      retrieval=meta["retrieval"])
    model = Model(cfg, seed=0)
    state = {k: v for k, v in arrays.items() if not k.startswith("cluster.")}
    expected = set(model.params)
    if set(state) != expected:
        raise IngestError(f"{path}: parameter set mismatch "
                          f"(missing {sorted(expected - set(state))[:3]}..., "
                          f"unexpected {sorted(set(state) - expected)[:3]}...)")
    model.load_state_dict(state)

    cluster = None
    if "cluster.centers" in arrays:
        cluster = ClusterModel(centers=arrays["cluster.centers"],
                               labels=arrays["cluster.labels"])

    schedule_params = ScheduleParams(kind=meta["schedule.kind"],
                                     beta0=meta["schedule.beta0"],
                                     beta1=meta["schedule.beta1"])
    sampler_config = SamplerConfig(mode=meta["sampler.mode"],
                                   steps=meta["sampler.steps"],
                                   guidance_w=meta["sampler.guidance_w"],
                                   seed=meta["sampler.seed"])
    return model, schedule_params, sampler_config, cluster


def check_vocab(model: Model, num_items: int, source: str = "dataset"):
    if model.config.vocab < num_items:
        raise ContractError(
            f"checkpoint vocabulary ({model.config.vocab}) smaller than "
            f"{source} item count ({num_items})"
        )
