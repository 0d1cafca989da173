"""key=value config files; CLI flags override file values.

Lines are ``section.key = value`` (spaces around ``=`` optional); blank lines
and ``#`` comments are ignored. Every CLI flag has a file equivalent.
"""

from __future__ import annotations

from .errors import IngestError

_BOOL = {"true": True, "false": False, "1": True, "0": False,
         "yes": True, "no": False}

# key -> parser; kept flat so a config file is a plain namespace
SCHEMA = {
    "schedule.kind": str,
    "schedule.beta0": float,
    "schedule.beta1": float,
    "sampler.mode": str,
    "sampler.steps": int,
    "sampler.guidance_w": float,
    "sampler.seed": int,
    "model.dim": int,
    "model.blocks": int,
    "model.max_len": int,
    "model.dropout": float,
    "model.k_clusters": int,
    "model.mu": float,
    "model.sigma": float,
    "model.lambda": float,
    "model.retrieval": str,
    "train.lr": float,
    "train.batch": int,
    "train.epochs": int,
    "train.cond_drop_p": float,
    "train.seed": int,
    "train.con_mode": "bool",
    "train.patience": int,
    "train.eval_every": int,
    "train.target_hr1": float,
}


def _parse_value(key: str, raw: str, where: str):
    ty = SCHEMA[key]
    if ty == "bool":
        if raw.lower() not in _BOOL:
            raise IngestError(f"{where}: {key} wants true/false, got {raw!r}")
        return _BOOL[raw.lower()]
    try:
        return ty(raw)
    except ValueError:
        raise IngestError(f"{where}: bad value for {key}: {raw!r}") from None


def load_config(path) -> dict:
    values: dict = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise IngestError(f"{path}:{lineno}: expected key = value")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in SCHEMA:
                raise IngestError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(key, raw, f"{path}:{lineno}")
    return values


def merged(file_values: dict, cli_values: dict) -> dict:
    """CLI wins on conflict; None CLI values mean 'not given'."""
    out = dict(file_values)
    for key, value in cli_values.items():
        if value is not None:
            out[key] = value
    return out
