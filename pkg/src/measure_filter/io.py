"""JSON/JSONL formats for configs, datasets, filter results and states.

Floats are written with 17 significant digits so that parse -> write is
byte-stable; observation times read from a dataset keep their original
spelling and are echoed verbatim.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .measures import p0_from_dict, state_from_dict, state_to_dict
from .simulation import MODELS, Dataset, SimConfig


class ConfigError(ValueError):
    pass


class RawFloat(float):
    """A float that remembers how it was spelled in the input."""

    text: str

    def __new__(cls, text: str):
        obj = super().__new__(cls, text)
        obj.text = text
        return obj


def _fmt_float(x: float) -> str:
    if isinstance(x, RawFloat):
        return x.text
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite number {x}")
    return format(x, ".17g")


def dumps(obj) -> str:
    """Compact JSON with 17-significant-digit floats."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(obj if isinstance(obj, RawFloat) else float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k), ensure_ascii=False)}:{dumps(v)}"
                              for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def loads(text: str):
    return json.loads(text, parse_float=RawFloat)


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# configs


@dataclass
class RunConfig:
    model: str
    theta: float | None = None
    p0: dict | None = None
    alpha: list | None = None
    beta: float | None = None
    sigma_speed: float = 1.0
    prune_eps: float = 1e-8
    dw_weight_mode: str = "full_marginal"
    dw_binomial_convention: str = "survivor"
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model: must be one of {MODELS}, got {self.model!r}")
        if self.model in ("fv", "dw"):
            if self.theta is None or not self.theta > 0:
                raise ConfigError(f"theta: must be positive, got {self.theta}")
            if self.p0 is None:
                raise ConfigError("p0: required for fv and dw")
            try:
                p0_from_dict(self.p0)
            except (ValueError, KeyError, TypeError) as err:
                raise ConfigError(f"p0: {err}") from None
        else:
            if not self.alpha or min(self.alpha) <= 0:
                raise ConfigError(f"alpha: must be a nonempty positive vector, got {self.alpha}")
            if self.model == "cir" and len(self.alpha) != 1:
                raise ConfigError("alpha: cir takes a single shape parameter")
        if self.model in ("dw", "cir") and (self.beta is None or not self.beta > 0):
            raise ConfigError(f"beta: must be positive, got {self.beta}")
        if not self.sigma_speed > 0:
            raise ConfigError(f"sigma_speed: must be positive, got {self.sigma_speed}")
        if not 0 <= self.prune_eps < 1:
            raise ConfigError(f"prune_eps: must lie in [0, 1), got {self.prune_eps}")
        if self.dw_weight_mode not in ("full_marginal", "paper_literal"):
            raise ConfigError(f"dw_weight_mode: unknown value {self.dw_weight_mode!r}")
        if self.dw_binomial_convention not in ("survivor", "paper_literal"):
            raise ConfigError(
                f"dw_binomial_convention: unknown value {self.dw_binomial_convention!r}")


def _plain(v):
    if isinstance(v, RawFloat):
        return float(v)
    if isinstance(v, list):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


def _build(cls, d: dict):
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown config key")
    if "model" not in d:
        raise ConfigError("model: required")
    try:
        return cls(**{k: _plain(v) for k, v in d.items()})
    except ConfigError:
        raise
    except (ValueError, TypeError) as err:
        raise ConfigError(str(err)) from None


def load_run_config(path) -> RunConfig:
    return _build(RunConfig, _read_config(path))


def load_sim_config(path) -> SimConfig:
    return _build(SimConfig, _read_config(path))


def _read_config(path):
    try:
        return read_json(path)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None


# ---------------------------------------------------------------------------
# datasets


def write_dataset(ds: Dataset, path) -> None:
    lines = []
    for j, (t, obs) in enumerate(ds.batches):
        rec = {"t": t, "obs": list(obs)}
        if ds.latent:
            rec["latent"] = ds.latent[j]
        lines.append(dumps(rec))
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    if ds.config is not None:
        write_json({"config": ds.config.to_dict()}, str(path) + ".provenance.json")


def read_dataset(path) -> list[tuple[float, list]]:
    batches = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = loads(line)
            if not isinstance(rec, dict) or "t" not in rec or "obs" not in rec:
                raise ConfigError(f"data line {lineno}: needs keys 't' and 'obs'")
            t = rec["t"]
            if isinstance(t, int):
                t = RawFloat(str(t))
            batches.append((t, list(rec["obs"])))
    return batches


# ---------------------------------------------------------------------------
# results and states


def _components(state) -> list[dict]:
    return [
        {"counts": {str(i): int(c) for i, c in enumerate(row) if c}, "w": float(w)}
        for row, w in zip(state.counts, state.weights)
    ]


def result_line(record) -> dict:
    state = record.state
    out = {"t": record.time, "logml_increment": record.logml_increment,
           "n_components": int(len(state.weights))}
    if "s" in record.extra:
        out["s"] = record.extra["s"]
    elif hasattr(state, "s") and hasattr(state, "beta"):
        out["s"] = state.s
    out["pruned_mass"] = record.pruned_mass
    out["components"] = _components(state)
    out["weight_fullinfo"] = record.extra["weight_fullinfo"]
    out["weight_prior"] = record.extra["weight_prior"]
    if hasattr(state, "registry"):
        out["atoms"] = list(state.registry.atoms)
    return out


def summary_line(records, prior) -> dict:
    final = records[-1].state if records else prior
    return {"summary": {
        "total_logml": float(sum(r.logml_increment for r in records)),
        "n_steps": len(records),
        "pruned_mass": records[-1].pruned_mass if records else 0.0,
        "final_components": _components(final),
    }}


def write_results(records, prior, path) -> None:
    lines = [dumps(result_line(r)) for r in records] + [dumps(summary_line(records, prior))]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def save_state(state, path) -> None:
    write_json(state_to_dict(state), path)


def load_state(path):
    return state_from_dict(_plain(read_json(path)))
