"""JSON file formats, content hashes and session-config loading."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .codebook import Codebook
from .dmc import Dmc, DisproverTriple, validate_dmc
from .errors import ParseError
from .protocol import GammaSchedule, NoiselessSessionConfig, NoisySessionConfig


def dumps(obj) -> str:
    """Stable, diffable JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def content_hash(obj) -> str:
    canon = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canon.encode()).hexdigest()


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


# -- channels ---------------------------------------------------------------

def channel_to_json(ch: Dmc) -> dict:
    out = {
        "inputs": ch.input_size,
        "name": ch.name,
        "outputs": ch.output_size,
        "rows": ch.w.tolist(),
    }
    if ch.output_labels is not None:
        out["output_labels"] = list(ch.output_labels)
    return out


def channel_from_json(obj: dict) -> Dmc:
    try:
        rows = obj["rows"]
        inputs, outputs = int(obj["inputs"]), int(obj["outputs"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"channel file needs inputs, outputs and rows: {exc}") from exc
    if len(rows) != inputs or any(len(r) != outputs for r in rows):
        raise ParseError(f"rows do not form an {inputs}x{outputs} table")
    return validate_dmc(rows, name=obj.get("name", ""), output_labels=obj.get("output_labels"))


def load_channel(path) -> Dmc:
    return channel_from_json(read_json(path))


def channel_hash(ch: Dmc) -> str:
    return content_hash(ch.w.tolist())


# -- codebooks --------------------------------------------------------------

def code_from_json(obj: dict) -> Codebook:
    try:
        code = Codebook(int(obj["n"]), [tuple(c) for c in obj["codewords"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad codebook: {exc}") from exc
    if "messages" in obj and int(obj["messages"]) != code.messages:
        raise ParseError(f"codebook declares {obj['messages']} messages, has {code.messages}")
    return code


def load_code(path) -> Codebook:
    return code_from_json(read_json(path))


def code_hash(code: Codebook) -> str:
    return content_hash(code.to_json())


# -- session configs --------------------------------------------------------

def _gamma(value) -> GammaSchedule:
    if value in (None, "auto"):
        return GammaSchedule("auto")
    try:
        return GammaSchedule(int(value))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"gamma must be 'auto' or a positive integer, got {value!r}") from exc


def _triple(obj) -> DisproverTriple | None:
    if obj is None:
        return None
    return DisproverTriple(int(obj["x_c"]), int(obj["x_e"]), int(obj["y_c"]))


def load_session(path):
    """Session config; channel and code paths resolve relative to the config file."""
    path = Path(path)
    obj = read_json(path)
    base = path.parent
    mode = obj.get("mode", "noisy")
    policy = obj.get("disprover_policy", "first")
    try:
        code = load_code(base / obj["code"])
        if mode == "noiseless":
            return NoiselessSessionConfig(
                channel=load_channel(base / obj.get("channel", obj.get("forward"))),
                code=code,
                gamma=_gamma(obj.get("gamma")),
                disprover=_triple(obj.get("disprover")),
                disprover_policy=policy,
            )
        if mode == "noisy":
            return NoisySessionConfig(
                forward=load_channel(base / obj["forward"]),
                backward=load_channel(base / obj["backward"]),
                code=code,
                gamma=_gamma(obj.get("gamma")),
                backward_disprover=_triple(obj.get("backward_disprover")),
                disprover_policy=policy,
            )
    except KeyError as exc:
        raise ParseError(f"{path}: missing key {exc}") from exc
    raise ParseError(f"{path}: unknown mode {mode!r}")


def triple_json(t: DisproverTriple) -> dict:
    return {"x_c": t.x_c, "x_e": t.x_e, "y_c": t.y_c}


def provenance(cfg) -> dict:
    """Content hashes tying derived artifacts to their channel, code and schedule."""
    out = {
        "code": code_hash(cfg.code),
        "forward": channel_hash(cfg.forward),
        "gamma": cfg.gamma_n,
        "mode": cfg.mode,
    }
    if isinstance(cfg, NoisySessionConfig):
        out["backward"] = channel_hash(cfg.backward)
        out["disprover"] = triple_json(cfg.backward_disprover)
    else:
        out["disprover"] = triple_json(cfg.disprover)
    out["config"] = content_hash(dict(out))
    return out
