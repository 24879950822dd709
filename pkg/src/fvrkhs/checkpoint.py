"""Checkpoint container for trained operator networks.

Layout: the 8-byte magic b"FVCKPT01", a UTF-8 text header of one record
per line terminated by ``end``, then one little-endian float64 blob per
``param`` line in header order::

    format 1
    kind rkhs
    config {...json...}
    meta {...json...}
    param encoder.lift_weight float64 32x1x32
    ...
    end
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .core import as_tensor
from .deeponet import DeepONet, DeepONetConfig
from .errors import FormatError, KindMismatchError
from .model import FieldOperator, ModelConfig, RKHSOperatorModel

MAGIC = b"FVCKPT01"
FORMAT_VERSION = 1
KINDS = ("rkhs", "deeponet")


@dataclass
class Checkpoint:
    kind: str
    config: dict
    params: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.config["dim"])


def checkpoint_from_model(model: FieldOperator, meta: dict | None = None) -> Checkpoint:
    params = {k: v.detach().numpy().copy() for k, v in model.state_dict().items()}
    return Checkpoint(model.kind, model.config.to_dict(), params, dict(meta or {}))


def model_from_checkpoint(ck: Checkpoint) -> FieldOperator:
    if ck.kind == "rkhs":
        cfg = ModelConfig.from_dict(ck.config)
        model = RKHSOperatorModel(cfg, ck.params["anchors"])
    elif ck.kind == "deeponet":
        model = DeepONet(DeepONetConfig.from_dict(ck.config))
    else:
        raise FormatError(f"unknown model kind {ck.kind!r}")
    state = {k: as_tensor(v) for k, v in ck.params.items()}
    model.load_state_dict(state, strict=True)
    return model


def _shape_text(shape) -> str:
    return "x".join(str(s) for s in shape) if len(shape) else "scalar"


def _parse_shape(text: str) -> tuple[int, ...]:
    return () if text == "scalar" else tuple(int(s) for s in text.split("x"))


def save_checkpoint(ck: Checkpoint, path) -> None:
    lines = [f"format {FORMAT_VERSION}", f"kind {ck.kind}",
             "config " + json.dumps(ck.config, sort_keys=True),
             "meta " + json.dumps(ck.meta, sort_keys=True)]
    blobs = []
    for name, arr in ck.params.items():
        arr = np.asarray(arr, dtype=np.float64)
        lines.append(f"param {name} float64 {_shape_text(arr.shape)}")
        blobs.append(arr.astype("<f8").tobytes())
    lines.append("end")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path, expect_kind: str | None = None,
                    expect_dim: int | None = None) -> Checkpoint:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise FormatError(f"{path}: bad magic, expected {MAGIC!r}, found {raw[:8]!r}")
    end = raw.find(b"\nend\n", 8)
    if end < 0:
        raise FormatError(f"{path}: header not terminated (truncated file?)")
    try:
        lines = raw[8:end].decode("utf-8").split("\n")
    except UnicodeDecodeError:
        raise FormatError(f"{path}: header is not valid UTF-8") from None
    pos = end + len(b"\nend\n")
    records = {}
    params = {}
    for line in lines:
        key, _, rest = line.partition(" ")
        if key == "param":
            try:
                name, dtype, shape_text = rest.split(" ")
                shape = _parse_shape(shape_text)
            except ValueError:
                raise FormatError(f"{path}: malformed param record {line!r}") from None
            if dtype != "float64":
                raise FormatError(f"{path}: unsupported dtype {dtype!r} for {name}")
            count = int(np.prod(shape)) if shape else 1
            if pos + 8 * count > len(raw):
                raise FormatError(f"{path}: truncated data for parameter {name}")
            params[name] = np.frombuffer(raw, "<f8", count, pos).astype(np.float64).reshape(shape)
            pos += 8 * count
        else:
            records[key] = rest
    if pos != len(raw):
        raise FormatError(f"{path}: {len(raw) - pos} trailing bytes after parameter data")
    version = records.get("format")
    if version != str(FORMAT_VERSION):
        raise FormatError(f"{path}: expected checkpoint format {FORMAT_VERSION}, found {version}")
    kind = records.get("kind")
    if kind not in KINDS:
        raise FormatError(f"{path}: unknown model kind {kind!r}")
    try:
        config = json.loads(records["config"])
        meta = json.loads(records.get("meta", "{}"))
    except (KeyError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad config/meta record ({exc})") from None
    ck = Checkpoint(kind, config, params, meta)
    if expect_kind is not None and kind != expect_kind:
        raise KindMismatchError(f"{path}: checkpoint holds a {kind} model, expected {expect_kind}")
    if expect_dim is not None and ck.dim != expect_dim:
        raise KindMismatchError(f"{path}: checkpoint is for {ck.dim}D inputs, expected {expect_dim}D")
    return ck
