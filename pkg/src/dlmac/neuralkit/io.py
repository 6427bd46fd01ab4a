"""Model files.

Layout: ``MAGIC`` | u32 header length | JSON header | float64 LE payload |
SHA-256 of everything before it.  The header describes the layers, the input
shape, class values, normalization range and the shape of each weight array
in payload order.
"""
import hashlib
import json
import struct

import numpy as np

from ..errors import ChecksumError, SchemaError
from .layers import layer_from_spec
from .model import NeuralModel

MAGIC = b"DLMACNN1"
_DIGEST = 32


def model_bytes(model: NeuralModel) -> bytes:
    arrays, shapes = [], []
    for k, p in enumerate(model.params):
        for name in model.layers[k].param_names:
            arrays.append(np.ascontiguousarray(p[name], dtype="<f8"))
            shapes.append({"layer": k, "name": name, "shape": list(p[name].shape)})
    header = {
        "version": 1,
        "task": model.task,
        "architecture": model.architecture(),
        "input_shape": list(model.input_shape),
        "class_values": list(model.class_values),
        "norm": None if model.norm is None else [float(v) for v in model.norm],
        "weights": shapes,
        "meta": model.meta,
    }
    head = json.dumps(header, sort_keys=True).encode()
    body = MAGIC + struct.pack("<I", len(head)) + head + b"".join(a.tobytes() for a in arrays)
    return body + hashlib.sha256(body).digest()


def save_model(model: NeuralModel, path):
    data = model_bytes(model)
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def model_checksum(model: NeuralModel):
    return hashlib.sha256(model_bytes(model)).hexdigest()


def _check_expectation(header, expect_task, expect_input_shape, expect_classes):
    if expect_task is not None and header["task"] != expect_task:
        raise SchemaError(f"model was built for task {header['task']!r}, not {expect_task!r}")
    if expect_input_shape is not None and tuple(header["input_shape"]) != tuple(expect_input_shape):
        raise SchemaError(
            f"model input shape {tuple(header['input_shape'])} != {tuple(expect_input_shape)}")
    if expect_classes is not None and tuple(header["class_values"]) != tuple(expect_classes):
        raise SchemaError(
            f"model classes {tuple(header['class_values'])} != {tuple(expect_classes)}")


def load_model(path, expect_task=None, expect_input_shape=None, expect_classes=None):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 4 + _DIGEST or not data.startswith(MAGIC):
        raise ChecksumError(f"{path}: not a model file or truncated")
    body, digest = data[:-_DIGEST], data[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch (truncated or corrupted)")
    (hlen,) = struct.unpack_from("<I", body, len(MAGIC))
    start = len(MAGIC) + 4
    try:
        header = json.loads(body[start:start + hlen])
    except ValueError:
        raise SchemaError(f"{path}: unreadable header") from None
    _check_expectation(header, expect_task, expect_input_shape, expect_classes)
    layers = [layer_from_spec(s) for s in header["architecture"] if s["kind"] != "softmax"]
    params = [{} for _ in layers]
    offset = start + hlen
    for w in header["weights"]:
        n = int(np.prod(w["shape"])) if w["shape"] else 1
        arr = np.frombuffer(body, dtype="<f8", count=n, offset=offset).reshape(w["shape"])
        params[w["layer"]][w["name"]] = arr.astype(np.float64)
        offset += 8 * n
    if offset != len(body):
        raise SchemaError(f"{path}: payload size disagrees with the header")
    norm = None if header["norm"] is None else tuple(header["norm"])
    return NeuralModel(layers, params, tuple(header["input_shape"]),
                       tuple(header["class_values"]), header["task"], norm, header["meta"])
