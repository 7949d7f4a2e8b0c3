"""Image and model persistence.

Images are stored in a flat little-endian container: a 32-byte header
(magic ``b"CFIM"``, format version, height, width, channel count) followed by
float64 samples in (channel, row, column) order. 8- and 16-bit portable
graymaps (PGM, binary or ASCII) can be imported as well.

Models are JSON documents in which every float array is stored with its shape
and its values as C99 hexadecimal float literals, so a save/load round trip
is bit-exact and the file stays diffable.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .mcgsm import McgsmParams
from .multiscale import Level, MultiscaleModel
from .neighborhoods import NeighborhoodMask

__all__ = [
    "save_image",
    "load_image",
    "read_pgm",
    "write_pgm",
    "load_corpus",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
]

IMAGE_MAGIC = b"CFIM"
IMAGE_VERSION = 1
_HEADER = struct.Struct("<4sIQQI4x")
MODEL_FORMAT = "causalfield-model"
MODEL_VERSION = 1


def save_image(path, image):
    arr = np.asarray(image, dtype="<f8")
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise FormatError("images must be 2-D or (channels, H, W)")
    C, H, W = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(IMAGE_MAGIC, IMAGE_VERSION, H, W, C))
        fh.write(np.ascontiguousarray(arr).tobytes())


def load_image(path):
    """Load a container image (2-D if single-channel) or a PGM file."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] in (b"P5", b"P2"):
        return read_pgm(path)
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: file too short")
    magic, version, H, W, C = _HEADER.unpack_from(data)
    if magic != IMAGE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != IMAGE_VERSION:
        raise FormatError(f"{path}: unsupported image version {version}")
    n = C * H * W
    if len(data) != _HEADER.size + 8 * n:
        raise FormatError(f"{path}: expected {n} samples")
    arr = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(C, H, W).astype(float)
    return arr[0] if C == 1 else arr


def _pgm_tokens(data):
    tokens, i = [], 2
    while len(tokens) < 3:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        tokens.append(int(data[i:j]))
        i = j
    return tokens, i + 1


def read_pgm(path, log_transform=False):
    """Read an 8- or 16-bit PGM; optionally return ``log(1 + value)``."""
    data = Path(path).read_bytes()
    kind = data[:2]
    if kind not in (b"P5", b"P2"):
        raise FormatError(f"{path}: not a PGM file")
    try:
        (W, H, maxval), start = _pgm_tokens(data)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if kind == b"P5":
        dtype = ">u2" if maxval > 255 else "u1"
        arr = np.frombuffer(data, dtype=dtype, count=H * W, offset=start).reshape(H, W)
    else:
        arr = np.array(data[start:].split(), dtype=int)[: H * W].reshape(H, W)
    arr = arr.astype(float)
    return np.log1p(arr) if log_transform else arr


def write_pgm(path, image, maxval=65535):
    img = np.asarray(image, dtype=float)
    lo, hi = img.min(), img.max()
    scaled = np.round((img - lo) / (hi - lo if hi > lo else 1.0) * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    H, W = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{W} {H}\n{maxval}\n".encode())
        fh.write(scaled.astype(dtype).tobytes())


def load_corpus(path, log_transform=False):
    """Load all images in a directory (sorted by name) or a single file.

    ``log_transform`` applies ``log(1 + value)`` to PGM imports.
    """
    path = Path(path)
    files = sorted(p for p in path.iterdir() if p.suffix in (".cfim", ".pgm")) if path.is_dir() else [path]
    if not files:
        raise FormatError(f"{path}: no .cfim or .pgm images")
    out = []
    for f in files:
        img = read_pgm(f, log_transform) if f.suffix == ".pgm" else load_image(f)
        out.append(img)
    return out


def _encode(arr):
    arr = np.asarray(arr, dtype=float)
    return {"shape": list(arr.shape), "hex": [float(v).hex() for v in arr.ravel()]}


def _decode(obj):
    shape = tuple(obj["shape"])
    vals = np.array([float.fromhex(v) for v in obj["hex"]], dtype=float)
    if vals.size != int(np.prod(shape)):
        raise FormatError(f"array declares shape {shape} but holds {vals.size} values")
    return vals.reshape(shape)


def _params_to_dict(p):
    return {
        "components": p.n_components,
        "scales": p.n_scales,
        "dim_in": p.dim_in,
        "dim_out": p.dim_out,
        "chol_K": _encode(p.chol_K),
        "chol_M": _encode(p.chol_M),
        "A": _encode(p.A),
        "log_lambda": _encode(p.log_lambda),
        "input_mean": _encode(p.input_mean),
        "output_mean": _encode(p.output_mean),
        "output_std": None if p.output_std is None else float(p.output_std).hex(),
    }


def _params_from_dict(d):
    std = d.get("output_std")
    p = McgsmParams(_decode(d["chol_K"]), _decode(d["chol_M"]), _decode(d["A"]),
                    _decode(d["log_lambda"]), _decode(d["input_mean"]), _decode(d["output_mean"]),
                    None if std is None else float.fromhex(std))
    if (p.n_components, p.n_scales, p.dim_in, p.dim_out) != (
            d["components"], d["scales"], d["dim_in"], d["dim_out"]):
        raise FormatError("declared model dimensions do not match the arrays")
    return p


def model_to_dict(model):
    levels = [model.coarse] + list(model.details)
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "levels": model.levels,
        "haar_normalization": "orthonormal",
        "scales": [
            {"level": m, "mask": lv.mask.to_dict(), "params": _params_to_dict(lv.params)}
            for m, lv in enumerate(levels)
        ],
        "meta": model.meta,
    }


def model_from_dict(d):
    if d.get("format") != MODEL_FORMAT:
        raise FormatError("not a causalfield model file")
    if d.get("version") != MODEL_VERSION:
        raise FormatError(f"unsupported model version {d.get('version')}")
    levels = [Level(_params_from_dict(s["params"]), NeighborhoodMask.from_dict(s["mask"]))
              for s in sorted(d["scales"], key=lambda s: s["level"])]
    if len(levels) != d["levels"] + 1:
        raise FormatError("level count does not match the stored scales")
    return MultiscaleModel(levels[0], levels[1:], d.get("meta", {}))


def save_model(path, model):
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1))


def load_model(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON") from exc
    return model_from_dict(d)
