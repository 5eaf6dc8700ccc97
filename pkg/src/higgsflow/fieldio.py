"""HBF1 binary serialization for fields, metrics and bundle configurations.

Layout: 8-byte magic "HBF1\\0\\0\\0\\0", a 4-byte little-endian header length,
a JSON header (shape, rank, twist pattern, form type, geometry hash, plus
block data for configurations), then the payload(s): row-major cell-major
little-endian IEEE-754 double-precision complex values, real part before
imaginary part for every entry.  Reading back a written object reproduces it
bitwise.

The geometry hash ties a file to the grid it was produced on; reading against
a different geometry is refused rather than silently reinterpreted.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .bundle import BlockSpec, EndField, HiggsBundleConfig, build_config
from .errors import ValidationError
from .geometry import TorusGeometry, TwistPattern
from .metric import HermitianMetric

MAGIC = b"HBF1\x00\x00\x00\x00"


def geometry_hash(geometry: TorusGeometry) -> str:
    raw = struct.pack(
        "<dddq",
        geometry.tau.real,
        geometry.tau.imag,
        geometry.lam,
        geometry.n_grid,
    )
    return hashlib.sha256(raw).hexdigest()[:16]


def _payload_bytes(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype="<c16").tobytes()


def _payload_array(buf: bytes, shape) -> np.ndarray:
    return np.frombuffer(buf, dtype="<c16").reshape(shape).copy()


def write_field(path, obj, geometry: TorusGeometry) -> None:
    """Serialize an EndField, HermitianMetric or HiggsBundleConfig."""
    if isinstance(obj, EndField):
        header = {
            "kind": "EndField",
            "shape": list(obj.values.shape),
            "rank": obj.rank,
            "twist": obj.twist.entry_flux.tolist(),
            "form_type": obj.form_type,
        }
        payloads = [obj.values]
    elif isinstance(obj, HermitianMetric):
        header = {
            "kind": "HermitianMetric",
            "shape": list(obj.values.shape),
            "rank": obj.rank,
            "twist": None,
            "form_type": None,
        }
        payloads = [obj.values]
    elif isinstance(obj, HiggsBundleConfig):
        header = {
            "kind": "HiggsBundleConfig",
            "shape": list(obj.a.values.shape),
            "rank": obj.rank,
            "twist": obj.twist.entry_flux.tolist(),
            "form_type": None,
            "blocks": [[b.multiplicity, b.flux] for b in obj.blocks],
            "label": obj.label,
            "integrability_tol": obj.integrability_tol,
            "payloads": ["a", "phi"],
        }
        payloads = [obj.a.values, obj.phi.values]
    else:
        raise ValidationError(f"cannot serialize object of type {type(obj).__name__}")
    header["format"] = "HBF1"
    header["geometry_hash"] = geometry_hash(geometry)
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(head)))
        f.write(head)
        for p in payloads:
            f.write(_payload_bytes(p))


def read_field(path, geometry: TorusGeometry):
    """Deserialize; refuses magic or geometry-hash mismatches and truncation."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MAGIC:
        raise ValidationError(f"{path}: bad magic, not an HBF1 file")
    if len(blob) < 12:
        raise ValidationError(f"{path}: truncated header")
    (hlen,) = struct.unpack("<I", blob[8:12])
    head_end = 12 + hlen
    if len(blob) < head_end:
        raise ValidationError(f"{path}: truncated header")
    header = json.loads(blob[12:head_end].decode())
    if header.get("format") != "HBF1":
        raise ValidationError(f"{path}: unknown format field")
    want_hash = geometry_hash(geometry)
    if header.get("geometry_hash") != want_hash:
        raise ValidationError(
            f"{path}: geometry hash {header.get('geometry_hash')} does not match "
            f"target geometry {want_hash}"
        )
    shape = tuple(header["shape"])
    n_payloads = 2 if header["kind"] == "HiggsBundleConfig" else 1
    need = int(np.prod(shape)) * 16
    body = blob[head_end:]
    if len(body) != n_payloads * need:
        raise ValidationError(
            f"{path}: payload holds {len(body)} bytes, expected {n_payloads * need}"
        )
    kind = header["kind"]
    if kind == "EndField":
        twist = TwistPattern(np.asarray(header["twist"], dtype=int))
        return EndField(_payload_array(body, shape), twist, header["form_type"])
    if kind == "HermitianMetric":
        return HermitianMetric(_payload_array(body, shape))
    if kind == "HiggsBundleConfig":
        from .bundle import DZ, DZBAR

        twist = TwistPattern(np.asarray(header["twist"], dtype=int))
        a = EndField(_payload_array(body[:need], shape), twist, DZBAR)
        phi = EndField(_payload_array(body[need:], shape), twist, DZ)
        blocks = tuple(BlockSpec(m, d) for m, d in header["blocks"])
        return build_config(
            geometry,
            blocks,
            a,
            phi,
            label=header.get("label", ""),
            integrability_tol=float(header.get("integrability_tol", 1e-6)),
        )
    raise ValidationError(f"{path}: unknown object kind '{kind}'")
