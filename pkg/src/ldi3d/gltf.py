"""glTF 2.0 binary (.glb) export and a structural reader for validation.

Single buffer, one mesh primitive, one unlit textured material, embedded
JPEG.  Output bytes are a pure function of the inputs: the JSON chunk is
serialized with sorted keys and fixed separators, no timestamps.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .errors import InputError
from .mesh import TexturedMesh

_MAGIC = 0x46546C67  # 'glTF'
_JSON_CHUNK = 0x4E4F534A
_BIN_CHUNK = 0x004E4942

FLOAT = 5126
UNSIGNED_SHORT = 5123
UNSIGNED_INT = 5125


def _pad(data: bytes, align: int, fill: bytes) -> bytes:
    rem = len(data) % align
    if rem:
        data += fill * (align - rem)
    return data


def export_glb(mesh: TexturedMesh, texture_jpeg: bytes) -> bytes:
    """Serialize the textured mesh and its atlas JPEG into one .glb blob."""
    issues = mesh.validate()
    if issues:
        raise InputError("mesh invalid: " + "; ".join(issues))

    positions = np.ascontiguousarray(mesh.positions, dtype="<f4")
    uvs = np.ascontiguousarray(mesh.uvs, dtype="<f4")
    if len(positions) < 65536:
        indices = np.ascontiguousarray(mesh.triangles.reshape(-1),
                                       dtype="<u2")
        index_type = UNSIGNED_SHORT
    else:
        indices = np.ascontiguousarray(mesh.triangles.reshape(-1),
                                       dtype="<u4")
        index_type = UNSIGNED_INT

    blob = b""
    views = []

    def add_view(data: bytes, target: int | None = None) -> int:
        nonlocal blob
        blob = _pad(blob, 4, b"\x00")
        views.append({"buffer": 0, "byteOffset": len(blob),
                      "byteLength": len(data),
                      **({"target": target} if target else {})})
        blob += data
        return len(views) - 1

    v_pos = add_view(positions.tobytes(), target=34962)
    v_uv = add_view(uvs.tobytes(), target=34962)
    v_idx = add_view(indices.tobytes(), target=34963)
    v_img = add_view(texture_jpeg)
    blob = _pad(blob, 4, b"\x00")

    doc = {
        "asset": {"version": "2.0", "generator": "ldi3d"},
        "buffers": [{"byteLength": len(blob)}],
        "bufferViews": views,
        "accessors": [
            {"bufferView": v_pos, "componentType": FLOAT,
             "count": len(positions), "type": "VEC3",
             "min": [float(x) for x in positions.min(axis=0)],
             "max": [float(x) for x in positions.max(axis=0)]},
            {"bufferView": v_uv, "componentType": FLOAT,
             "count": len(uvs), "type": "VEC2"},
            {"bufferView": v_idx, "componentType": index_type,
             "count": int(indices.size), "type": "SCALAR"},
        ],
        "images": [{"bufferView": v_img, "mimeType": "image/jpeg"}],
        "samplers": [{"magFilter": 9729, "minFilter": 9987,
                      "wrapS": 33071, "wrapT": 33071}],
        "textures": [{"sampler": 0, "source": 0}],
        "materials": [{
            "pbrMetallicRoughness": {
                "baseColorTexture": {"index": 0},
                "metallicFactor": 0.0,
                "roughnessFactor": 1.0,
            },
            "doubleSided": True,
            "extensions": {"KHR_materials_unlit": {}},
        }],
        "extensionsUsed": ["KHR_materials_unlit"],
        "meshes": [{"primitives": [{
            "attributes": {"POSITION": 0, "TEXCOORD_0": 1},
            "indices": 2, "material": 0, "mode": 4,
        }]}],
        "nodes": [{"mesh": 0, "name": "photo"}],
        "scenes": [{"nodes": [0]}],
        "scene": 0,
    }

    json_bytes = _pad(json.dumps(doc, sort_keys=True,
                                 separators=(",", ":")).encode("utf-8"),
                      4, b" ")
    total = 12 + 8 + len(json_bytes) + 8 + len(blob)
    out = struct.pack("<III", _MAGIC, 2, total)
    out += struct.pack("<II", len(json_bytes), _JSON_CHUNK) + json_bytes
    out += struct.pack("<II", len(blob), _BIN_CHUNK) + blob
    return out


def parse_glb(data: bytes) -> tuple[dict, bytes]:
    """Split a .glb into its JSON document and binary chunk."""
    if len(data) < 12:
        raise InputError("glb too short")
    magic, version, total = struct.unpack_from("<III", data, 0)
    if magic != _MAGIC:
        raise InputError(f"bad glb magic 0x{magic:08x}")
    if version != 2:
        raise InputError(f"unsupported glb version {version}")
    if total != len(data):
        raise InputError(f"length field {total} != actual {len(data)}")
    off = 12
    doc = None
    blob = b""
    while off < len(data):
        clen, ctype = struct.unpack_from("<II", data, off)
        off += 8
        chunk = data[off:off + clen]
        off += clen
        if ctype == _JSON_CHUNK:
            doc = json.loads(chunk.decode("utf-8"))
        elif ctype == _BIN_CHUNK:
            blob = chunk
    if doc is None:
        raise InputError("glb has no JSON chunk")
    return doc, blob


def read_accessor(doc: dict, blob: bytes, index: int) -> np.ndarray:
    acc = doc["accessors"][index]
    view = doc["bufferViews"][acc["bufferView"]]
    dtype = {FLOAT: "<f4", UNSIGNED_SHORT: "<u2", UNSIGNED_INT: "<u4"}[
        acc["componentType"]]
    width = {"SCALAR": 1, "VEC2": 2, "VEC3": 3, "VEC4": 4}[acc["type"]]
    start = view.get("byteOffset", 0) + acc.get("byteOffset", 0)
    count = acc["count"] * width
    arr = np.frombuffer(blob, dtype=dtype, count=count, offset=start)
    return arr.reshape(acc["count"], width) if width > 1 else arr


def validate_glb(data: bytes) -> list[str]:
    """Structural checks: chunk alignment, accessor bounds, index ranges.

    Stands in for an external validation service; covers the failure modes
    a strict loader would reject.
    """
    issues: list[str] = []
    try:
        doc, blob = parse_glb(data)
    except InputError as e:
        return [str(e)]
    if len(blob) % 4:
        issues.append("binary chunk not 4-byte aligned")
    declared = doc.get("buffers", [{}])[0].get("byteLength", -1)
    if declared > len(blob):
        issues.append(f"buffer byteLength {declared} exceeds chunk {len(blob)}")
    for i, view in enumerate(doc.get("bufferViews", [])):
        end = view.get("byteOffset", 0) + view["byteLength"]
        if end > len(blob):
            issues.append(f"bufferView {i} overruns the binary chunk")
    for i, acc in enumerate(doc.get("accessors", [])):
        view = doc["bufferViews"][acc["bufferView"]]
        size = {FLOAT: 4, UNSIGNED_SHORT: 2, UNSIGNED_INT: 4}[acc["componentType"]]
        width = {"SCALAR": 1, "VEC2": 2, "VEC3": 3, "VEC4": 4}[acc["type"]]
        need = acc["count"] * size * width
        if acc.get("byteOffset", 0) + need > view["byteLength"]:
            issues.append(f"accessor {i} overruns its bufferView")
        if (view.get("byteOffset", 0) + acc.get("byteOffset", 0)) % size:
            issues.append(f"accessor {i} misaligned")
    for mesh in doc.get("meshes", []):
        for prim in mesh["primitives"]:
            pos = doc["accessors"][prim["attributes"]["POSITION"]]
            if "min" not in pos or "max" not in pos:
                issues.append("POSITION accessor missing min/max")
            if "indices" in prim:
                idx = read_accessor(doc, blob, prim["indices"])
                if idx.size and int(idx.max()) >= pos["count"]:
                    issues.append("index out of range")
    imgs = doc.get("images", [])
    for img in imgs:
        view = doc["bufferViews"][img["bufferView"]]
        head = blob[view.get("byteOffset", 0):view.get("byteOffset", 0) + 3]
        if img.get("mimeType") == "image/jpeg" and head != b"\xff\xd8\xff":
            issues.append("embedded image is not a JPEG stream")
    return issues
