"""U-Net executor over the graph operators, with externally loaded weights.

The network is data-driven: an ordered layer list (partial conv, pointwise
nonlinearity, folded normalization, nearest upscale, skip concat) with
weights resolved by name from a binary weight store.  The same spec runs
both on LDI tensors and on plain image tensors; the image path is the
reference the graph path must reproduce on single-layer input.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, NumericError, WeightLoadError
from .graph_unet import (
    IndexGrid,
    KernelSpec,
    LdiTensor,
    ScaleMap,
    conv2d_partial,
    ldi_downscale,
    ldi_partial_conv,
    ldi_upscale,
    upscale2d,
)
from .ldi import Ldi

_MAGIC = b"LDIWGT1\x00"


def save_weights(path: str | Path, weights: dict[str, np.ndarray]) -> None:
    """Write a weight store: little-endian, header then named float32 blobs."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(weights)))
        for name, arr in weights.items():
            arr = np.ascontiguousarray(arr, dtype=np.float32)
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.astype("<f4").tobytes())


def load_weights(path: str | Path) -> dict[str, np.ndarray]:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise WeightLoadError(f"cannot read weight file {path}: {e}") from e
    if blob[:8] != _MAGIC:
        raise WeightLoadError(f"{path}: bad magic {blob[:8]!r}")
    off = 8

    def take(fmt: str):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(blob):
            raise WeightLoadError(f"{path}: truncated weight file")
        vals = struct.unpack_from(fmt, blob, off)
        off += size
        return vals

    (count,) = take("<I")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = take("<I")
        name = blob[off:off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = take("<I")
        shape = take(f"<{ndim}I")
        n = int(np.prod(shape)) if ndim else 1
        if off + 4 * n > len(blob):
            raise WeightLoadError(f"{path}: truncated data for {name!r}")
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=off).reshape(shape)
        off += 4 * n
        out[name] = arr.astype(np.float32)
    return out


@dataclass(frozen=True)
class LayerSpec:
    """One executor step.  ``op`` is one of:

    pconv (name, kernel, stride, in_channels, out_channels), relu,
    leaky_relu (alpha), affine (name: folded scale/shift), upscale,
    concat (tag), save (tag).
    """

    op: str
    name: str = ""
    kernel: int = 3
    stride: int = 1
    in_channels: int = 0
    out_channels: int = 0
    alpha: float = 0.2
    tag: str = ""

    def to_dict(self) -> dict:
        d = {"op": self.op}
        if self.op == "pconv":
            d.update(name=self.name, kernel=self.kernel, stride=self.stride,
                     in_channels=self.in_channels, out_channels=self.out_channels)
        elif self.op == "leaky_relu":
            d.update(alpha=self.alpha)
        elif self.op == "affine":
            d.update(name=self.name)
        elif self.op in ("concat", "save"):
            d.update(tag=self.tag)
        return d


@dataclass
class NetworkSpec:
    """Ordered layers; downscales (stride-2 convs) must pair with upscales."""

    layers: list[LayerSpec]
    in_channels: int = 3

    def validate(self) -> None:
        depth = 0
        for i, layer in enumerate(self.layers):
            if layer.op == "pconv" and layer.stride == 2:
                depth += 1
            elif layer.op == "upscale":
                depth -= 1
                if depth < 0:
                    raise InputError(f"layer {i}: upscale without a matching "
                                     "downscale")
        if depth != 0:
            raise InputError(f"{depth} downscale(s) without a matching upscale")

    def required_weights(self) -> dict[str, tuple]:
        req: dict[str, tuple] = {}
        for layer in self.layers:
            if layer.op == "pconv":
                req[layer.name + ".weight"] = (layer.out_channels,
                                               layer.in_channels,
                                               layer.kernel, layer.kernel)
                req[layer.name + ".bias"] = (layer.out_channels,)
            elif layer.op == "affine":
                req[layer.name + ".scale"] = None  # (C,) checked at run time
                req[layer.name + ".shift"] = None
        return req

    def to_json(self) -> str:
        return json.dumps({"in_channels": self.in_channels,
                           "layers": [l.to_dict() for l in self.layers]},
                          indent=2)

    @classmethod
    def from_json(cls, text: str) -> "NetworkSpec":
        doc = json.loads(text)
        return cls([LayerSpec(**d) for d in doc["layers"]],
                   in_channels=doc.get("in_channels", 3))


def build_inpaint_unet(in_channels: int = 3,
                       widths: tuple[int, ...] = (32, 64, 128, 128, 128),
                       kernels: tuple[int, ...] = (7, 5, 5, 3, 3)) -> NetworkSpec:
    """Encoder-decoder with the stated number of downsampling stages.

    Widths are free parameters; any channel plan can be expressed by
    constructing the spec directly.
    """
    if len(kernels) != len(widths):
        raise InputError("widths and kernels must have equal length")
    layers: list[LayerSpec] = [LayerSpec("save", tag="in")]
    prev = in_channels
    for i, (wdt, k) in enumerate(zip(widths, kernels)):
        layers.append(LayerSpec("pconv", name=f"enc{i + 1}", kernel=k, stride=2,
                                in_channels=prev, out_channels=wdt))
        layers.append(LayerSpec("relu"))
        if i < len(widths) - 1:
            layers.append(LayerSpec("save", tag=f"e{i + 1}"))
        prev = wdt
    for i in range(len(widths) - 1, 0, -1):
        skip = widths[i - 1]
        layers.append(LayerSpec("upscale"))
        layers.append(LayerSpec("concat", tag=f"e{i}"))
        layers.append(LayerSpec("pconv", name=f"dec{i + 1}", kernel=3, stride=1,
                                in_channels=prev + skip, out_channels=skip))
        layers.append(LayerSpec("leaky_relu", alpha=0.2))
        prev = skip
    layers.append(LayerSpec("upscale"))
    layers.append(LayerSpec("concat", tag="in"))
    layers.append(LayerSpec("pconv", name="out", kernel=3, stride=1,
                            in_channels=prev + in_channels, out_channels=3))
    return NetworkSpec(layers, in_channels=in_channels)


def random_weights(net: NetworkSpec, seed: int = 0) -> dict[str, np.ndarray]:
    """He-style random weights for tests and demos."""
    rng = np.random.default_rng(seed)
    out: dict[str, np.ndarray] = {}
    for layer in net.layers:
        if layer.op == "pconv":
            fan_in = layer.in_channels * layer.kernel * layer.kernel
            out[layer.name + ".weight"] = rng.normal(
                0.0, 1.0 / np.sqrt(fan_in),
                (layer.out_channels, layer.in_channels, layer.kernel,
                 layer.kernel)).astype(np.float32)
            out[layer.name + ".bias"] = rng.normal(
                0.0, 0.02, layer.out_channels).astype(np.float32)
        elif layer.op == "affine":
            pass  # sized by the caller; not produced by the builder
    return out


def _check_weights(net: NetworkSpec, weights: dict[str, np.ndarray]) -> None:
    for name, shape in net.required_weights().items():
        if name not in weights:
            raise WeightLoadError(f"missing weight {name!r}")
        if shape is not None and tuple(weights[name].shape) != shape:
            raise WeightLoadError(
                f"weight {name!r} has shape {weights[name].shape}, "
                f"expected {shape}")


def _kernel_spec(layer: LayerSpec, weights: dict[str, np.ndarray]) -> KernelSpec:
    return KernelSpec(layer.kernel, layer.stride, layer.in_channels,
                      layer.out_channels, weights[layer.name + ".weight"],
                      weights[layer.name + ".bias"])


def run_unet(ldi_values: LdiTensor, inpaint_mask: LdiTensor, net: NetworkSpec,
             weights: dict[str, np.ndarray]) -> LdiTensor:
    """Execute the network on an LDI; output lives on the finest grid.

    ``inpaint_mask`` is 1 where the input is known.  Raises NumericError
    (with the layer index) if activations go non-finite.
    """
    net.validate()
    _check_weights(net, weights)
    x, m = ldi_values, inpaint_mask
    saved: dict[str, tuple[LdiTensor, LdiTensor]] = {}
    stack: list[ScaleMap] = []
    for i, layer in enumerate(net.layers):
        if layer.op == "pconv":
            smap = None
            if layer.stride == 2:
                smap = ldi_downscale(x.grid)
                stack.append(smap)
            x, m = ldi_partial_conv(x, m, _kernel_spec(layer, weights), smap)
        elif layer.op == "relu":
            x = LdiTensor(np.maximum(x.values, 0.0), x.grid)
        elif layer.op == "leaky_relu":
            v = x.values
            x = LdiTensor(np.where(v >= 0, v, layer.alpha * v), x.grid)
        elif layer.op == "affine":
            scale = weights[layer.name + ".scale"][:, None]
            shift = weights[layer.name + ".shift"][:, None]
            x = LdiTensor(x.values * scale + shift, x.grid)
        elif layer.op == "upscale":
            smap = stack.pop()
            x = ldi_upscale(x, smap)
            m = ldi_upscale(m, smap)
        elif layer.op == "concat":
            sx, sm = saved[layer.tag]
            x = LdiTensor(np.concatenate([x.values, sx.values], axis=0), x.grid)
            m = LdiTensor(np.maximum(m.values, sm.values), x.grid)
        elif layer.op == "save":
            saved[layer.tag] = (x, m)
        else:
            raise InputError(f"unknown layer op {layer.op!r}")
        if not np.all(np.isfinite(x.values)):
            raise NumericError(f"non-finite activations after layer {i} "
                               f"({layer.op})")
    return x


def run_unet_2d(image: np.ndarray, mask: np.ndarray, net: NetworkSpec,
                weights: dict[str, np.ndarray]) -> np.ndarray:
    """Reference executor on plain image tensors: (C, H, W) + (H, W) mask."""
    net.validate()
    _check_weights(net, weights)
    x = np.asarray(image, dtype=np.float32)
    m = np.asarray(mask, dtype=np.float32)
    saved: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    sizes: list[tuple[int, int]] = []
    for i, layer in enumerate(net.layers):
        if layer.op == "pconv":
            if layer.stride == 2:
                sizes.append(x.shape[1:])
            x, m = conv2d_partial(x, m, _kernel_spec(layer, weights))
        elif layer.op == "relu":
            x = np.maximum(x, 0.0)
        elif layer.op == "leaky_relu":
            x = np.where(x >= 0, x, layer.alpha * x).astype(np.float32)
        elif layer.op == "affine":
            x = (x * weights[layer.name + ".scale"][:, None, None]
                 + weights[layer.name + ".shift"][:, None, None])
        elif layer.op == "upscale":
            h, w = sizes.pop()
            x = upscale2d(x, h, w)
            m = upscale2d(m[None], h, w)[0]
        elif layer.op == "concat":
            sx, sm = saved[layer.tag]
            x = np.concatenate([x, sx], axis=0)
            m = np.maximum(m, sm)
        elif layer.op == "save":
            saved[layer.tag] = (x, m)
        else:
            raise InputError(f"unknown layer op {layer.op!r}")
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite activations after layer {i} "
                               f"({layer.op})")
    return x


def ldi_selftest(seed: int = 0, trials: int = 5, verbose: bool = True) -> bool:
    """Graph-vs-image equivalence smoke check on random fully connected LDIs."""
    from .graph_unet import gather_all  # noqa: F401  (warm path)
    rng = np.random.default_rng(seed)
    ok = True
    for t in range(trials):
        h = int(rng.integers(12, 33))
        w = int(rng.integers(12, 33))
        grid = IndexGrid.full_grid(w, h)
        img = rng.random((3, h, w)).astype(np.float32)
        mask = (rng.random((h, w)) > 0.3).astype(np.float32)
        net = build_inpaint_unet(3, widths=(8, 12, 16), kernels=(7, 5, 3))
        weights = random_weights(net, seed=seed + t)
        y2d = run_unet_2d(img, mask, net, weights)
        x = LdiTensor(img.reshape(3, -1), grid)
        m = LdiTensor(mask.reshape(1, -1), grid)
        yg = run_unet(x, m, net, weights)
        err = float(np.abs(yg.values.reshape(y2d.shape) - y2d).max())
        good = err <= 1e-4
        ok &= good
        if verbose:
            print(f"selftest {t}: {w}x{h} max|Δ|={err:.2e} "
                  f"{'ok' if good else 'FAIL'}")
    return ok
