"""Pipeline configuration: one JSON-serializable bag of every knob."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

from .errors import InputError


@dataclass
class PipelineConfig:
    step_threshold: float = 0.05     # disparity gap that defines an edge
    median_kernel: int = 5
    median_sigma: float = 0.2
    min_component: int = 20
    expand_iterations: int = 50
    min_curve_length: int = 20
    edge_margin: int = 3
    max_chart_size: int = 256
    edge_exclusion: int = 4
    pad_width: int = 4
    simplify_eps: float = 1.5
    stud_spacing: float = 16.0
    fov_deg: float = 60.0
    near_disp: float = 0.01
    jpeg_quality: int = 90
    inpainter: str = "diffusion"     # diffusion | neural
    weights_path: str | None = None
    diffusion_iterations: int = 2000
    diffusion_tol: float = 1e-4

    def __post_init__(self):
        if not (0.0 < self.step_threshold < 1.0):
            raise InputError("step_threshold must lie in (0, 1)")
        if self.median_kernel % 2 != 1 or self.median_kernel < 1:
            raise InputError("median_kernel must be odd")
        if self.median_sigma <= 0:
            raise InputError("median_sigma must be positive")
        if self.min_component < 1:
            raise InputError("min_component must be >= 1")
        if self.expand_iterations < 0:
            raise InputError("expand_iterations must be >= 0")
        if not (10.0 < self.fov_deg < 120.0):
            raise InputError("fov_deg must lie in (10, 120)")
        if self.near_disp <= 0:
            raise InputError("near_disp must be positive")
        if not (1 <= self.jpeg_quality <= 100):
            raise InputError("jpeg_quality must lie in [1, 100]")
        if self.inpainter not in ("diffusion", "neural"):
            raise InputError(f"unknown inpainter {self.inpainter!r}")
        if self.inpainter == "neural" and not self.weights_path:
            raise InputError("neural inpainter needs weights_path")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise InputError(f"bad config JSON: {e}") from e
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)
