from .capture import (CapturedSample, Dataset, assemble_input, capture_dataset,
                      capture_sample, load_dataset, read_manifest, render_sample,
                      scene_from_manifest)
from .core import Camera, Material, Scene, build_scene
from .render import GBufferFrame, render_coverage, render_gbuffer, shade
from .reproject import reproject
from .sampling import SamplingBudgetExhausted, sample_viewpoint_pair

__all__ = [
    "Camera", "CapturedSample", "Dataset", "GBufferFrame", "Material",
    "SamplingBudgetExhausted", "Scene", "assemble_input", "build_scene",
    "capture_dataset", "capture_sample", "load_dataset", "read_manifest",
    "render_coverage", "render_gbuffer", "render_sample", "reproject",
    "sample_viewpoint_pair", "scene_from_manifest", "shade",
]
