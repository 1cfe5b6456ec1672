"""Feature extraction companion for the eood detection engine."""

from .extract import extract, extract_with_jigsaw, list_images, load_image_tensor
from .models import TapRecorder, WideResNet28, build_model, resolve_module
from .plans import ExtractionPlan, builtin_plan_names, load_plan
from .wire import read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "ExtractionPlan",
    "TapRecorder",
    "WideResNet28",
    "build_model",
    "builtin_plan_names",
    "extract",
    "extract_with_jigsaw",
    "list_images",
    "load_image_tensor",
    "load_plan",
    "read_tensor",
    "resolve_module",
    "write_tensor",
]
