from src.detectors.hybrid import detect_hybrid
from src.detectors.semantic import cosine, detect_cdsa, sibling_pairs
from src.detectors.structural import (
    detect_cdcs,
    detect_cddag,
    enumerate_subsequences,
    weight_stats,
)

__all__ = [
    "cosine",
    "detect_cddag",
    "detect_cdcs",
    "detect_cdsa",
    "detect_hybrid",
    "enumerate_subsequences",
    "sibling_pairs",
    "weight_stats",
]
