from src.generator.corpus import build_corpus, generate_corpus
from src.generator.rng import Xoshiro256StarStar
from src.generator.templates import draw_trajectory, generate_trajectory

__all__ = [
    "Xoshiro256StarStar",
    "build_corpus",
    "draw_trajectory",
    "generate_corpus",
    "generate_trajectory",
]
