"""Helpers for the plots tests: fixture paths and perceptual hashing."""

import os

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture(name: str) -> str:
    return os.path.join(FIXTURES, name)


def average_hash(png_path: str, grid: int = 8) -> int:
    """64-bit average hash of an image: block-mean grayscale thresholded at its mean."""
    import matplotlib.pyplot as plt

    img = plt.imread(png_path)
    gray = img[..., :3].mean(axis=-1) if img.ndim == 3 else img
    h, w = gray.shape
    bh, bw = h // grid, w // grid
    blocks = gray[: bh * grid, : bw * grid].reshape(grid, bh, grid, bw).mean(axis=(1, 3))
    bits = (blocks > blocks.mean()).ravel()
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def hamming(a: int, b: int) -> int:
    return bin(a ^ b).count("1")
