import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def write_pgm_p5(path, arr):
    arr = np.asarray(arr, dtype=np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(arr.tobytes())


def write_pgm_p2(path, arr, maxval=255):
    arr = np.asarray(arr, dtype=np.int64)
    h, w = arr.shape
    body = "\n".join(" ".join(str(v) for v in row) for row in arr)
    with open(path, "w") as fh:
        fh.write(f"P2\n# comment\n{w} {h}\n{maxval}\n{body}\n")


def constant_image(n, value):
    return np.full((n, n), value, dtype=np.uint8)


def checkerboard(n, period, lo=60, hi=200):
    idx = (np.indices((n, n)) // period).sum(axis=0) % 2
    return np.where(idx == 0, lo, hi).astype(np.uint8)


def noise_image(n, seed):
    return np.random.default_rng(seed).integers(0, 256, size=(n, n), dtype=np.int64).astype(np.uint8)
