import numpy as np
import pytest

from clickcrop.synthetic import random_scene


@pytest.fixture
def small_scene():
    """A compact object on a small frame; fast enough for per-test pipelines."""
    return random_scene(np.random.default_rng(1234), kind="blob", size_range=(120, 160), min_pixels=400)


def flood_fill_labels(mask, connectivity):
    """Independent labeling oracle: plain stack-based flood fill, first-touch order."""
    h, w = mask.shape
    if connectivity == 8:
        offs = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
    else:
        offs = ((-1, 0), (1, 0), (0, -1), (0, 1))
    vals = mask.tolist()
    labels = [[0] * w for _ in range(h)]
    nxt = 0
    for y in range(h):
        for x in range(w):
            if vals[y][x] and labels[y][x] == 0:
                nxt += 1
                labels[y][x] = nxt
                stack = [(y, x)]
                while stack:
                    cy, cx = stack.pop()
                    for dy, dx in offs:
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and vals[ny][nx] and labels[ny][nx] == 0:
                            labels[ny][nx] = nxt
                            stack.append((ny, nx))
    return np.array(labels, dtype=np.int32), nxt


def edt_brute(mask):
    """Independent distance oracle: min distance over every false pixel of the padded grid."""
    padded = np.pad(np.asarray(mask, bool), 1, constant_values=False)
    fy, fx = np.nonzero(~padded)
    out = np.zeros(mask.shape, dtype=np.float64)
    ty, tx = np.nonzero(mask)
    if len(ty):
        d2 = (ty[:, None] + 1 - fy[None, :]) ** 2 + (tx[:, None] + 1 - fx[None, :]) ** 2
        out[ty, tx] = np.sqrt(d2.min(axis=1))
    return out
