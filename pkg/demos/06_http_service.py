"""Exercise the HTTP facade end to end, in process.

Uploads an image (plus ground truth so the oracle backend can be used),
places clicks over the wire, fetches the PNG mask back, and shows the
updated-region contract that lets a client redraw only what changed.
"""
import numpy as np
from fastapi.testclient import TestClient

from clickcrop.maskio import decode_mask_png, encode_image_png, encode_mask_png
from clickcrop.raster import iou
from clickcrop.service import create_app
from clickcrop.synthetic import random_scene

image, gt = random_scene(np.random.default_rng(31), kind="blob")
client = TestClient(create_app())

r = client.post(
    "/sessions",
    files={
        "image": ("scene.png", encode_image_png(image), "image/png"),
        "gt_mask": ("gt.png", encode_mask_png(gt), "image/png"),
    },
    params={"backend": "oracle", "series": "s2"},
)
session = r.json()
print(f"created session {session['id'][:8]}… ({session['width']}x{session['height']})")

ys, xs = np.nonzero(gt)
r = client.post(
    f"/sessions/{session['id']}/clicks",
    json={"x": int(xs.mean()), "y": int(ys.mean()), "polarity": "positive"},
)
body = r.json()
print(f"click 1 -> updated_region {body['updated_region']}, IOU {body['iou']:.4f}")
print(f"stage timings: { {k: round(v, 1) for k, v in body['timings_ms'].items()} } ms")

mask = decode_mask_png(client.get(f"/sessions/{session['id']}/mask").content)
print(f"fetched mask, IOU vs ground truth: {iou(mask, gt):.4f}")

client.post(f"/sessions/{session['id']}/undo")
mask = decode_mask_png(client.get(f"/sessions/{session['id']}/mask").content)
print(f"after undo the mask is empty again: {not mask.any()}")

print("\nrun the real server with:  clickcrop serve --backend oracle --port 8000")
print("then open the browser UI:  clickcrop serve --frontend frontend/dist")
