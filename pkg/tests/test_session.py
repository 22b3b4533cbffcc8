import numpy as np
import pytest

from clickcrop.backends import ConstantBackend, NoisyOracleBackend, OracleBackend
from clickcrop.raster import BBox, Click, bbox_of, connected_components, iou, xor_diff
from clickcrop.session import PROGRESSIVE_AFTER_CLICKS, Session, merge_masks
from clickcrop.synthetic import random_scene


def _scene(seed=0, **kw):
    kw.setdefault("kind", "blob")
    kw.setdefault("size_range", (120, 160))
    kw.setdefault("min_pixels", 400)
    return random_scene(np.random.default_rng(seed), **kw)


class TestMergeMasks:
    def test_identical_masks_noop(self):
        m = np.random.default_rng(0).random((20, 20)) < 0.3
        merged, region = merge_masks(m, m, Click(True, 5, 5, 1), progressive=True)
        assert np.array_equal(merged, m)
        assert region is None

    def test_progressive_updates_only_clicked_component(self):
        prev = np.zeros((30, 30), bool)
        pred = prev.copy()
        pred[2:8, 2:8] = True     # component A
        pred[20:26, 20:26] = True  # component B
        merged, region = merge_masks(prev, pred, Click(True, 4, 4, 1), progressive=True)
        assert merged[2:8, 2:8].all()
        assert not merged[20:26, 20:26].any()
        assert region == BBox(2, 2, 8, 8)

    def test_non_progressive_takes_prediction(self):
        prev = np.zeros((30, 30), bool)
        pred = prev.copy()
        pred[2:8, 2:8] = True
        pred[20:26, 20:26] = True
        merged, region = merge_masks(prev, pred, Click(True, 4, 4, 1), progressive=False)
        assert np.array_equal(merged, pred)
        assert region == bbox_of(xor_diff(prev, pred))

    def test_click_outside_diff_updates_nearest(self):
        prev = np.zeros((30, 30), bool)
        pred = prev.copy()
        pred[2:6, 2:6] = True
        pred[20:28, 20:28] = True
        # click at (10, 10): nearest diff pixel belongs to the small component
        merged, region = merge_masks(prev, pred, Click(True, 10, 10, 1), progressive=True)
        assert merged[2:6, 2:6].all()
        assert not merged[20:28, 20:28].any()

    def test_empty_diff_click_anywhere_noop(self):
        prev = np.ones((10, 10), bool)
        merged, region = merge_masks(prev, prev.copy(), Click(False, 0, 0, 1), progressive=True)
        assert np.array_equal(merged, prev) and region is None


class TestSessionLifecycle:
    def test_new_session_defaults(self):
        img, gt = _scene(1)
        s = Session(img, backend=ConstantBackend())
        assert not s.mask.any()
        assert not s.progressive_active
        assert s.clicks == []

    def test_initial_mask_activates_progressive(self):
        img, gt = _scene(2)
        s = Session(img, initial_mask=gt, backend=ConstantBackend())
        assert s.progressive_active
        assert np.array_equal(s.mask, gt)

    def test_initial_mask_dim_mismatch(self):
        img, _ = _scene(3)
        with pytest.raises(ValueError):
            Session(img, initial_mask=np.zeros((2, 2), bool), backend=ConstantBackend())

    def test_undo_fresh_session_errors(self):
        img, _ = _scene(4)
        s = Session(img, backend=ConstantBackend())
        with pytest.raises(IndexError):
            s.undo()

    def test_click_out_of_bounds(self):
        img, gt = _scene(5)
        s = Session(img, backend=OracleBackend(gt))
        with pytest.raises(ValueError):
            s.add_click(10_000, 3, True)

    def test_requires_backend(self):
        img, _ = _scene(6)
        with pytest.raises(ValueError):
            Session(img)


class TestAddClick:
    def test_oracle_first_click_recovers_object(self):
        img, gt = _scene(7)
        s = Session(img, backend=OracleBackend(gt))
        ys, xs = np.nonzero(gt)
        s.add_click(int(xs.mean()), int(ys.mean()), True)
        assert iou(s.mask, gt) >= 0.99

    def test_negative_click_removes_blob_locally(self):
        img, gt = _scene(8)
        blob = np.zeros_like(gt)
        blob[5:15, 5:15] = True
        init = gt | blob
        s = Session(img, initial_mask=init, backend=OracleBackend(gt))
        res = s.add_click(10, 10, False)
        after = s.mask
        assert not after[5:15, 5:15].any()
        # all pixels outside the blob's own diff component are bit-identical
        region = res.updated_region
        x0, y0, x1, y1 = region.pixel_box()
        outside = np.ones_like(gt)
        outside[y0:y1, x0:x1] = False
        assert np.array_equal(after[outside], init[outside])

    def test_audit_record_shape(self):
        img, gt = _scene(9)
        s = Session(img, backend=OracleBackend(gt))
        s.add_click(20, 20, True)
        rec = s.audit[0]
        assert rec["ordinal"] == 1
        assert rec["polarity"] == "positive"
        assert set(rec["target_crop"]) == {"box", "out", "ratio"}
        assert 0 < rec["target_ratio"] <= 1.0
        assert 0 < rec["focus_ratio"] <= 1.0
        assert rec["timings_ms"]["total"] > 0

    def test_progressive_switches_after_ten_clicks(self):
        img, gt = _scene(10)
        s = Session(img, backend=NoisyOracleBackend(gt, 1, 0.0, np.random.default_rng(0)))
        h, w = gt.shape
        rng = np.random.default_rng(1)
        states = []
        for k in range(PROGRESSIVE_AFTER_CLICKS + 2):
            res = s.add_click(int(rng.integers(w)), int(rng.integers(h)), bool(rng.random() < 0.5))
            states.append(res.progressive)
        assert states[:PROGRESSIVE_AFTER_CLICKS] == [False] * PROGRESSIVE_AFTER_CLICKS
        assert states[PROGRESSIVE_AFTER_CLICKS:] == [True, True]

    def test_determinism(self):
        img, gt = _scene(11)
        h, w = gt.shape
        clicks = [(int(x), int(y), bool(p < 0.7)) for x, y, p in np.random.default_rng(2).random((6, 3)) * [[w, h, 1]]]

        def run():
            s = Session(img, backend=NoisyOracleBackend(gt, 2, 0.3, np.random.default_rng(77)))
            for x, y, p in clicks:
                s.add_click(x, y, p)
            return s.mask

        assert np.array_equal(run(), run())

    def test_positive_click_pixel_kept_when_predicted(self):
        img, gt = _scene(12)
        s = Session(img, initial_mask=np.zeros_like(gt), backend=OracleBackend(gt))
        s.had_initial_mask = True  # force progressive merging from the start
        ys, xs = np.nonzero(gt)
        x, y = int(xs[0]), int(ys[0])
        s.add_click(x, y, True)
        assert s.mask[y, x]


class TestUndoSetMask:
    def test_add_then_undo_bit_identical(self):
        img, gt = _scene(13)
        s = Session(img, initial_mask=gt, backend=OracleBackend(gt))
        before = s.mask
        s.add_click(10, 10, False)
        s.undo()
        assert np.array_equal(s.mask, before)
        assert len(s.clicks) == 0
        assert s.audit[0]["undone"] is True

    def test_two_adds_one_undo(self):
        img, gt = _scene(14)
        s = Session(img, backend=OracleBackend(gt))
        s.add_click(30, 30, True)
        after_first = s.mask
        s.add_click(50, 50, True)
        s.undo()
        assert np.array_equal(s.mask, after_first)
        assert len(s.clicks) == 1

    def test_set_mask_pushes_history_and_progressive(self):
        img, gt = _scene(15)
        s = Session(img, backend=OracleBackend(gt))
        assert not s.progressive_active
        s.set_mask(gt)
        assert s.progressive_active
        assert np.array_equal(s.mask, gt)
        s.undo()
        assert not s.mask.any()

    def test_set_mask_dim_mismatch(self):
        img, gt = _scene(16)
        s = Session(img, backend=OracleBackend(gt))
        with pytest.raises(ValueError):
            s.set_mask(np.zeros((3, 3), bool))

    def test_set_empty_mask_keeps_progressive(self):
        img, gt = _scene(17)
        s = Session(img, backend=OracleBackend(gt))
        s.set_mask(np.zeros_like(gt))
        assert s.progressive_active

    def test_set_then_corrective_click_is_local(self):
        img, gt = _scene(18)
        hole = gt.copy()
        ys, xs = np.nonzero(gt)
        cy, cx = int(ys.mean()), int(xs.mean())
        hole[cy - 3 : cy + 3, cx - 3 : cx + 3] = False
        s = Session(img, backend=OracleBackend(gt))
        s.set_mask(hole)
        res = s.add_click(cx, cy, True)
        x0, y0, x1, y1 = res.updated_region.pixel_box()
        outside = np.ones_like(gt)
        outside[y0:y1, x0:x1] = False
        assert np.array_equal(s.mask[outside], hole[outside])
        assert s.mask[cy, cx]

    def test_history_depth_bounded(self):
        img, gt = _scene(19)
        s = Session(img, backend=ConstantBackend(), history_depth=4)
        for k in range(6):
            s.add_click(10 + k, 10, True)
        undone = 0
        while True:
            try:
                s.undo()
                undone += 1
            except IndexError:
                break
        assert undone == 4

    def test_audit_jsonl(self, tmp_path):
        img, gt = _scene(20)
        s = Session(img, backend=OracleBackend(gt))
        s.add_click(12, 12, True)
        path = tmp_path / "audit.jsonl"
        s.write_audit_jsonl(path)
        import json

        lines = path.read_text().strip().split("\n")
        assert len(lines) == 1
        rec = json.loads(lines[0])
        assert rec["ordinal"] == 1 and "target_crop" in rec


class TestLocality:
    def test_no_pixels_change_outside_reported_region(self):
        rng = np.random.default_rng(99)
        for i in range(15):
            img, gt = _scene(100 + i, kind=("blob", "polygon", "wavy")[i % 3])
            h, w = gt.shape
            init = gt ^ (np.random.default_rng(i).random((h, w)) < 0.02)
            s = Session(img, initial_mask=init, backend=NoisyOracleBackend(gt, 2, 0.3, np.random.default_rng(i)))
            for _ in range(2):
                before = s.mask
                res = s.add_click(int(rng.integers(w)), int(rng.integers(h)), bool(rng.random() < 0.7))
                after = s.mask
                if res.updated_region is None:
                    assert np.array_equal(before, after)
                else:
                    x0, y0, x1, y1 = res.updated_region.pixel_box()
                    outside = np.ones((h, w), bool)
                    outside[y0:y1, x0:x1] = False
                    assert np.array_equal(before[outside], after[outside])
