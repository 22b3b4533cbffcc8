import numpy as np
import pytest

from clickcrop.backends import ConstantBackend, OracleBackend
from clickcrop.harness import (
    EvalConfig,
    MODE_FROM_INITIAL,
    MODE_FROM_SCRATCH,
    SampleRecord,
    aggregate,
    load_dataset,
    run_sample,
    run_samples,
    sample_rng,
    simulate_next_click,
    write_report_csv,
    write_report_json,
)
from clickcrop.maskio import save_mask_png
from clickcrop.raster import connected_components, iou, largest_component
from clickcrop.synthetic import random_scene, scene_set, write_dataset
from conftest import edt_brute


class TestSimulateNextClick:
    def test_empty_pred_clicks_disk_center(self):
        gt = np.zeros((21, 21), bool)
        yy, xx = np.mgrid[0:21, 0:21]
        gt[(xx - 10) ** 2 + (yy - 10) ** 2 <= 36] = True
        click = simulate_next_click(np.zeros_like(gt), gt)
        assert click.is_positive
        assert (click.x, click.y) == (10, 10)

    def test_spurious_blob_gets_negative_center(self):
        gt = np.zeros((40, 40), bool)
        gt[5:15, 5:15] = True
        pred = gt.copy()
        pred[25:30, 25:30] = True  # 5x5 spurious block
        click = simulate_next_click(pred, gt)
        assert not click.is_positive
        assert (click.x, click.y) == (27, 27)

    def test_targets_largest_region(self):
        gt = np.zeros((40, 40), bool)
        gt[2:5, 2:5] = True    # 9 px error region
        gt[20:25, 20:25] = True  # 25 px error region
        click = simulate_next_click(np.zeros_like(gt), gt)
        assert 20 <= click.x < 25 and 20 <= click.y < 25

    def test_equal_masks_rejected(self):
        m = np.ones((4, 4), bool)
        with pytest.raises(ValueError):
            simulate_next_click(m, m)

    def test_click_at_brute_force_argmax(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            pred = rng.random((24, 24)) < 0.5
            gt = rng.random((24, 24)) < 0.5
            if (pred ^ gt).sum() == 0:
                continue
            click = simulate_next_click(pred, gt)
            labels, _ = connected_components(pred ^ gt, 8)
            region = labels == largest_component(labels)
            assert region[click.y, click.x]
            ref = edt_brute(region)
            flat = int(np.argmax(ref))
            assert (click.y, click.x) == divmod(flat, 24)


def _mini_scene(seed=0):
    return random_scene(np.random.default_rng(seed), kind="blob", size_range=(100, 130), min_pixels=400)


class TestRunSample:
    def test_oracle_one_click(self):
        img, gt = _mini_scene(1)
        rec = run_sample(img, gt, None, OracleBackend(gt), "s2", EvalConfig(seed=0), "a")
        assert rec.clicks_to_target == {0.85: 1, 0.90: 1, 0.95: 1}
        assert not any(rec.failed.values())

    def test_constant_empty_fails_everywhere(self):
        img, gt = _mini_scene(2)
        cfg = EvalConfig(seed=0)
        rec = run_sample(img, gt, None, ConstantBackend(), "s2", cfg, "b")
        assert len(rec.iou_trace) == cfg.max_clicks
        assert all(rec.failed.values())
        assert all(v == cfg.max_clicks + 1 for v in rec.clicks_to_target.values())

    def test_initial_mask_meeting_target_costs_zero(self):
        img, gt = _mini_scene(3)
        cfg = EvalConfig(mode=MODE_FROM_INITIAL, seed=0)
        rec = run_sample(img, gt, gt.copy(), OracleBackend(gt), "s2", cfg, "c")
        assert rec.initial_iou == 1.0
        assert rec.clicks_to_target == {0.85: 0, 0.90: 0, 0.95: 0}
        assert rec.iou_trace == []

    def test_scratch_mode_ignores_initial(self):
        img, gt = _mini_scene(4)
        cfg = EvalConfig(mode=MODE_FROM_SCRATCH, seed=0)
        rec = run_sample(img, gt, gt.copy(), OracleBackend(gt), "s2", cfg, "d")
        assert rec.initial_iou == 0.0

    def test_backend_failure_recorded(self):
        class Exploding(ConstantBackend):
            def segment(self, inp):
                raise RuntimeError("shape mismatch: (1,) vs (2,)")

        img, gt = _mini_scene(5)
        rec = run_sample(img, gt, None, Exploding(), "s2", EvalConfig(seed=0), "e")
        assert rec.error is not None and "shape mismatch" in rec.error
        assert all(rec.failed.values())

    def test_empty_gt_rejected(self):
        img, gt = _mini_scene(6)
        with pytest.raises(ValueError):
            run_sample(img, np.zeros_like(gt), None, ConstantBackend(), "s2", EvalConfig(), "f")

    def test_monotone_thresholds(self):
        img, gt = _mini_scene(7)
        rec = run_sample(img, gt, None, OracleBackend(gt), "s2", EvalConfig(seed=0), "g")
        ts = sorted(rec.clicks_to_target)
        vals = [rec.clicks_to_target[t] for t in ts]
        assert vals == sorted(vals)

    def test_reproducible_bit_identical(self):
        img, gt = _mini_scene(8)
        cfg = EvalConfig(seed=5)

        def run():
            from clickcrop.backends import NoisyOracleBackend

            backend = NoisyOracleBackend(gt, 2, 0.4, sample_rng(cfg.seed, "h"))
            return run_sample(img, gt, None, backend, "s2", cfg, "h")

        a, b = run(), run()
        assert a.iou_trace == b.iou_trace
        assert a.clicks_to_target == b.clicks_to_target


class TestAggregate:
    def _record(self, sid, per_threshold, max_clicks=20):
        rec = SampleRecord(sample_id=sid, initial_iou=0.0)
        for t, n in per_threshold.items():
            failed = n > max_clicks
            rec.clicks_to_target[t] = n
            rec.failed[t] = failed
        rec.iou_trace = [0.5]
        return rec

    def test_all_one_click(self):
        cfg = EvalConfig(target_ious=(0.85,), seed=0)
        recs = [self._record(str(i), {0.85: 1}) for i in range(4)]
        rep = aggregate(recs, cfg)
        assert rep["noc"]["0.85"] == 1.0
        assert rep["nof"]["0.85"] == 0

    def test_failure_counts_cap(self):
        cfg = EvalConfig(target_ious=(0.90,), seed=0)
        recs = [self._record("ok", {0.90: 2}), self._record("fail", {0.90: 21})]
        rep = aggregate(recs, cfg)
        assert rep["noc"]["0.90"] == 11.0  # (20 + 2) / 2
        assert rep["nof"]["0.90"] == 1

    def test_exact_rounding(self):
        cfg = EvalConfig(target_ious=(0.85,), seed=0)
        recs = [self._record(str(i), {0.85: n}) for i, n in enumerate([1, 1, 2])]
        rep = aggregate(recs, cfg)
        assert rep["noc"]["0.85"] == 1.33  # 4/3 rounded to 2 decimals

    def test_empty_records_rejected(self):
        with pytest.raises(ValueError):
            aggregate([], EvalConfig())

    def test_threshold_monotonicity_in_report(self):
        img, gt = _mini_scene(9)
        report, _ = run_samples(
            [type("S", (), {"sample_id": "x", "image": img, "gt": gt, "init_mask": None})()],
            "oracle",
            "s2",
            EvalConfig(seed=0),
        )
        noc = report["noc"]
        assert noc["0.85"] <= noc["0.90"] <= noc["0.95"]


class TestLoadDataset:
    def _write(self, root, sid, image, gt, init=None):
        from PIL import Image

        (root / "images").mkdir(parents=True, exist_ok=True)
        (root / "masks").mkdir(exist_ok=True)
        Image.fromarray(image).save(root / "images" / f"{sid}.png")
        save_mask_png(root / "masks" / f"{sid}.png", gt)
        if init is not None:
            (root / "init_masks").mkdir(exist_ok=True)
            save_mask_png(root / "init_masks" / f"{sid}.png", init)

    def test_min_pixel_filter_boundary(self, tmp_path):
        img = np.zeros((40, 40, 3), np.uint8)
        small = np.zeros((40, 40), bool)
        small.ravel()[:299] = True
        kept = np.zeros((40, 40), bool)
        kept.ravel()[:300] = True
        self._write(tmp_path, "small", img, small)
        self._write(tmp_path, "kept", img, kept)
        ids = [s.sample_id for s in load_dataset(tmp_path)]
        assert ids == ["kept"]

    def test_dimension_mismatch_hard_error(self, tmp_path):
        img = np.zeros((40, 40, 3), np.uint8)
        gt = np.ones((30, 30), bool)
        self._write(tmp_path, "bad", img, gt)
        with pytest.raises(ValueError):
            list(load_dataset(tmp_path))

    def test_unreadable_mask_skipped(self, tmp_path):
        img = np.zeros((40, 40, 3), np.uint8)
        gt = np.ones((40, 40), bool)
        self._write(tmp_path, "good", img, gt)
        (tmp_path / "images" / "junk.png").write_bytes(b"not a png")
        (tmp_path / "masks" / "junk.png").write_bytes(b"not a png")
        ids = [s.sample_id for s in load_dataset(tmp_path)]
        assert ids == ["good"]

    def test_init_masks_loaded(self, tmp_path):
        img = np.zeros((40, 40, 3), np.uint8)
        gt = np.ones((40, 40), bool)
        init = np.zeros((40, 40), bool)
        init[:20] = True
        self._write(tmp_path, "s", img, gt, init)
        sample = next(load_dataset(tmp_path))
        assert sample.init_mask is not None
        assert np.array_equal(sample.init_mask, init)

    def test_missing_init_dir_fine_for_scratch(self, tmp_path):
        img = np.zeros((40, 40, 3), np.uint8)
        self._write(tmp_path, "s", img, np.ones((40, 40), bool))
        assert len(list(load_dataset(tmp_path))) == 1
        assert len(list(load_dataset(tmp_path, require_init=True))) == 0


class TestReports:
    def test_json_and_csv_roundtrip(self, tmp_path):
        scenes = scene_set(2, seed=5, kinds=("blob",), size_range=(100, 120), min_pixels=300)
        cfg = EvalConfig(seed=0)
        report, records = run_samples(scenes, "oracle", "s2", cfg)
        jpath, cpath = tmp_path / "r.json", tmp_path / "r.csv"
        write_report_json(jpath, report)
        write_report_csv(cpath, records, cfg)
        import csv as csvmod
        import json

        loaded = json.loads(jpath.read_text())
        assert loaded["noc"] == report["noc"]
        assert len(loaded["samples"]) == 2
        rows = list(csvmod.reader(cpath.read_text().splitlines()))
        assert len(rows) == 3  # header + 2 samples
        assert rows[0][0] == "id"
