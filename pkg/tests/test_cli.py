import json

import numpy as np
import pytest

from clickcrop.cli import main
from clickcrop.maskio import load_mask_png
from clickcrop.raster import iou


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    rc = main(
        ["synth", "--out", str(root), "--n", "3", "--seed", "11",
         "--size-min", "112", "--size-max", "128", "--min-pixels", "400"]
    )
    assert rc == 0
    return root


class TestSynth:
    def test_layout(self, dataset):
        images = sorted(p.name for p in (dataset / "images").iterdir())
        masks = sorted(p.name for p in (dataset / "masks").iterdir())
        assert len(images) == 3 and images == masks


class TestCorrupt:
    def test_writes_masks_and_manifest(self, dataset, tmp_path):
        out = tmp_path / "bench"
        rc = main(["corrupt", "--dataset", str(dataset), "--out", str(out), "--seed", "5"])
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["samples"]) == 3
        for entry in manifest["samples"]:
            assert 0.75 <= entry["iou"] < 0.85
            gt = load_mask_png(dataset / "masks" / f"{entry['id']}.png")
            init = load_mask_png(out / entry["path"])
            assert 0.75 <= iou(init, gt) < 0.85


class TestEval:
    def test_oracle_scratch_run(self, dataset, tmp_path, capsys):
        report_path = tmp_path / "report.json"
        csv_path = tmp_path / "rows.csv"
        rc = main(
            [
                "eval",
                "--dataset", str(dataset),
                "--mode", "scratch",
                "--series", "s2",
                "--backend", "oracle",
                "--seed", "0",
                "--report", str(report_path),
                "--csv", str(csv_path),
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "NoC@0.85" in out and "NoC@0.95" in out
        report = json.loads(report_path.read_text())
        assert report["n_samples"] == 3
        assert report["noc"]["0.85"] == 1.0
        assert csv_path.read_text().count("\n") == 4  # header + 3 rows

    def test_eval_init_mode_uses_corrupted_masks(self, dataset, tmp_path):
        out = tmp_path / "bench"
        main(["corrupt", "--dataset", str(dataset), "--out", str(out), "--seed", "5"])
        # copy init masks into dataset layout
        import shutil

        shutil.copytree(out / "init_masks", dataset / "init_masks", dirs_exist_ok=True)
        report_path = tmp_path / "init_report.json"
        rc = main(
            [
                "eval",
                "--dataset", str(dataset),
                "--mode", "init",
                "--backend", "noisy",
                "--seed", "1",
                "--report", str(report_path),
            ]
        )
        assert rc == 0
        report = json.loads(report_path.read_text())
        assert report["config"]["mode"] == "from_initial_mask"
        assert 0.75 <= report["mean_initial_iou"] < 0.85

    def test_custom_targets(self, dataset, capsys):
        rc = main(["eval", "--dataset", str(dataset), "--backend", "oracle", "--targets", "0.5,0.8"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "NoC@0.50" in out and "NoC@0.80" in out
