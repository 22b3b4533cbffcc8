"""Command line: evaluation runs, benchmark corruption, the HTTP service, demo data."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import corruption, harness, synthetic


def _add_eval(sub):
    p = sub.add_parser("eval", help="run the NoC/NoF click-simulation protocol on a dataset")
    p.add_argument("--dataset", required=True, help="dataset root (images/, masks/, optional init_masks/)")
    p.add_argument("--mode", choices=["scratch", "init"], default="scratch")
    p.add_argument("--series", choices=["s1", "s2"], default="s2")
    p.add_argument("--backend", choices=["oracle", "noisy", "constant", "external"], default="oracle")
    p.add_argument("--model", default=None, help="model file for external backends")
    p.add_argument("--io-spec", default=None, help="io_spec JSON for external backends")
    p.add_argument("--targets", default="0.85,0.90,0.95")
    p.add_argument("--max-clicks", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-blur", type=int, default=2)
    p.add_argument("--noise-blob-rate", type=float, default=0.2)
    p.add_argument("--report", default=None, help="write full JSON report here")
    p.add_argument("--csv", default=None, help="write per-sample CSV here")
    return p


def _add_corrupt(sub):
    p = sub.add_parser("corrupt", help="generate defective initial masks for a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-iou", type=float, default=0.75)
    p.add_argument("--max-iou", type=float, default=0.85)
    p.add_argument("--max-attempts", type=int, default=50)
    return p


def _add_serve(sub):
    p = sub.add_parser("serve", help="run the interactive annotation HTTP service")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--backend", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--series", default=None)
    p.add_argument("--frontend", default=None, help="static frontend directory to mount at /ui")
    p.add_argument("--config", default=None, help="JSON config file; explicit flags win over it")
    return p


def _add_synth(sub):
    p = sub.add_parser("synth", help="write a synthetic dataset for demos and smoke tests")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size-min", type=int, default=224)
    p.add_argument("--size-max", type=int, default=288)
    p.add_argument("--min-pixels", type=int, default=1000, help="minimum object size")
    return p


def cmd_eval(args) -> int:
    mode = harness.MODE_FROM_SCRATCH if args.mode == "scratch" else harness.MODE_FROM_INITIAL
    targets = tuple(float(t) for t in args.targets.split(","))
    cfg = harness.EvalConfig(target_ious=targets, max_clicks=args.max_clicks, mode=mode, seed=args.seed)
    samples = list(harness.load_dataset(args.dataset, require_init=mode == harness.MODE_FROM_INITIAL))
    if not samples:
        print("no usable samples found", file=sys.stderr)
        return 1
    report, records = harness.run_samples(
        samples,
        backend_name=args.backend,
        series=args.series,
        cfg=cfg,
        noise_blur=args.noise_blur,
        noise_blob_rate=args.noise_blob_rate,
        model_path=args.model,
        io_spec=args.io_spec,
    )
    for key in sorted(report["noc"]):
        print(f"NoC@{key} = {report['noc'][key]:.2f}   NoF@{key} = {report['nof'][key]}")
    area = report["crop_area"]
    if area["target_mean"] is not None:
        print(f"mean crop area ratio: target {area['target_mean']:.4f}, focus {area['focus_mean']:.4f}")
    if args.report:
        harness.write_report_json(args.report, report)
        print(f"report written to {args.report}")
    if args.csv:
        harness.write_report_csv(args.csv, records, cfg)
        print(f"csv written to {args.csv}")
    return 0


def cmd_corrupt(args) -> int:
    dcfg = corruption.DefectConfig(
        min_iou=args.min_iou,
        max_iou=args.max_iou,
        max_attempts=args.max_attempts,
        seed=args.seed,
    )
    manifest = corruption.build_benchmark(args.dataset, args.out, dcfg)
    done = [s for s in manifest["samples"] if "error" not in s]
    failed = [s for s in manifest["samples"] if "error" in s]
    print(f"wrote {len(done)} defective masks to {args.out} ({len(failed)} failures)")
    for s in failed:
        print(f"  failed: {s['id']}: {s['error']}", file=sys.stderr)
    return 0 if done else 1


def cmd_serve(args) -> int:
    from . import service

    settings = {
        "host": "127.0.0.1", "port": 8000, "backend": "oracle",
        "model": None, "series": "s2", "frontend": None,
    }
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        # nested form: {"backend": {"name": ..., "model_path": ...}}
        backend_cfg = overrides.get("backend")
        if isinstance(backend_cfg, dict):
            overrides = dict(overrides)
            overrides["backend"] = backend_cfg.get("name", settings["backend"])
            overrides.setdefault("model", backend_cfg.get("model_path"))
        settings.update((k, v) for k, v in overrides.items() if k in settings)
    for key in settings:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = flag
    service.run(
        host=settings["host"],
        port=settings["port"],
        default_backend=settings["backend"],
        model_path=settings["model"],
        default_series=settings["series"],
        frontend_dir=settings["frontend"],
    )
    return 0


def cmd_synth(args) -> int:
    samples = synthetic.scene_set(
        args.n,
        seed=args.seed,
        size_range=(args.size_min, args.size_max),
        min_pixels=args.min_pixels,
    )
    synthetic.write_dataset(args.out, samples)
    print(f"wrote {len(samples)} scenes to {args.out}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(prog="clickcrop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_eval(sub)
    _add_corrupt(sub)
    _add_serve(sub)
    _add_synth(sub)
    args = parser.parse_args(argv)
    handler = {"eval": cmd_eval, "corrupt": cmd_corrupt, "serve": cmd_serve, "synth": cmd_synth}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
