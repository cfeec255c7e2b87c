"""Command-line pipeline: simulate -> perturb -> evaluate -> calibrate -> predict -> aggregate -> report.

Manifests are JSON Lines, one frame per line, with file paths relative to the
manifest location: frame_id, image, seg_gt, seg_pred, depth_pred, depth_gt
(plus optional perturbation / epsilon_255 tags on perturbed or evaluated
entries, and depth_dense for synthetic scenes).

All files store metrics in [0, 1]; printed reports are in percent.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import frameio, metrics, perturb, regress, synthmodel, timeagg

REPORT_CSV_FIELDS = ["delta_n", "latency_s", "rho", "mae", "rmse"]
SUMMARY_CSV_FIELDS = ["perturbation", "rho", "mae", "rmse", "count"]


def _parse_eps_255(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _eps_values(eps_255: list[float]) -> list[float]:
    """Clean condition first, then the sweep, in [0, 1]-scale units."""
    eps = [e / 255.0 for e in eps_255 if e > 0]
    return [0.0] + sorted(set(eps))


def manifests_disjoint(val_rows, test_rows) -> None:
    """Raise if the validation and test splits share any frame_id."""
    shared = {r["frame_id"] for r in val_rows} & {r["frame_id"] for r in test_rows}
    if shared:
        raise ValueError(f"val/test manifests share frame ids: {sorted(shared)[:5]} ...")


def cmd_simulate(args) -> int:
    out = Path(args.out)
    for sub in ("images", "seg_gt", "depth_gt", "depth_dense"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    cfg_base = synthmodel.SceneConfig(
        height=args.height, width=args.width, num_classes=args.num_classes,
        num_objects=args.num_objects, gt_sparsity=args.gt_sparsity, seed=0,
    )
    rows = []
    for i in range(args.frames):
        frame_id = f"frame_{i:05d}"
        cfg = synthmodel.SceneConfig(
            height=cfg_base.height, width=cfg_base.width, num_classes=cfg_base.num_classes,
            num_objects=cfg_base.num_objects, gt_sparsity=cfg_base.gt_sparsity,
            seed=perturb.derive_seed(args.seed, "simulate", frame_id),
        )
        frame = synthmodel.generate_scene(cfg, frame_id=frame_id)
        frameio.save_image(frame.image, out / "images" / f"{frame_id}.png")
        frameio.save_seg_map(frame.seg_gt, out / "seg_gt" / f"{frame_id}.png")
        dense = frameio.SparseDepthMap(frame.depth_gt.depth, np.ones_like(frame.depth_gt.valid))
        frameio.save_depth_map(frame.depth_gt, out / "depth_gt" / f"{frame_id}.png")
        frameio.save_depth_map(dense, out / "depth_dense" / f"{frame_id}.png")
        rows.append({
            "frame_id": frame_id,
            "image": f"images/{frame_id}.png",
            "seg_gt": f"seg_gt/{frame_id}.png",
            "depth_gt": f"depth_gt/{frame_id}.png",
            "depth_dense": f"depth_dense/{frame_id}.png",
            "num_classes": args.num_classes,
        })
    if args.val_frames > 0:
        val, test = rows[: args.val_frames], rows[args.val_frames :]
        manifests_disjoint(val, test)
        frameio.write_manifest(out / "manifest_val.jsonl", val)
        frameio.write_manifest(out / "manifest_test.jsonl", test)
        print(f"wrote {len(val)} val + {len(test)} test frames to {out}")
    else:
        frameio.write_manifest(out / "manifest.jsonl", rows)
        print(f"wrote {len(rows)} frames to {out}")
    return 0


def cmd_perturb(args) -> int:
    root = Path(args.manifest).parent
    rows = frameio.read_manifest(args.manifest)
    out = Path(args.out)
    kinds = args.perturb.split(",")
    eps_values = _eps_values(_parse_eps_255(args.eps_255))
    new_rows = []
    for row in rows:
        image = frameio.load_image(root / row["image"])
        for kind in kinds:
            for eps in eps_values:
                tag = f"{kind}_eps{eps * 255:g}"
                sub = out / "images_perturbed" / tag
                sub.mkdir(parents=True, exist_ok=True)
                spec = perturb.PerturbationSpec(
                    kind=kind, epsilon=eps,
                    seed=perturb.derive_seed(args.seed, "perturb", kind, repr(eps), row["frame_id"]),
                )
                frameio.save_image(perturb.perturb_image(image, spec), sub / f"{row['frame_id']}.png")
                new_row = dict(row)
                new_row["image"] = f"images_perturbed/{tag}/{row['frame_id']}.png"
                new_row["perturbation"] = kind
                new_row["epsilon_255"] = eps * 255.0
                for key in ("seg_gt", "seg_pred", "depth_pred", "depth_gt", "depth_dense"):
                    if row.get(key):
                        new_row[key] = os.path.relpath(root / row[key], out)
                new_rows.append(new_row)
    frameio.write_manifest(out / "manifest_perturbed.jsonl", new_rows)
    print(f"wrote {len(new_rows)} perturbed entries to {out}")
    return 0


def _load_synth_frame(row, root, num_classes):
    """FrameRecord for the synthetic perceiver: dense depth + sparse valid mask."""
    sparse = frameio.load_depth_map(root / row["depth_gt"])
    dense = frameio.load_depth_map(root / row["depth_dense"])
    return frameio.FrameRecord(
        frame_id=row["frame_id"],
        seg_gt=frameio.load_seg_map(root / row["seg_gt"], num_classes),
        depth_gt=frameio.SparseDepthMap(dense.depth, sparse.valid),
    )


def cmd_evaluate(args) -> int:
    root = Path(args.manifest).parent
    rows = frameio.read_manifest(args.manifest)
    samples = []
    skipped = []
    if args.synthetic:
        deg = synthmodel.DegradationConfig(
            seg_sensitivity=args.seg_sensitivity, depth_sensitivity=args.depth_sensitivity,
            coupling=args.coupling, seg_clean_noise=args.seg_clean_noise,
            depth_clean_noise=args.depth_clean_noise,
        )
        kinds = args.perturb.split(",")
        eps_values = _eps_values(_parse_eps_255(args.eps_255))
        scale = args.scale if args.scale is not None else 1.0
        for n, row in enumerate(rows):
            num_classes = int(row.get("num_classes", args.num_classes))
            frame = _load_synth_frame(row, root, num_classes)
            for kind in kinds:
                for eps in eps_values:
                    seed = perturb.derive_seed(args.seed, "evaluate", kind)
                    seg_pred, depth_pred = synthmodel.degrade_outputs(frame, eps, deg, seed)
                    try:
                        sample = metrics.MetricSample(
                            frame_id=row["frame_id"], n=n, perturbation=kind, epsilon=eps,
                            miou=metrics.miou_image(metrics.confusion_counts(seg_pred, frame.seg_gt)),
                            acc=metrics.depth_acc(depth_pred, frame.depth_gt, scale),
                        )
                    except (metrics.UndefinedMetricError, metrics.EmptyGroundTruthError) as e:
                        skipped.append((row["frame_id"], kind, eps, str(e)))
                        continue
                    samples.append(sample)
    else:
        loaded = []
        for n, row in enumerate(rows):
            num_classes = int(row.get("num_classes", args.num_classes))
            frame = frameio.load_frame(row, root, num_classes)
            if frame.seg_pred is None or frame.depth_pred is None:
                skipped.append((row["frame_id"], "-", "-", "missing predictions"))
                continue
            loaded.append((n, row, frame))
        if args.scale is not None:
            scale = args.scale
        else:
            clean = [(f.depth_pred, f.depth_gt) for _, r, f in loaded
                     if float(r.get("epsilon_255", 0.0)) == 0.0 and f.depth_gt is not None]
            scale = metrics.calibrate_global_scale(clean, args.scale_mode) if clean else 1.0
        for n, row, frame in loaded:
            try:
                sample = metrics.MetricSample(
                    frame_id=row["frame_id"], n=n,
                    perturbation=row.get("perturbation", "clean"),
                    epsilon=float(row.get("epsilon_255", 0.0)) / 255.0,
                    miou=metrics.miou_image(metrics.confusion_counts(frame.seg_pred, frame.seg_gt)),
                    acc=metrics.depth_acc(frame.depth_pred, frame.depth_gt, scale),
                )
            except (metrics.UndefinedMetricError, metrics.EmptyGroundTruthError) as e:
                skipped.append((row["frame_id"], row.get("perturbation", "clean"),
                                row.get("epsilon_255", 0.0), str(e)))
                continue
            samples.append(sample)
    metrics.write_samples_csv(args.out, samples)
    clean_miou = [s.miou for s in samples if s.epsilon == 0.0]
    if clean_miou:
        print(f"clean mIoU_0 = {100 * np.mean(clean_miou):.2f}% over {len(clean_miou)} samples")
    print(f"wrote {len(samples)} samples to {args.out}")
    if skipped:
        print(f"warning: skipped {len(skipped)} undefined evaluations", file=sys.stderr)
    return 0


def cmd_calibrate(args) -> int:
    samples = metrics.read_samples_csv(args.samples)
    model = regress.fit_quadratic(samples)
    regress.save_model(model, args.out)
    t = model.theta
    print(f"theta = ({t[0]:.6f}, {t[1]:.6f}, {t[2]:.6f}) from {len(samples)} samples -> {args.out}")
    return 0


def cmd_predict(args) -> int:
    samples = metrics.read_samples_csv(args.samples)
    model = regress.load_model(args.model)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "predictions.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(metrics.SAMPLE_CSV_FIELDS + ["miou_hat"])
        for s in samples:
            writer.writerow([s.frame_id, s.n, s.perturbation, repr(s.epsilon * 255.0),
                             repr(s.miou), repr(s.acc), repr(regress.predict_miou(model, s.acc))])

    with open(out / "scatter.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["acc", "miou", "miou_hat"])
        for s in samples:
            writer.writerow([repr(s.acc), repr(s.miou), repr(regress.predict_miou(model, s.acc))])

    kinds = sorted({s.perturbation for s in samples})
    per_kind = []
    with open(out / "summary.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SUMMARY_CSV_FIELDS)
        for kind in kinds:
            sub = [s for s in samples if s.perturbation == kind]
            summ = metrics.error_summary(
                [regress.predict_miou(model, s.acc) for s in sub], [s.miou for s in sub])
            per_kind.append(summ)
            writer.writerow([kind, repr(summ.rho), repr(summ.mae), repr(summ.rmse), summ.count])
            print(f"{kind:12s} rho={summ.rho:.2f}  dmIoU_M={100 * summ.mae:.2f}%  "
                  f"dmIoU_R={100 * summ.rmse:.2f}%  ({summ.count} samples)")
        if len(per_kind) > 1:
            mean_row = ["mean",
                        repr(float(np.mean([s.rho for s in per_kind]))),
                        repr(float(np.mean([s.mae for s in per_kind]))),
                        repr(float(np.mean([s.rmse for s in per_kind]))),
                        sum(s.count for s in per_kind)]
            writer.writerow(mean_row)
            print(f"{'mean':12s} rho={float(mean_row[1]):.2f}  dmIoU_M={100 * float(mean_row[2]):.2f}%  "
                  f"dmIoU_R={100 * float(mean_row[3]):.2f}%")
    print(f"wrote predictions, scatter, and summary to {out}")
    return 0


def _read_predictions(path):
    rows = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            rows.append(row)
    return rows


def cmd_aggregate(args) -> int:
    rows = _read_predictions(args.predictions)
    groups = {}
    for row in rows:
        key = (row["perturbation"], float(row["epsilon_255"]))
        groups.setdefault(key, []).append(
            (int(row["n"]), float(row["miou"]), float(row["miou_hat"])))
    series = []
    for key in sorted(groups):
        entries = sorted(groups[key])
        series.append((np.array([e[1] for e in entries]), np.array([e[2] for e in entries])))

    report_rows = []
    for delta_n in [int(v) for v in args.delta_n.split(",")]:
        cfg = timeagg.AggregationConfig(delta_n=delta_n, k=args.k, f=args.fps)
        agg_a, agg_p = [], []
        for gi, (actual, predicted) in enumerate(series):
            a, p = timeagg.aggregated_series(
                actual, predicted, cfg, mode=args.mode,
                seed=perturb.derive_seed(args.seed, "aggregate", delta_n, gi))
            agg_a.append(a)
            agg_p.append(p)
        summ = metrics.error_summary(np.concatenate(agg_p), np.concatenate(agg_a))
        report_rows.append({
            "delta_n": delta_n,
            "latency_s": timeagg.decision_latency(cfg),
            "rho": summ.rho,
            "mae": summ.mae,
            "rmse": summ.rmse,
        })
    with open(args.out, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=REPORT_CSV_FIELDS)
        writer.writeheader()
        for r in report_rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    for r in report_rows:
        print(f"dN={r['delta_n']:4d}  T={r['latency_s']:6.1f}s  rho={r['rho']:.2f}  "
              f"dmIoU_M={100 * r['mae']:.2f}%  dmIoU_R={100 * r['rmse']:.2f}%")
    print(f"wrote aggregation report to {args.out}")
    return 0


def cmd_report(args) -> int:
    if args.summary:
        print("Prediction error per perturbation kind (percent):")
        print(f"{'kind':>12s} {'rho':>6s} {'dmIoU_M':>8s} {'dmIoU_R':>8s}")
        with open(args.summary, newline="") as f:
            for row in csv.DictReader(f):
                print(f"{row['perturbation']:>12s} {float(row['rho']):6.2f} "
                      f"{100 * float(row['mae']):8.2f} {100 * float(row['rmse']):8.2f}")
    if args.aggregation:
        print("Temporal aggregation (percent):")
        print(f"{'dN':>5s} {'T[s]':>7s} {'rho':>6s} {'dmIoU_M':>8s} {'dmIoU_R':>8s}")
        with open(args.aggregation, newline="") as f:
            for row in csv.DictReader(f):
                print(f"{int(row['delta_n']):5d} {float(row['latency_s']):7.1f} "
                      f"{float(row['rho']):6.2f} {100 * float(row['mae']):8.2f} "
                      f"{100 * float(row['rmse']):8.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="segperf",
                                description="Online segmentation performance prediction pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic dataset + manifest")
    s.add_argument("--out", required=True)
    s.add_argument("--frames", type=int, default=50)
    s.add_argument("--val-frames", type=int, default=0,
                   help="if > 0, split into disjoint manifest_val/manifest_test")
    s.add_argument("--height", type=int, default=64)
    s.add_argument("--width", type=int, default=96)
    s.add_argument("--num-classes", type=int, default=5)
    s.add_argument("--num-objects", type=int, default=8)
    s.add_argument("--gt-sparsity", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("perturb", help="write perturbed copies of manifest images")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--perturb", default="gaussian,salt_pepper")
    s.add_argument("--eps-255", default=",".join(str(e) for e in perturb.DEFAULT_EPS_255))
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_perturb)

    s = sub.add_parser("evaluate", help="evaluate predictions into a MetricSample CSV")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--num-classes", type=int, default=5)
    s.add_argument("--synthetic", action="store_true",
                   help="use the synthetic perceiver instead of dumped predictions")
    s.add_argument("--perturb", default="gaussian,salt_pepper")
    s.add_argument("--eps-255", default=",".join(str(e) for e in perturb.DEFAULT_EPS_255))
    s.add_argument("--seg-sensitivity", type=float, default=2.0)
    s.add_argument("--depth-sensitivity", type=float, default=2.0)
    s.add_argument("--coupling", type=float, default=0.9)
    s.add_argument("--seg-clean-noise", type=float, default=0.0)
    s.add_argument("--depth-clean-noise", type=float, default=0.0)
    s.add_argument("--scale", type=float, default=None,
                   help="global depth scale; default: calibrate from clean entries (real mode) or 1.0 (synthetic)")
    s.add_argument("--scale-mode", choices=["median-ratio", "ratio-of-medians"], default="median-ratio")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("calibrate", help="fit the quadratic ACC->mIoU regression")
    s.add_argument("--samples", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("predict", help="apply the regression and summarize errors")
    s.add_argument("--samples", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("aggregate", help="temporal aggregation report over delta_n values")
    s.add_argument("--predictions", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--delta-n", default="1,3,5,11,21,51,101")
    s.add_argument("--k", type=int, default=100)
    s.add_argument("--fps", type=float, default=10.0)
    s.add_argument("--mode", choices=["random", "sequence"], default="random")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_aggregate)

    s = sub.add_parser("report", help="print stored summaries in percent")
    s.add_argument("--summary")
    s.add_argument("--aggregation")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
