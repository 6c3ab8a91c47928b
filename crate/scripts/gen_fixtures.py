#!/usr/bin/env python3
"""Regenerate the fixture datasets under fixtures/.

Image and axle totals mirror the four truck-axle databases (real 346/1184,
synthetic 326/1148, testing 36/119). Boxes are plausible axle placements;
only the counts are meaningful. Detection runs for the testing database are
engineered to specific TP/FP/FN totals.
"""
import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "fixtures"
CATEGORIES = {"0": "axle"}


def axle_counts(rng, images, axles):
    counts = [rng.choice([2, 2, 3, 3, 3, 4, 4, 5, 6]) for _ in range(images)]
    while sum(counts) != axles:
        i = rng.randrange(images)
        if sum(counts) < axles and counts[i] < 6:
            counts[i] += 1
        elif sum(counts) > axles and counts[i] > 1:
            counts[i] -= 1
    return counts


def axle_boxes(rng, n):
    boxes = []
    cy = round(rng.uniform(0.6, 0.8), 4)
    w = round(rng.uniform(0.05, 0.08), 4)
    h = round(rng.uniform(0.08, 0.12), 4)
    span = 0.8 / n
    for k in range(n):
        cx = round(0.1 + span * (k + 0.5) + rng.uniform(-0.01, 0.01), 4)
        boxes.append((cx, cy, w, h))
    return boxes


def fmt(x):
    return f"{x:.4f}"


def write_dataset(name, prefix, images, axles, seed):
    rng = random.Random(seed)
    root = ROOT / name
    labels = root / "labels"
    labels.mkdir(parents=True, exist_ok=True)
    entries = []
    gt = {}
    for idx, n in enumerate(axle_counts(rng, images, axles), start=1):
        image_id = f"{prefix}_{idx:04d}"
        boxes = axle_boxes(rng, n)
        gt[image_id] = boxes
        lines = [f"0 {fmt(cx)} {fmt(cy)} {fmt(w)} {fmt(h)}" for cx, cy, w, h in boxes]
        (labels / f"{image_id}.txt").write_text("\n".join(lines) + "\n")
        entries.append({"id": image_id, "gt": f"labels/{image_id}.txt", "width": 1920, "height": 1080})
    manifest = {"name": name, "categories": CATEGORIES, "images": entries}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return root, entries, gt


def write_run(root, entries, gt, run, misses, strays, seed, jitter=0.004):
    """Write detections hitting every GT box except `misses`, plus `strays` FPs."""
    rng = random.Random(seed)
    det_dir = root / "detections" / run
    det_dir.mkdir(parents=True, exist_ok=True)
    all_gt = [(e["id"], k) for e in entries for k in range(len(gt[e["id"]]))]
    missed = set(rng.sample(all_gt, misses))
    stray_images = rng.sample([e["id"] for e in entries], strays)
    run_entries = []
    for e in entries:
        image_id = e["id"]
        lines = []
        for k, (cx, cy, w, h) in enumerate(gt[image_id]):
            if (image_id, k) in missed:
                continue
            conf = round(rng.uniform(0.55, 0.99), 4)
            lines.append(
                f"0 {fmt(conf)} {fmt(cx + rng.uniform(-jitter, jitter))} "
                f"{fmt(cy + rng.uniform(-jitter, jitter))} {fmt(w)} {fmt(h)}"
            )
        if image_id in stray_images:
            conf = round(rng.uniform(0.3, 0.6), 4)
            lines.append(f"0 {fmt(conf)} 0.5000 0.2000 0.1000 0.1000")
        (det_dir / f"{image_id}.txt").write_text("\n".join(lines) + ("\n" if lines else ""))
        run_entries.append({**e, "det": f"detections/{run}/{image_id}.txt"})
    manifest = {"name": f"testing+{run}", "categories": CATEGORIES, "images": run_entries}
    (root / f"manifest_{run}.json").write_text(json.dumps(manifest, indent=2) + "\n")


def main():
    write_dataset("real", "real", 346, 1184, seed=1)
    write_dataset("synthetic", "synth", 326, 1148, seed=2)
    root, entries, gt = write_dataset("testing", "test", 36, 119, seed=3)
    write_run(root, entries, gt, "perfect", misses=0, strays=0, seed=10, jitter=0.0)
    write_run(root, entries, gt, "yolov8x_mixed", misses=0, strays=1, seed=11)
    write_run(root, entries, gt, "yolov3spp_real", misses=2, strays=2, seed=12)


if __name__ == "__main__":
    main()
