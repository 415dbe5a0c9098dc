"""Miniature end-to-end run: generate, train both networks, infer, evaluate.

Uses deliberately small settings so it finishes in a few minutes on a
laptop; the acceptance suite runs the full-size version of the same flow.
"""

import tempfile
import time
from pathlib import Path

from shoulderct import ExperimentConfig, SegmenterConfig, StagingConfig
from shoulderct.phantom import generate_cohort
from shoulderct.pipeline import evaluate, infer, train_classifier, train_segmentation

work = Path(tempfile.mkdtemp(prefix="shoulderct_demo_"))
print("working in", work)

manifest = generate_cohort(20, work / "cohort", seed=0, spacing=1.25)
print(f"generated {len(manifest)} phantoms")

cfg = ExperimentConfig(
    seed=1,
    learning_rate=1e-3,
    batch_size=2,
    max_epochs=3,
    early_stopping_patience=10,
    patch_size=32,
    patch_stride=24,
    crop_margin=4,
    segmenter=SegmenterConfig(levels=2, base_features=4),
    stager=StagingConfig(blocks=3, base_features=8, input_size=32),
)

t0 = time.time()
seg_hist = train_segmentation(cfg, manifest[:6], manifest[18:], work / "seg.pt")
print(f"segmenter: {time.time() - t0:.0f} s, val loss {min(seg_hist['val_loss']):.3f}")

t0 = time.time()
cls_hist = train_classifier(cfg, manifest[:18], manifest[18:], work / "cls.pt")
print(f"stager: {time.time() - t0:.0f} s, val loss {min(cls_hist['val_loss']):.3f}")

for rec in manifest[18:]:
    report = infer(rec["volume_path"], work / "seg.pt", work / "cls.pt",
                   work / "pred", case_id=rec["id"])
    t = report["timings_s"]
    print(f"{rec['id']}: OS {report['os']} JS {report['js']} HSA {report['hsa']} "
          f"(truth {rec['os']}/{rec['js']}/{rec['hsa']}), "
          f"{t['overall']:.1f} s total")

results = evaluate(manifest[18:], work / "pred")
for row in results["cases"]:
    print(f"{row['case_id']} {row['class']}: dice {row['dice']:.3f}, "
          f"surface RMSE {row['rmse_mm']:.2f} mm")
