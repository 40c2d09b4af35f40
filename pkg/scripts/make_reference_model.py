#!/usr/bin/env python3
"""Regenerate the checked-in reference model, deterministically.

Generates the standard synthetic corpus (500 benign for training, 50+50
labeled for calibration), trains with the default config, calibrates the
threshold, and writes models/reference.json. Running this twice produces
byte-identical output.
"""

import argparse
import tempfile
from pathlib import Path

from clicksift import corpus, detector, pipeline

GEN_TRAIN_SEED = 11
GEN_EVAL_SEED = 111
TRAIN_SEED = 0


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent
                                             / "models" / "reference.json"))
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        train_dir = Path(tmp) / "train"
        eval_dir = Path(tmp) / "eval"
        corpus.generate(corpus.GenSpec(seed=GEN_TRAIN_SEED, n_benign=500, n_fraud=0), train_dir)
        corpus.generate(corpus.GenSpec(seed=GEN_EVAL_SEED, n_benign=50, n_fraud=50), eval_dir)
        model = pipeline.train_on_benign_dir(
            train_dir, config=detector.TrainConfig(seed=TRAIN_SEED)
        )
        model = pipeline.calibrate_on_dir(eval_dir, model)
        report = pipeline.evaluate_labeled(eval_dir, model)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    detector.save_model(model, out)
    print(f"wrote {out}")
    print(f"calibrated threshold: {model.threshold:.6g}")
    print(f"calibration-set site F-score: {report['site']['f_score']:.3f}, "
          f"AUC: {report['auc']:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
