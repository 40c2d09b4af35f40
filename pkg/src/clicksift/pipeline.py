"""End-to-end flows: scan, train, calibrate, evaluate.

Each package is analyzed independently (gate, dataflow, slicing, feature
extraction); a shared read-only model scores the resulting vectors. A
soft per-package deadline is checked between stages so a pathological
package reports Timeout instead of stalling the run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from . import corpus, detector, features, gate
from .dataflow import build_icfg, compute_chains
from .ir import ApiCatalog, ParseError, default_catalog, parse_package
from .slicer import SliceLimits, locate_click_sites, site_ddgs

NAMED_FIVE_SUBSET = (0, 1, 3, 4, 5)  # axis, view size, rand axis, ddg size, rand condition


class PackageTimeout(Exception):
    pass


def _check_deadline(deadline) -> None:
    if deadline is not None and time.monotonic() > deadline:
        raise PackageTimeout()


@dataclass
class Analysis:
    decision: gate.GateDecision
    site_features: list  # (ClickSite, FeatureVector)


def analyze_package(pkg, catalog: ApiCatalog | None = None,
                    gate_config: gate.GateConfig | None = None,
                    limits: SliceLimits = SliceLimits(),
                    deadline=None) -> Analysis:
    """Gate, slice, and featurize one parsed package."""
    catalog = catalog or default_catalog()
    gate_config = gate_config or gate.GateConfig()
    decision = gate.apply_gate(pkg, gate_config.ad_libraries, gate_config.rules)
    if decision.verdict is gate.Verdict.Skip:
        return Analysis(decision=decision, site_features=[])
    _check_deadline(deadline)
    icfg = build_icfg(pkg)
    chains = compute_chains(icfg)
    _check_deadline(deadline)
    sites = locate_click_sites(pkg, icfg, chains, catalog, decision.ad_views)
    out = []
    for site in sites:
        _check_deadline(deadline)
        axis_ddg, cond_ddg = site_ddgs(icfg, chains, site, catalog, limits)
        out.append((site, features.extract_features(site, axis_ddg, cond_ddg, catalog)))
    return Analysis(decision=decision, site_features=out)


# ---------------------------------------------------------------------------
# Scanning


@dataclass
class ScanOptions:
    catalog: ApiCatalog = field(default_factory=default_catalog)
    gate_config: gate.GateConfig = field(default_factory=gate.GateConfig)
    limits: SliceLimits = SliceLimits()
    threshold: float | None = None  # overrides the model's calibrated t
    timeout_ms: int = 300_000


def scan_one(path, model: detector.VaeModel, options: ScanOptions | None = None) -> dict:
    """Scan one .ir file into a report entry (never raises)."""
    options = options or ScanOptions()
    started = time.monotonic()
    deadline = started + options.timeout_ms / 1000.0
    entry = {
        "package_id": Path(path).stem,
        "path": str(path),
        "gate": None,
        "sites": [],
        "app_label": "Benign",
        "fraud_locations": [],
        "error": None,
        "timed_out": False,
        "elapsed_ms": 0.0,
    }
    try:
        text = Path(path).read_text(encoding="utf-8")
        pkg = parse_package(text)
        entry["package_id"] = pkg.package_id
        analysis = analyze_package(
            pkg, options.catalog, options.gate_config, options.limits, deadline
        )
        entry["gate"] = {
            "verdict": analysis.decision.verdict.value,
            "reason": analysis.decision.reason.value,
            "ad_views": sorted(analysis.decision.ad_views),
        }
        verdicts = []
        for site, fv in analysis.site_features:
            weighted = features.apply_normalization(model.norm, fv)
            verdict = detector.classify(
                model, weighted, site_id=site.site_id(),
                location=site.location(), threshold=options.threshold,
            )
            verdicts.append(verdict)
            entry["sites"].append({
                "site_id": verdict.site_id,
                "location": verdict.location,
                "target_view": site.target_view,
                "raw": {n: int(v) for n, v in
                        zip(features.FEATURE_NAMES, fv.to_array())},
                "weighted": [float(x) for x in weighted],
                "oversized": bool(fv.oversized),
                "score": verdict.score,
                "label": verdict.label,
                "threshold": verdict.threshold,
            })
        app = detector.aggregate_app_verdict(verdicts)
        entry["app_label"] = app.label
        entry["fraud_locations"] = app.fraud_locations
    except PackageTimeout:
        entry["timed_out"] = True
    except (OSError, ParseError, detector.DetectorError) as exc:
        entry["error"] = str(exc)
    entry["elapsed_ms"] = (time.monotonic() - started) * 1000.0
    return entry


def scan_paths(paths, model: detector.VaeModel, options: ScanOptions | None = None,
               jobs: int = 1) -> dict:
    """Scan many files, optionally in a process pool; report sorted by id."""
    options = options or ScanOptions()
    if jobs <= 1:
        entries = [scan_one(p, model, options) for p in paths]
    else:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(scan_one, p, model, options) for p in paths]
            entries = [f.result() for f in futures]
    entries.sort(key=lambda e: e["package_id"])
    return {
        "entries": entries,
        "summary": summarize(entries, threshold=options.threshold),
    }


def summarize(entries, threshold=None) -> dict:
    n_fraud = sum(1 for e in entries if e["app_label"] == "Fraud")
    return {
        "n_packages": len(entries),
        "n_fraud_apps": n_fraud,
        "n_errors": sum(1 for e in entries if e["error"]),
        "n_timeouts": sum(1 for e in entries if e["timed_out"]),
        "threshold_override": threshold,
    }


# ---------------------------------------------------------------------------
# Corpus-level flows


def collect_vectors(ir_dir, catalog=None, gate_config=None,
                    limits: SliceLimits = SliceLimits()):
    """Per-file feature vectors for every .ir package under a directory.

    Returns (rows, errors); each row is (filename, [FeatureVector, ...]).
    """
    rows = []
    errors = []
    for path in sorted(Path(ir_dir).glob("*.ir")):
        try:
            pkg = parse_package(path.read_text(encoding="utf-8"))
            analysis = analyze_package(pkg, catalog, gate_config, limits)
            rows.append((path.name, [fv for _, fv in analysis.site_features]))
        except ParseError as exc:
            errors.append((path.name, str(exc)))
    return rows, errors


def train_on_benign_dir(benign_dir, config: detector.TrainConfig | None = None,
                        catalog=None, gate_config=None,
                        limits: SliceLimits = SliceLimits()) -> detector.VaeModel:
    """Gate+slice+extract a benign corpus, fit weights, train the detector."""
    config = config or detector.TrainConfig()
    rows, errors = collect_vectors(benign_dir, catalog, gate_config, limits)
    vectors = [fv for _, fvs in rows for fv in fvs]
    if len(vectors) < config.min_samples:
        raise detector.DetectorError(
            f"need at least {config.min_samples} usable benign vectors, "
            f"got {len(vectors)} from {benign_dir}"
        )
    raw = features.vectors_to_matrix(vectors)
    norm = features.fit_normalization(raw)
    weighted = norm.scale(raw) * norm.weights
    return detector.train(weighted, config=config, norm=norm)


def labeled_vectors(labeled_dir, catalog=None, gate_config=None,
                    limits: SliceLimits = SliceLimits()):
    """Raw matrix + 0/1 labels + per-site metadata for a labeled corpus dir."""
    manifest = corpus.load_manifest(Path(labeled_dir) / corpus.MANIFEST_NAME)
    raw_rows = []
    labels = []
    meta = []
    for filename, label, strategy in manifest:
        pkg = parse_package((Path(labeled_dir) / filename).read_text(encoding="utf-8"))
        analysis = analyze_package(pkg, catalog, gate_config, limits)
        for site, fv in analysis.site_features:
            raw_rows.append(fv.to_array())
            labels.append(1 if label == "fraud" else 0)
            meta.append({
                "file": filename,
                "site_id": site.site_id(),
                "location": site.location(),
                "strategy": strategy,
            })
    if not raw_rows:
        raise ValueError(f"no usable sites found under {labeled_dir}")
    return np.array(raw_rows), np.array(labels, dtype=np.int64), meta


def weighted_matrix(model: detector.VaeModel, raw: np.ndarray) -> np.ndarray:
    return model.norm.scale(raw) * model.norm.weights


@dataclass
class Metrics:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f_score(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def as_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "precision": self.precision, "recall": self.recall,
            "f_score": self.f_score,
        }


def metrics_from_predictions(predicted, labels) -> Metrics:
    predicted = np.asarray(predicted, dtype=bool)
    labels = np.asarray(labels, dtype=bool)
    return Metrics(
        tp=int(np.sum(predicted & labels)),
        fp=int(np.sum(predicted & ~labels)),
        fn=int(np.sum(~predicted & labels)),
        tn=int(np.sum(~predicted & ~labels)),
    )


def evaluate_labeled(labeled_dir, model: detector.VaeModel,
                     threshold: float | None = None,
                     catalog=None, gate_config=None) -> dict:
    """Site- and app-level metrics of a model over a labeled corpus."""
    raw, labels, meta = labeled_vectors(labeled_dir, catalog, gate_config)
    t = threshold if threshold is not None else model.threshold
    if t is None:
        raise detector.DetectorError("model has no calibrated threshold")
    scores = detector.score_many(model, weighted_matrix(model, raw))
    predicted = scores > t
    site_metrics = metrics_from_predictions(predicted, labels == 1)

    by_file = {}
    for flag, lab, m in zip(predicted, labels, meta):
        rec = by_file.setdefault(m["file"], {"fraud": False, "label": int(lab)})
        rec["fraud"] = rec["fraud"] or bool(flag)
    app_pred = [rec["fraud"] for rec in by_file.values()]
    app_labels = [bool(rec["label"]) for rec in by_file.values()]
    app_metrics = metrics_from_predictions(app_pred, app_labels)

    roc = detector.roc_curve(scores, labels)
    return {
        "threshold": t,
        "site": site_metrics.as_dict(),
        "app": app_metrics.as_dict(),
        "auc": roc.auc,
        "scores": [float(s) for s in scores],
        "labels": [int(x) for x in labels],
        "meta": meta,
    }


def calibrate_on_dir(labeled_dir, model: detector.VaeModel,
                     catalog=None, gate_config=None) -> detector.VaeModel:
    raw, labels, _ = labeled_vectors(labeled_dir, catalog, gate_config)
    return detector.calibrate(model, weighted_matrix(model, raw), labels)


def ablation_masks(sizes=range(2, 8), n_features: int = features.N_FEATURES):
    for k in sizes:
        yield from combinations(range(n_features), k)


def run_ablation(benign_dir, labeled_dir, config=None, masks=None,
                 catalog=None, gate_config=None) -> list:
    """Retrain per feature subset; AUC per mask on the labeled corpus."""
    rows, _ = collect_vectors(benign_dir, catalog, gate_config)
    train_raw = features.vectors_to_matrix([fv for _, fvs in rows for fv in fvs])
    eval_raw, eval_labels, _ = labeled_vectors(labeled_dir, catalog, gate_config)
    masks = list(masks) if masks is not None else list(ablation_masks())
    return detector.ablate(train_raw, eval_raw, eval_labels, masks, config=config)
