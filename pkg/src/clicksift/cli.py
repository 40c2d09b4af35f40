"""Command-line interface: gen / train / eval / scan / dump.

Exit codes for `scan`: 0 when nothing fraudulent was found, 2 when at
least one package is flagged, 1 on operational errors. Config files can
also be supplied through CLICKSIFT_CATALOG and CLICKSIFT_GATE_CONFIG.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import corpus, detector, gate, pipeline
from .dataflow import build_icfg, compute_chains, dump_cfg, dump_chains, solver_backend
from .ir import default_catalog, load_catalog, parse_package
from .slicer import dump_ddg, dump_ddg_dot, locate_click_sites, site_ddgs


def _load_catalog(args):
    path = getattr(args, "catalog", None) or os.environ.get("CLICKSIFT_CATALOG")
    return load_catalog(path) if path else default_catalog()


def _load_gate_config(args):
    path = getattr(args, "gate_config", None) or os.environ.get("CLICKSIFT_GATE_CONFIG")
    return gate.load_gate_config(path) if path else gate.GateConfig()


def _add_config_flags(p):
    p.add_argument("--catalog", help="API catalog file (overrides CLICKSIFT_CATALOG)")
    p.add_argument("--gate-config", help="gate config JSON (overrides CLICKSIFT_GATE_CONFIG)")


def _parse_mix(text: str) -> dict:
    mix = {}
    for part in text.split(","):
        name, _, value = part.partition("=")
        mix[name.strip()] = float(value)
    return mix


def _expand_paths(paths) -> list:
    out = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            out.extend(sorted(path.glob("*.ir")))
        else:
            out.append(path)
    return out


def cmd_gen(args) -> int:
    spec = corpus.GenSpec(
        seed=args.seed,
        n_benign=args.benign,
        n_fraud=args.fraud,
        sites_per_package=args.sites,
        max_dead_stmts=args.max_dead,
        max_wrapper_depth=args.max_wrapper,
        max_decoy_views=args.max_decoys,
    )
    if args.mix:
        spec.mix = _parse_mix(args.mix)
    rows = corpus.generate(spec, args.out)
    print(f"wrote {len(rows)} packages + {corpus.MANIFEST_NAME} to {args.out}")
    return 0


def cmd_train(args) -> int:
    config = detector.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        beta=args.beta,
        seed=args.seed,
        hidden_dim=args.hidden,
        latent_dim=args.latent,
    )
    model = pipeline.train_on_benign_dir(
        args.benign, config=config,
        catalog=_load_catalog(args), gate_config=_load_gate_config(args),
    )
    detector.save_model(model, args.out)
    print(f"trained on {args.benign}, model written to {args.out} "
          f"(threshold uncalibrated, solver backend: {solver_backend()})")
    return 0


def cmd_eval(args) -> int:
    model = detector.load_model(args.model)
    catalog = _load_catalog(args)
    gate_config = _load_gate_config(args)

    if args.calibrate:
        model = pipeline.calibrate_on_dir(args.labeled, model, catalog, gate_config)
        detector.save_model(model, args.calibrate)
        print(f"calibrated threshold {model.threshold:.6g} -> {args.calibrate}")

    report = pipeline.evaluate_labeled(
        args.labeled, model, catalog=catalog, gate_config=gate_config
    )
    if args.ablate is not None:
        sizes = [int(s) for s in args.ablate.split(",")] if args.ablate else range(2, 8)
        masks = pipeline.ablation_masks(sizes=sizes)
        entries = pipeline.run_ablation(
            args.benign or args.labeled, args.labeled, masks=masks,
            config=model.config, catalog=catalog, gate_config=gate_config,
        )
        by_size = {}
        for e in entries:
            by_size.setdefault(len(e.mask), []).append(e)
        report["ablation"] = {
            "best_by_size": {
                str(k): max(v, key=lambda e: e.auc).auc for k, v in sorted(by_size.items())
            },
            "entries": [{"mask": list(e.mask), "auc": e.auc} for e in entries],
        }

    if args.json:
        json.dump(report, sys.stdout, sort_keys=True)
        print()
    else:
        site = report["site"]
        app = report["app"]
        print(f"threshold {report['threshold']:.6g}  auc {report['auc']:.4f}")
        print(f"site  precision {site['precision']:.3f}  recall {site['recall']:.3f}  "
              f"f-score {site['f_score']:.3f}")
        print(f"app   precision {app['precision']:.3f}  recall {app['recall']:.3f}  "
              f"f-score {app['f_score']:.3f}")
        if args.ablate:
            for size, auc in report["ablation"]["best_by_size"].items():
                print(f"best auc with {size} features: {auc:.4f}")
    return 0


def cmd_scan(args) -> int:
    model = detector.load_model(args.model)
    if model.threshold is None and args.threshold is None:
        print("error: model is uncalibrated and no --threshold given", file=sys.stderr)
        return 1
    options = pipeline.ScanOptions(
        catalog=_load_catalog(args),
        gate_config=_load_gate_config(args),
        threshold=args.threshold,
        timeout_ms=args.timeout_ms,
    )
    paths = _expand_paths(args.paths)
    if not paths:
        print("error: no input files", file=sys.stderr)
        return 1
    report = pipeline.scan_paths(paths, model, options, jobs=args.jobs)

    if args.csv:
        from .features import CSV_HEADER
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(",".join(CSV_HEADER) + "\n")
            for e in report["entries"]:
                for s in e["sites"]:
                    row = ([s["site_id"]]
                           + [str(s["raw"][n]) for n in
                              ("axis_api", "view_size_api", "const_count", "rand_axis",
                               "ddg_size", "rand_condition", "sys_api")]
                           + [repr(x) for x in s["weighted"]]
                           + [str(int(s["oversized"]))])
                    fh.write(",".join(row) + "\n")

    if args.json:
        json.dump(report, sys.stdout, sort_keys=True)
        print()
    else:
        for e in report["entries"]:
            if e["error"]:
                status = f"error: {e['error']}"
            elif e["timed_out"]:
                status = "timeout"
            elif e["gate"] and e["gate"]["verdict"] == "Skip":
                status = f"skipped ({e['gate']['reason']})"
            elif e["app_label"] == "Fraud":
                status = "FRAUD at " + ", ".join(e["fraud_locations"])
            else:
                status = f"benign ({len(e['sites'])} sites)"
            print(f"{e['package_id']:<24} {e['elapsed_ms']:8.1f} ms  {status}")
        s = report["summary"]
        print(f"-- {s['n_packages']} packages, {s['n_fraud_apps']} fraudulent, "
              f"{s['n_errors']} errors, {s['n_timeouts']} timeouts")

    if any(e["error"] for e in report["entries"]):
        return 1
    return 2 if report["summary"]["n_fraud_apps"] else 0


def cmd_dump(args) -> int:
    pkg = parse_package(Path(args.file).read_text(encoding="utf-8"))
    catalog = _load_catalog(args)
    gate_config = _load_gate_config(args)
    icfg = build_icfg(pkg)
    chains = compute_chains(icfg)
    if args.cfg:
        sys.stdout.write(dump_cfg(icfg))
    if args.chains:
        sys.stdout.write(dump_chains(chains))
    if args.ddg or args.dot:
        decision = gate.apply_gate(pkg, gate_config.ad_libraries, gate_config.rules)
        sites = locate_click_sites(pkg, icfg, chains, catalog, decision.ad_views)
        for site in sites:
            axis_ddg, cond_ddg = site_ddgs(icfg, chains, site, catalog)
            print(f"site {site.site_id()} view={site.target_view}")
            if args.dot:
                sys.stdout.write(dump_ddg_dot(axis_ddg, "axis"))
                sys.stdout.write(dump_ddg_dot(cond_ddg, "cond"))
            else:
                sys.stdout.write("axis " + dump_ddg(axis_ddg))
                sys.stdout.write("cond " + dump_ddg(cond_ddg))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clicksift")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a labeled synthetic corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--benign", type=int, default=0)
    p.add_argument("--fraud", type=int, default=0)
    p.add_argument("--mix", help="e.g. randomcoords=0.5,randomtiming=0.5")
    p.add_argument("--out", required=True)
    p.add_argument("--sites", type=int, default=1)
    p.add_argument("--max-dead", type=int, default=12)
    p.add_argument("--max-wrapper", type=int, default=2)
    p.add_argument("--max-decoys", type=int, default=2)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the detector on a benign corpus")
    p.add_argument("--benign", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--beta", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--latent", type=int, default=3)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate against a labeled corpus")
    p.add_argument("--labeled", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--calibrate", metavar="OUT",
                   help="write a copy of the model with the optimal threshold")
    p.add_argument("--ablate", nargs="?", const="", metavar="SIZES",
                   help="retrain per feature subset and report AUC per size "
                        "(optionally restrict to sizes, e.g. --ablate 2,5,7)")
    p.add_argument("--benign", help="benign training dir for --ablate retraining")
    p.add_argument("--json", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("scan", help="scan packages with a trained model")
    p.add_argument("paths", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--json", action="store_true")
    p.add_argument("--csv", metavar="FILE", help="also write per-site feature vectors as CSV")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--timeout-ms", type=int, default=300_000)
    _add_config_flags(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("dump", help="debug dumps: CFG, chains, dependency graphs")
    p.add_argument("file")
    p.add_argument("--cfg", action="store_true")
    p.add_argument("--chains", action="store_true")
    p.add_argument("--ddg", action="store_true")
    p.add_argument("--dot", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_dump)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, detector.DetectorError, gate.GateConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
