"""Command-line entry points: explain, evaluate, selftest.

explain runs the full pipeline on one image and writes the saliency map
(8-bit PNG + raw float32 file), an overlay, and a run manifest. evaluate
scores an existing map with the insertion/deletion curves. selftest runs
the built-in oracle checks. Exit codes: 0 success, 1 usage or file error,
2 scorer failure, 3 degenerate result.
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys
from pathlib import Path

import numpy as np

from . import selftest as selftest_checks
from .aggregation import aggregate, select_candidates
from .de import DEConfig, evolve
from .errors import (
    DegenerateOracleError,
    DegenerateSaliencyError,
    NonFiniteLogitError,
    SaliencyFormatError,
    ScorerUnavailableError,
    ShapeMismatchError,
)
from .metrics import MetricConfig, curve_to_csv, deletion_curve, diff_auc, insertion_curve, write_report
from .scorer import BridgeScorer, Scorer, make_disc_oracle, make_two_blob_oracle
from .smio import (
    load_image,
    read_sm_raw,
    sha256_file,
    write_manifest,
    write_overlay_png,
    write_sm_png,
    write_sm_raw,
)

BRIDGE_ENV = "DECAM_BRIDGE_CMD"
SCORER_FAILURES = (
    ScorerUnavailableError,
    ShapeMismatchError,
    NonFiniteLogitError,
    DegenerateOracleError,
)


def resolve_scorer(spec: str | None, image: np.ndarray | None) -> Scorer:
    """Build a scorer from its CLI spec string.

    disc:ROW,COL,RADIUS and twoblob:R1,C1,RAD1,R2,C2,RAD2 are synthetic
    oracles planted on the run's image; bridge:CMD launches an external
    model process (DECAM_BRIDGE_CMD is used when no spec is given).
    """
    if spec is None:
        env = os.environ.get(BRIDGE_ENV)
        if not env:
            raise ValueError(f"no --scorer given and {BRIDGE_ENV} is not set")
        return BridgeScorer(env)
    kind, _, rest = spec.partition(":")
    if kind == "bridge":
        command = rest or os.environ.get(BRIDGE_ENV, "")
        if not command:
            raise ValueError(f"bridge scorer needs a command (or set {BRIDGE_ENV})")
        return BridgeScorer(command)
    if kind == "disc":
        if image is None:
            raise ValueError("synthetic oracles need --image")
        row, col, radius = (float(v) for v in rest.split(","))
        return make_disc_oracle(image, (int(row), int(col)), radius)
    if kind == "twoblob":
        if image is None:
            raise ValueError("synthetic oracles need --image")
        r1, c1, rad1, r2, c2, rad2 = (float(v) for v in rest.split(","))
        return make_two_blob_oracle(image, (int(r1), int(c1)), rad1, (int(r2), int(c2)), rad2)
    raise ValueError(f"unknown scorer spec {spec!r} (expected disc:/twoblob:/bridge:)")


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def cmd_explain(args) -> int:
    image = load_image(args.image)
    height, width = image.shape[:2]
    scorer = resolve_scorer(args.scorer, image)
    if isinstance(scorer, BridgeScorer) and args.alpha is None:
        print(
            "warning: --alpha not set; the sparsity weight must match the "
            "model's logit scale (default 2.0 suits logits in [0, 1])",
            file=sys.stderr,
        )
    cfg = DEConfig(
        cr=args.cr,
        f=args.f,
        k=args.k,
        max_iter=args.max_iter,
        pop_size=args.pop,
        alpha=2.0 if args.alpha is None else args.alpha,
        seed=args.seed,
        batch_size=args.batch_size,
    )
    started = _timestamp()
    with scorer:
        pop, trace = evolve(image, scorer, args.class_index, cfg, jobs=args.jobs)
        candidates = select_candidates(pop)
        sm = aggregate(candidates, height, width)

        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        png_path = out_dir / "saliency.png"
        raw_path = out_dir / "saliency.raw"
        overlay_path = out_dir / "overlay.png"
        manifest_path = out_dir / "manifest.txt"
        write_sm_png(png_path, sm.values)
        write_sm_raw(raw_path, sm.values)
        outputs = [png_path, raw_path]
        if not args.no_overlay:
            write_overlay_png(overlay_path, image, sm.values)
            outputs.append(overlay_path)
        write_manifest(
            manifest_path,
            {
                "image": args.image,
                "image_sha256": sha256_file(args.image),
                "height": height,
                "width": width,
                "scorer": scorer.describe(),
                "class_index": args.class_index,
                "cr": cfg.cr,
                "f": cfg.f,
                "k": cfg.k,
                "max_iter": cfg.max_iter,
                "pop_size": cfg.pop_size,
                "alpha": cfg.alpha,
                "seed": cfg.seed,
                "batch_size": cfg.batch_size,
                "jobs": args.jobs,
                "started": started,
                "finished": _timestamp(),
                "scorer_evals": trace.scorer_evals,
                "wall_time_s": f"{trace.wall_time:.3f}",
                "best_fitness": f"{max(trace.max_fitness):.10g}",
                "candidates": len(candidates),
                "outputs": ",".join(str(p) for p in outputs),
            },
        )
    print(f"best_fitness={max(trace.max_fitness):.6g}")
    print(f"scorer_evals={trace.scorer_evals}")
    print(f"candidates={len(candidates)}")
    for path in outputs + [manifest_path]:
        print(f"wrote {path}")
    return 0


def cmd_evaluate(args) -> int:
    sm_values = read_sm_raw(args.sm)
    image = load_image(args.image)
    if sm_values.shape != image.shape[:2]:
        raise SaliencyFormatError(
            f"saliency map is {sm_values.shape}, image is {image.shape[:2]}"
        )
    scorer = resolve_scorer(args.scorer, image)
    cfg = MetricConfig(
        steps=args.steps,
        blur_sigma=args.blur_sigma,
        blur_kernel=args.blur_kernel,
        batch_size=args.batch_size,
    )
    with scorer:
        ins = insertion_curve(image, sm_values, scorer, args.class_index, cfg)
        dele = deletion_curve(image, sm_values, scorer, args.class_index, cfg)
        report = diff_auc(image, sm_values, scorer, args.class_index, cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curve_to_csv(ins, out_dir / "insertion.csv")
    curve_to_csv(dele, out_dir / "deletion.csv")
    write_report(report, out_dir / "report.txt")
    print(f"auc_insertion={report.auc_insertion:.6g}")
    print(f"auc_deletion={report.auc_deletion:.6g}")
    print(f"diff_auc={report.diff_auc:.6g}")
    for name in ("insertion.csv", "deletion.csv", "report.txt"):
        print(f"wrote {out_dir / name}")
    return 0


def cmd_selftest(args) -> int:
    bridge = None
    if args.scorer is not None or os.environ.get(BRIDGE_ENV):
        scorer = resolve_scorer(args.scorer, None) if args.scorer else resolve_scorer(None, None)
        if isinstance(scorer, BridgeScorer):
            bridge = scorer
        else:
            scorer.close()
    failed = 0
    try:
        for name, ok, detail in selftest_checks.run_all(bridge, args.class_index):
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
            failed += 0 if ok else 1
    finally:
        if bridge is not None:
            bridge.close()
    print(f"{'all checks passed' if not failed else f'{failed} check(s) failed'}")
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decam",
        description="Black-box saliency maps via differential evolution over ellipse masks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("explain", help="search masks and write a saliency map")
    ex.add_argument("--image", required=True, help="input PNG (8-bit, 1 or 3 channels)")
    ex.add_argument("--class", dest="class_index", type=int, required=True,
                    help="target class index")
    ex.add_argument("--scorer", help="disc:R,C,RAD | twoblob:... | bridge:CMD")
    ex.add_argument("--alpha", type=float, default=None,
                    help="sparsity weight (must match the model's logit scale)")
    ex.add_argument("--cr", type=float, default=0.2, help="crossover probability")
    ex.add_argument("--f", type=float, default=0.8, help="differential weight")
    ex.add_argument("--k", type=int, default=10, help="ellipses per candidate")
    ex.add_argument("--max-iter", type=int, default=200, help="generations")
    ex.add_argument("--pop", type=int, default=200, help="population size")
    ex.add_argument("--seed", type=int, default=0, help="RNG seed")
    ex.add_argument("--batch-size", type=int, default=32, help="images per scorer call")
    ex.add_argument("--jobs", type=int, default=1, help="max concurrent scorer batches")
    ex.add_argument("--out-dir", default="decam_out")
    ex.add_argument("--no-overlay", action="store_true", help="skip the overlay PNG")
    ex.set_defaults(func=cmd_explain)

    ev = sub.add_parser("evaluate", help="insertion/deletion curves for a saliency map")
    ev.add_argument("--sm", required=True, help="raw saliency file from explain")
    ev.add_argument("--image", required=True)
    ev.add_argument("--class", dest="class_index", type=int, required=True)
    ev.add_argument("--scorer", help="disc:R,C,RAD | twoblob:... | bridge:CMD")
    ev.add_argument("--steps", type=int, default=100)
    ev.add_argument("--blur-sigma", type=float, default=5.0)
    ev.add_argument("--blur-kernel", type=int, default=11)
    ev.add_argument("--batch-size", type=int, default=32)
    ev.add_argument("--out-dir", default="decam_out")
    ev.set_defaults(func=cmd_evaluate)

    st = sub.add_parser("selftest", help="run built-in correctness checks")
    st.add_argument("--scorer", help="optional bridge:CMD to cross-check the protocol")
    st.add_argument("--class", dest="class_index", type=int, default=0)
    st.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except SCORER_FAILURES as err:
        print(f"error: scorer failure: {err}", file=sys.stderr)
        return 2
    except DegenerateSaliencyError as err:
        print(f"error: degenerate result: {err}", file=sys.stderr)
        return 3
    except (SaliencyFormatError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
