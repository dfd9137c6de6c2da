"""Command-line interface.

Subcommands::

    metrics         score prediction/reference mask pairs into a CSV table
    analyze         full stability report (+ optional figures) from score CSVs
    xai             explanation layers and composite for one prediction
    xai-stability   mean/variance of uncertainty maps across fold models
    sweep           Bayesian hyperparameter search on a (built-in) objective
    splits          LOOCV or seeded k-fold plan as JSON
    report          render the standard figures from a saved report JSON

Settings resolve as explicit flags > ``--config`` JSON file > defaults.
Exit codes: 0 success, 1 usage or data errors, 2 completed with a
statistical-degeneracy warning (an all-tied rank test).  Output files
are written atomically; set NO_COLOR to suppress terminal styling.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import hpo, report as report_mod, splits as splits_mod, stability, xai
from .datamodel import (
    ScoreRecord,
    ScoreTable,
    XaiWeights,
    atomic_write_text,
    read_grayscale_image,
    read_label_mask,
    read_prob_map,
    read_score_table,
    write_score_table,
)
from .metrics import dice_per_class, iou_per_class, macro_average

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DEGENERATE = 2

_MASK_EXTENSIONS = (".png", ".txt")


def _style(s: str, code: str) -> str:
    if os.environ.get("NO_COLOR") is not None or not sys.stdout.isatty():
        return s
    return f"\x1b[{code}m{s}\x1b[0m"


@dataclass
class RunConfig:
    """Shared knobs with their documented defaults."""

    seed: int = 0
    level: float = 0.95
    n_resamples: int = 10_000
    alpha: float = 0.05
    foreground: tuple = (1, 2, 3)
    xai_weights: tuple = (1.0, 1.0, 1.0, 1.0, 1.0)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, overlaid by the config file, overlaid by explicit flags."""
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    path = getattr(args, "config", None)
    if path:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
        for key, value in data.items():
            if key in ("foreground", "xai_weights"):
                value = tuple(value)
            setattr(cfg, key, value)
    for name in known:
        flag = getattr(args, name, None)
        if flag is not None:
            setattr(cfg, name, flag)
    if len(cfg.xai_weights) != 5 or any(w < 0 for w in cfg.xai_weights):
        raise ValueError("xai_weights must be 5 non-negative numbers")
    if not cfg.foreground:
        raise ValueError("foreground class set must be non-empty")
    return cfg


def _csv_ints(text: str) -> tuple:
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints: {text!r}") from exc


def _csv_floats(text: str) -> tuple:
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def cmd_metrics(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    pred_files = {
        f for f in os.listdir(args.pred_dir) if f.lower().endswith(_MASK_EXTENSIONS)
    }
    gt_files = {
        f for f in os.listdir(args.gt_dir) if f.lower().endswith(_MASK_EXTENSIONS)
    }
    names = sorted(pred_files & gt_files)
    if not names:
        raise ValueError(
            f"no mask pairs: nothing in {args.pred_dir} matches {args.gt_dir} by filename"
        )

    if args.class_names is not None:
        class_names = [c.strip() for c in args.class_names.split(",")]
        if len(class_names) != len(cfg.foreground):
            raise ValueError(
                f"{len(class_names)} class names for {len(cfg.foreground)} foreground classes"
            )
    else:
        class_names = [f"class_{k}" for k in cfg.foreground]

    records = []
    for fold, name in enumerate(names):
        pred = read_label_mask(
            os.path.join(args.pred_dir, name), num_classes=args.num_classes
        )
        gt = read_label_mask(os.path.join(args.gt_dir, name), num_classes=args.num_classes)
        if args.num_classes is None:
            k = max(pred.num_classes, gt.num_classes)
            pred = read_label_mask(os.path.join(args.pred_dir, name), num_classes=k)
            gt = read_label_mask(os.path.join(args.gt_dir, name), num_classes=k)
        dices, ious = [], []
        for class_id, class_name in zip(cfg.foreground, class_names):
            d = dice_per_class(pred, gt, class_id)
            i = iou_per_class(pred, gt, class_id)
            dices.append(d)
            ious.append(i)
            records.append(ScoreRecord(args.model_id, fold, "dice", class_name, d))
            records.append(ScoreRecord(args.model_id, fold, "iou", class_name, i))
        records.append(ScoreRecord(args.model_id, fold, "dice", "macro", macro_average(dices)))
        records.append(ScoreRecord(args.model_id, fold, "iou", "macro", macro_average(ious)))

    table = ScoreTable(records)
    write_score_table(table, args.out)
    print(f"scored {len(names)} mask pair(s) -> {args.out} ({len(records)} rows)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def _parse_table_specs(specs) -> dict:
    tables = {}
    for spec in specs:
        label, sep, path = spec.partition("=")
        if not sep or not label or not path:
            raise ValueError(f"expected LABEL=PATH, got {spec!r}")
        if label in tables:
            raise ValueError(f"duplicate protocol label {label!r}")
        tables[label] = read_score_table(path)
    return tables


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    tables = _parse_table_specs(args.tables)
    rep = stability.build_stability_report(
        tables,
        metric=args.metric,
        class_id=args.class_id,
        level=cfg.level,
        n_resamples=cfg.n_resamples,
        alpha=cfg.alpha,
        seed=cfg.seed,
    )
    atomic_write_text(args.out, rep.to_json())
    print(f"report -> {args.out}")

    for proto in rep.protocols:
        best = max(proto.cis, key=lambda m: (proto.cis[m].mean, m))
        ci = proto.cis[best]
        line = (
            f"[{proto.protocol}] best by mean {args.metric}/{args.class_id}: "
            f"{best} {ci.mean:.4f} [{ci.lower:.4f}, {ci.upper:.4f}]"
        )
        if proto.friedman is not None:
            line += f", Friedman p = {proto.friedman.p_value:.4g}"
        print(line)
    for flip in rep.flips:
        if flip.flipped:
            desc = ", ".join(f"{p}: {w}" for p, w in sorted(flip.winners.items()))
            print(
                _style(
                    f"winner flip on {flip.metric}/{flip.class_id} ({desc})", "33"
                )
            )

    if args.plots:
        paths = report_mod.render_report_figures(rep, args.plots, args.plot_protocol)
        for name in sorted(paths):
            print(f"figure -> {paths[name]}")

    if rep.any_degenerate():
        which = [p.protocol for p in rep.protocols if p.friedman and p.friedman.all_tied]
        print(
            _style(
                f"warning: all-tied scores in protocol(s) {', '.join(which)}; "
                "rank statistics are uninformative",
                "33",
            ),
            file=sys.stderr,
        )
        return EXIT_DEGENERATE
    return EXIT_OK


# ---------------------------------------------------------------------------
# xai
# ---------------------------------------------------------------------------


def cmd_xai(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    probs = read_prob_map(args.probmap)
    image = read_grayscale_image(args.image)
    pred = read_label_mask(args.pred, num_classes=probs.num_classes)
    gt = read_label_mask(args.gt, num_classes=probs.num_classes)
    if image.shape != (probs.height, probs.width):
        raise ValueError(
            f"image shape {image.shape} does not match probability map "
            f"{(probs.height, probs.width)}"
        )

    source = gt if args.attention_source == "gt" else pred
    masks = [(source.labels == k).astype(np.int64) for k in cfg.foreground]
    dices = [dice_per_class(pred, gt, k) for k in cfg.foreground]

    layers = [
        xai.error_map(pred, gt),
        xai.uncertainty_map(probs),
        xai.morphology_map(image),
        xai.class_attention_map(masks, dices),
        xai.saliency_map(image),
    ]
    composite = xai.composite_map(layers, XaiWeights(tuple(cfg.xai_weights)))

    os.makedirs(args.out_dir, exist_ok=True)
    summary = {
        "weights": list(cfg.xai_weights),
        "foreground": list(cfg.foreground),
        "attention_source": args.attention_source,
        "dice": {str(k): d for k, d in zip(cfg.foreground, dices)},
        "layers": {},
    }
    for emap in layers + [composite]:
        path = os.path.join(args.out_dir, f"{emap.layer_id}.png")
        xai.write_map_png(emap, path)
        summary["layers"][emap.layer_id] = {
            "min": float(emap.values.min()),
            "max": float(emap.values.max()),
            "mean": float(emap.values.mean()),
        }
        print(f"layer -> {path}")
    summary_path = os.path.join(args.out_dir, "summary.json")
    atomic_write_text(summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"summary -> {summary_path}")
    return EXIT_OK


def cmd_xai_stability(args: argparse.Namespace) -> int:
    names = sorted(f for f in os.listdir(args.maps_dir) if f.endswith(".pmap"))
    if len(names) < 2:
        raise ValueError(f"{args.maps_dir}: need at least 2 .pmap files, found {len(names)}")
    maps = [
        xai.uncertainty_map(read_prob_map(os.path.join(args.maps_dir, name)))
        for name in names
    ]
    result = xai.uncertainty_stability(maps)

    os.makedirs(args.out_dir, exist_ok=True)
    mean_path = os.path.join(args.out_dir, "mean.png")
    xai.write_map_png(result.mean_map, mean_path)
    var = result.variance_map
    var_peak = float(var.max())
    var_display = var / var_peak if var_peak > 0 else var
    var_path = os.path.join(args.out_dir, "variance.png")
    xai.write_map_png(xai.ExplanationMap(var_display, result.mean_map.layer_id), var_path)

    summary = {
        "folds": names,
        "n_folds": result.n_folds,
        "mean_of_mean": float(result.mean_map.values.mean()),
        "variance_max": var_peak,
        "variance_mean": float(var.mean()),
        "variance_png_scale": var_peak if var_peak > 0 else 1.0,
    }
    summary_path = os.path.join(args.out_dir, "summary.json")
    atomic_write_text(summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"mean -> {mean_path}")
    print(f"variance -> {var_path} (PNG scaled by 1/{summary['variance_png_scale']:.3g})")
    print(f"summary -> {summary_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if not args.objective.startswith("builtin:"):
        raise ValueError(
            f"objective {args.objective!r} not supported; use builtin:<name> with "
            f"one of {sorted(hpo.BUILTIN_OBJECTIVES)}"
        )
    space, objective = hpo.builtin_objective(args.objective.removeprefix("builtin:"))
    if args.space:
        with open(args.space, encoding="utf-8") as handle:
            space = hpo.space_from_dict(json.load(handle))

    records = hpo.run_sweep(
        space,
        objective,
        budget=args.budget,
        init_random=args.init,
        seed=cfg.seed,
        out_csv=args.out,
        n_candidates=args.candidates,
        refine_length_scale=args.refine_length_scale,
    )
    ok = [r for r in records if not r.failed]
    failed = len(records) - len(ok)
    if not ok:
        raise ValueError("every trial failed; nothing to report")
    best = max(ok, key=lambda r: r.score)
    print(f"trials -> {args.out} ({len(records)} rows, {failed} failed)")
    print(
        _style(f"best score {best.score:.6g}", "32")
        + f" at trial {best.trial_index}: {json.dumps(best.point, sort_keys=True)}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------


def cmd_splits(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if args.loocv:
        plan = splits_mod.make_loocv(args.n)
    else:
        if args.k is None:
            raise ValueError("either --loocv or --k K is required")
        plan = splits_mod.make_kfold(args.n, args.k, cfg.seed)
    payload = plan.to_json()
    if args.out:
        atomic_write_text(args.out, payload)
        print(f"plan -> {args.out}")
    else:
        sys.stdout.write(payload)
    return EXIT_OK


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def cmd_report(args: argparse.Namespace) -> int:
    with open(args.report, encoding="utf-8") as handle:
        rep = stability.StabilityReport.from_json(handle.read())
    paths = report_mod.render_report_figures(rep, args.out_dir, args.protocol)
    for name in sorted(paths):
        print(f"figure -> {paths[name]}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """argparse, but usage errors exit 1 (2 is the degeneracy code)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _add_config_flags(parser, *, seed=False, stats=False, foreground=False, weights=False):
    parser.add_argument("--config", help="JSON config file (flags still win)")
    if seed:
        parser.add_argument("--seed", type=int, default=None, help="master RNG seed")
    if stats:
        parser.add_argument("--level", type=float, default=None,
                            help="CI level (default 0.95)")
        parser.add_argument("--resamples", type=int, default=None, dest="n_resamples",
                            help="bootstrap resamples (default 10000)")
        parser.add_argument("--alpha", type=float, default=None,
                            help="Nemenyi significance level, 0.05 or 0.10")
    if foreground:
        parser.add_argument("--foreground", type=_csv_ints, default=None,
                            help="foreground class ids (default 1,2,3)")
    if weights:
        parser.add_argument("--weights", type=_csv_floats, default=None,
                            dest="xai_weights",
                            help="five layer weights for the composite map")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="segstab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("metrics", help="score prediction/reference mask pairs")
    p.add_argument("--pred-dir", required=True, help="directory of predicted masks")
    p.add_argument("--gt-dir", required=True, help="directory of reference masks")
    p.add_argument("--out", required=True, help="output score CSV")
    p.add_argument("--model-id", default="model", help="model column value")
    p.add_argument("--num-classes", type=int, default=None,
                   help="label alphabet size (default: inferred per pair)")
    p.add_argument("--class-names", default=None,
                   help="comma-separated names for the foreground classes")
    _add_config_flags(p, foreground=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("analyze", help="stability report from score CSVs")
    p.add_argument("tables", nargs="+", metavar="LABEL=PATH",
                   help="protocol label and score CSV, e.g. loocv=scores.csv")
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--metric", default="dice", help="metric to analyze (default dice)")
    p.add_argument("--class", default="macro", dest="class_id",
                   help="class slice to analyze (default macro)")
    p.add_argument("--plots", default=None, help="also render figures into this directory")
    p.add_argument("--plot-protocol", default=None,
                   help="protocol to plot (default: first listed)")
    _add_config_flags(p, seed=True, stats=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("xai", help="explanation layers for one prediction")
    p.add_argument("--image", required=True, help="input image PNG (read as grayscale)")
    p.add_argument("--probmap", required=True, help="PMAP probability map")
    p.add_argument("--pred", required=True, help="predicted label mask (PNG or text)")
    p.add_argument("--gt", required=True, help="reference label mask (PNG or text)")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--attention-source", choices=("gt", "pred"), default="gt",
                   help="which mask provides the attention regions (default gt)")
    _add_config_flags(p, foreground=True, weights=True)
    p.set_defaults(func=cmd_xai)

    p = sub.add_parser("xai-stability", help="mean/variance of fold uncertainty maps")
    p.add_argument("--maps-dir", required=True, help="directory of per-fold .pmap files")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--config", help="JSON config file (unused keys ignored)")
    p.set_defaults(func=cmd_xai_stability)

    p = sub.add_parser("sweep", help="Bayesian hyperparameter search")
    p.add_argument("--objective", required=True, help="builtin:<name>")
    p.add_argument("--space", default=None,
                   help="JSON search space (default: the objective's own)")
    p.add_argument("--budget", type=int, required=True, help="total trials")
    p.add_argument("--init", type=int, default=8, help="random warmup trials (default 8)")
    p.add_argument("--out", required=True, help="output trials CSV")
    p.add_argument("--candidates", type=int, default=hpo.DEFAULT_CANDIDATES,
                   help="EI candidate batch size (default 512)")
    p.add_argument("--refine-length-scale", action="store_true",
                   help="pick the kernel length scale by marginal likelihood")
    _add_config_flags(p, seed=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("splits", help="emit a cross-validation plan as JSON")
    p.add_argument("--n", type=int, required=True, help="number of samples")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--loocv", action="store_true", help="leave-one-out protocol")
    group.add_argument("--k", type=int, default=None, help="number of folds")
    p.add_argument("--out", default=None, help="output JSON (default stdout)")
    _add_config_flags(p, seed=True)
    p.set_defaults(func=cmd_splits)

    p = sub.add_parser("report", help="render figures from a saved report JSON")
    p.add_argument("--report", required=True, help="report JSON from analyze")
    p.add_argument("--out-dir", required=True, help="output directory for SVGs")
    p.add_argument("--protocol", default=None, help="protocol to plot (default: first)")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"segstab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
