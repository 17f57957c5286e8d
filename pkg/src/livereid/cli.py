"""Command line front end.

Subcommands:

* ``gen``      write a synthetic world into a data directory
* ``run``      process a data directory with one gallery mode
* ``eval``     recompute metrics from a stored run
* ``sweep-n``  run one mode over several tracklet length caps
* ``compare``  run all three gallery modes on the same data

Every command writes a ``manifest.json`` capturing its full
configuration; re-running the command with the flags recorded there
reproduces all output files byte for byte. Exit codes: 0 on success,
1 on invalid inputs or configuration, 2 on runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from livereid.core import (
    ConfigurationError,
    GenerationError,
    LiveReidError,
    Mode,
    ValidationError,
)
from livereid.evaluator import (
    EvalCurve,
    RunSummary,
    build_curve,
    per_query_metrics,
    summarize,
)
from livereid.ingest import (
    Dataset,
    atomic_write_bytes,
    atomic_write_text,
    load_dataset,
    write_dataset,
)
from livereid.pipeline import PipelineConfig, RunResult, load_run, run, save_run
from livereid.selector import SCORER_NAMES
from livereid.synthworld import WorldConfig, generate
from livereid.tracker import TRACKERS

FORMAT_VERSION = 1
MANIFEST_FILE = "manifest.json"
CURVE_FILE = "curve.csv"
CURVE_FIGURE = "curve.png"
SUMMARY_FILE = "summary.json"
SWEEP_FILE = "sweep.csv"
SWEEP_FIGURE = "sweep.png"
COMPARE_FILE = "compare.csv"
COMPARE_FIGURE = "compare.png"
DEFAULT_N_VALUES = "1,5,10,20,40,80"

_SWEEP_COLUMNS = [
    "n", "fr", "tvr", "f1_star", "beta_star", "map",
    "gallery_total", "similarity_ops",
]
_COMPARE_COLUMNS = [
    "mode", "n", "fr", "tvr", "f1_star", "beta_star", "map",
    "gallery_total", "similarity_ops",
]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_manifest(out_dir: Path, command: str, payload: dict) -> None:
    doc = {"format_version": FORMAT_VERSION, "command": command, **payload}
    atomic_write_text(
        out_dir / MANIFEST_FILE, json.dumps(doc, indent=2, sort_keys=True) + "\n"
    )


def _metrics(result: RunResult, dataset: Dataset) -> tuple[EvalCurve, RunSummary, dict]:
    identity_of = {q.query_id: q.identity for q in dataset.queries}
    grid = result.config.beta_grid()
    curve = build_curve(
        result.rankings, grid, result.config.eta, dataset.ground_truth, identity_of
    )
    summary = summarize(
        curve,
        gallery_sizes=result.gallery_sizes,
        similarity_ops=result.similarity_ops,
    )
    per_query = per_query_metrics(
        result.rankings, grid, result.config.eta, dataset.ground_truth, identity_of
    )
    return curve, summary, per_query


def _curve_csv(curve: EvalCurve) -> str:
    lines = ["beta,fr,tvr,f1"]
    for p in curve.points:
        lines.append(
            ",".join([_cell(p.beta), _cell(p.fr), _cell(p.tvr), _cell(p.f1)])
        )
    return "\n".join(lines) + "\n"


def _summary_json(result: RunResult, summary: RunSummary, per_query: dict) -> str:
    payload = {
        "format_version": FORMAT_VERSION,
        "config": result.config.to_dict(),
        "n_chunks": len(result.chunks),
        "n_queries": len({r.query_id for r in result.rankings}),
        "gallery_sizes": list(summary.gallery_sizes),
        "gallery_total": sum(summary.gallery_sizes),
        "similarity_ops": summary.similarity_ops,
        "f1_star": summary.f1_star,
        "beta_star": summary.beta_star,
        "map": summary.map_score,
        "fr": summary.fr_at_star,
        "tvr": summary.tvr_at_star,
        "per_query": per_query,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_eval_outputs(
    out_dir: Path, result: RunResult, dataset: Dataset
) -> RunSummary:
    from livereid.report import render_curve_figure

    curve, summary, per_query = _metrics(result, dataset)
    atomic_write_text(out_dir / CURVE_FILE, _curve_csv(curve))
    atomic_write_text(out_dir / SUMMARY_FILE, _summary_json(result, summary, per_query))
    title = f"{result.config.mode.value}, n={result.config.n}"
    atomic_write_bytes(out_dir / CURVE_FIGURE, render_curve_figure(curve, title))
    return summary


def _print_summary(prefix: str, summary: RunSummary) -> None:
    def show(v):
        return "undefined" if v is None else f"{v:.4f}"

    print(
        f"{prefix}: f1_star={show(summary.f1_star)} beta_star={show(summary.beta_star)} "
        f"map={show(summary.map_score)} fr={show(summary.fr_at_star)} "
        f"tvr={show(summary.tvr_at_star)} gallery={sum(summary.gallery_sizes)} "
        f"ops={summary.similarity_ops}"
    )


def _config_from_args(
    args: argparse.Namespace, *, mode: str | None = None, n: int | None = None
) -> PipelineConfig:
    return PipelineConfig(
        mode=Mode(mode if mode is not None else args.mode),
        n=n if n is not None else args.n,
        tau=args.tau,
        eta=args.eta,
        beta_step=args.beta_step,
        scorer=args.scorer,
        tracker=args.tracker,
        seed=args.seed,
        iou_match_threshold=args.iou_threshold,
        min_confidence=args.min_confidence,
        frame_width=args.frame_width,
        frame_height=args.frame_height,
    )


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(args: argparse.Namespace) -> int:
    world = WorldConfig(
        n_identities=args.identities,
        frames_per_video=args.frames,
        n_videos_per_camera=args.videos_per_camera,
        n_cameras=args.cameras,
        frame_width=args.frame_width,
        frame_height=args.frame_height,
        entry_rate=args.entry_rate,
        exit_rate=args.exit_rate,
        passer_fraction=args.passer_fraction,
        passer_entry_rate=args.passer_entry_rate,
        passer_exit_rate=args.passer_exit_rate,
        miss_probability=args.miss_prob,
        box_jitter_sigma=args.jitter,
        bad_crop_probability=args.p_bad,
        bad_crop_weight=args.bad_weight,
        crossing_rate=args.crossing_rate,
        embedding_dim=args.dim,
        scorer_fidelity=args.fidelity,
        n_queries=args.queries,
        seed=args.seed,
    )
    dataset = generate(world)
    out = _out_dir(args)
    write_dataset(dataset, out)
    _write_manifest(out, "gen", {"world": asdict(world), "inputs": {}})
    n_dets = sum(len(d) for d in dataset.detections.values())
    print(
        f"gen: videos={len(dataset.detections)} detections={n_dets} "
        f"gt_boxes={len(dataset.ground_truth.records)} queries={len(dataset.queries)}"
    )
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data_dir)
    config = _config_from_args(args)
    result = run(config, dataset)
    out = _out_dir(args)
    save_run(result, out)
    summary = _write_eval_outputs(out, result, dataset)
    _write_manifest(
        out, "run",
        {"config": config.to_dict(), "inputs": {"data_dir": args.data_dir}},
    )
    _print_summary(f"run mode={config.mode.value} n={config.n}", summary)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    result = load_run(args.run_dir)
    dataset = load_dataset(args.data_dir)
    out = _out_dir(args)
    summary = _write_eval_outputs(out, result, dataset)
    _write_manifest(
        out, "eval",
        {
            "config": result.config.to_dict(),
            "inputs": {"run_dir": args.run_dir, "data_dir": args.data_dir},
        },
    )
    _print_summary(f"eval mode={result.config.mode.value}", summary)
    return 0


def _parse_n_values(raw: str) -> list[int]:
    try:
        values = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise ConfigurationError(f"bad n value list: {raw!r}") from None
    if not values or any(v < 1 for v in values):
        raise ConfigurationError(f"n values must be positive integers: {raw!r}")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigurationError(f"n values must be strictly increasing: {raw!r}")
    return values


def cmd_sweep_n(args: argparse.Namespace) -> int:
    from livereid.report import render_sweep_figure

    dataset = load_dataset(args.data_dir)
    n_values = _parse_n_values(args.n_values)
    rows = []
    for n in n_values:
        config = _config_from_args(args, n=n)
        result = run(config, dataset)
        _curve, summary, _per_query = _metrics(result, dataset)
        rows.append(
            {
                "n": n,
                "fr": summary.fr_at_star,
                "tvr": summary.tvr_at_star,
                "f1_star": summary.f1_star,
                "beta_star": summary.beta_star,
                "map": summary.map_score,
                "gallery_total": sum(summary.gallery_sizes),
                "similarity_ops": summary.similarity_ops,
            }
        )
    out = _out_dir(args)
    lines = [",".join(_SWEEP_COLUMNS)]
    for row in rows:
        lines.append(",".join(_cell(row[c]) for c in _SWEEP_COLUMNS))
    atomic_write_text(out / SWEEP_FILE, "\n".join(lines) + "\n")
    atomic_write_bytes(
        out / SWEEP_FIGURE, render_sweep_figure(rows, f"mode={args.mode}")
    )
    base = _config_from_args(args, n=n_values[0]).to_dict()
    del base["n"]
    _write_manifest(
        out, "sweep-n",
        {
            "config": base,
            "n_values": n_values,
            "inputs": {"data_dir": args.data_dir},
        },
    )
    for row in rows:
        print(
            f"sweep n={row['n']}: f1_star={_cell(row['f1_star']) or 'undefined'} "
            f"map={_cell(row['map']) or 'undefined'} ops={row['similarity_ops']}"
        )
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    from livereid.report import render_compare_figure

    dataset = load_dataset(args.data_dir)
    rows = []
    for mode in (Mode.BASELINE, Mode.SKIP, Mode.TRADE):
        config = _config_from_args(args, mode=mode.value)
        result = run(config, dataset)
        _curve, summary, _per_query = _metrics(result, dataset)
        rows.append(
            {
                "mode": mode.value,
                "n": config.n,
                "fr": summary.fr_at_star,
                "tvr": summary.tvr_at_star,
                "f1_star": summary.f1_star,
                "beta_star": summary.beta_star,
                "map": summary.map_score,
                "gallery_total": sum(summary.gallery_sizes),
                "similarity_ops": summary.similarity_ops,
            }
        )
    out = _out_dir(args)
    lines = [",".join(_COMPARE_COLUMNS)]
    for row in rows:
        lines.append(",".join(_cell(row[c]) for c in _COMPARE_COLUMNS))
    atomic_write_text(out / COMPARE_FILE, "\n".join(lines) + "\n")
    atomic_write_bytes(
        out / COMPARE_FIGURE, render_compare_figure(rows, f"n={args.n}")
    )
    config = _config_from_args(args, mode=Mode.TRADE.value)
    _write_manifest(
        out, "compare",
        {"config": config.to_dict(), "inputs": {"data_dir": args.data_dir}},
    )
    for row in rows:
        print(
            f"compare {row['mode']}: fr={_cell(row['fr']) or 'undefined'} "
            f"tvr={_cell(row['tvr']) or 'undefined'} "
            f"f1_star={_cell(row['f1_star']) or 'undefined'} "
            f"map={_cell(row['map']) or 'undefined'}"
        )
    return 0


def _add_run_flags(parser: argparse.ArgumentParser, *, require_mode: bool) -> None:
    if require_mode:
        parser.add_argument(
            "--mode", required=True, choices=[m.value for m in Mode],
            help="gallery generation strategy",
        )
    else:
        parser.add_argument(
            "--mode", default=Mode.TRADE.value, choices=[m.value for m in Mode]
        )
    parser.add_argument("--n", type=int, default=20,
                        help="tracklet length cap / detector stride")
    parser.add_argument("--tau", type=int, default=1000, help="chunk length in frames")
    parser.add_argument("--eta", type=int, default=20,
                        help="candidates presented per alert")
    parser.add_argument("--beta-step", type=float, default=0.02,
                        help="alert threshold grid step")
    parser.add_argument("--scorer", default="heuristic", choices=list(SCORER_NAMES))
    parser.add_argument("--tracker", default="greedy-iou", choices=sorted(TRACKERS))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--iou-threshold", type=float, default=0.3)
    parser.add_argument("--min-confidence", type=float, default=0.5)
    parser.add_argument("--frame-width", type=float, default=1280.0)
    parser.add_argument("--frame-height", type=float, default=720.0)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="livereid",
        description="Tracklet galleries and open-set re-identification alerts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    w = WorldConfig()
    p = sub.add_parser("gen", help="generate a synthetic world")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--identities", type=int, default=w.n_identities)
    p.add_argument("--frames", type=int, default=w.frames_per_video)
    p.add_argument("--videos-per-camera", type=int, default=w.n_videos_per_camera)
    p.add_argument("--cameras", type=int, default=w.n_cameras)
    p.add_argument("--entry-rate", type=float, default=w.entry_rate)
    p.add_argument("--exit-rate", type=float, default=w.exit_rate)
    p.add_argument("--passer-fraction", type=float, default=w.passer_fraction,
                   help="share of identities that only pass through briefly")
    p.add_argument("--passer-entry-rate", type=float, default=w.passer_entry_rate)
    p.add_argument("--passer-exit-rate", type=float, default=w.passer_exit_rate)
    p.add_argument("--miss-prob", type=float, default=w.miss_probability)
    p.add_argument("--jitter", type=float, default=w.box_jitter_sigma)
    p.add_argument("--p-bad", type=float, default=w.bad_crop_probability)
    p.add_argument("--bad-weight", type=float, default=w.bad_crop_weight)
    p.add_argument("--crossing-rate", type=float, default=w.crossing_rate)
    p.add_argument("--dim", type=int, default=w.embedding_dim)
    p.add_argument("--fidelity", type=float, default=w.scorer_fidelity)
    p.add_argument("--queries", type=int, default=w.n_queries)
    p.add_argument("--seed", type=int, default=w.seed)
    p.add_argument("--frame-width", type=float, default=w.frame_width)
    p.add_argument("--frame-height", type=float, default=w.frame_height)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="run the pipeline on a data directory")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out-dir", required=True)
    _add_run_flags(p, require_mode=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="recompute metrics from a stored run")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-n", help="sweep the tracklet length cap")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-values", default=DEFAULT_N_VALUES,
                   help="comma separated, strictly increasing")
    _add_run_flags(p, require_mode=False)
    p.set_defaults(func=cmd_sweep_n)

    p = sub.add_parser("compare", help="run all three gallery modes")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out-dir", required=True)
    _add_run_flags(p, require_mode=False)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    try:
        return args.func(args) or 0
    except (ValidationError, ConfigurationError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (LiveReidError, OSError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
