"""Command-line driver and run persistence.

Subcommands: gen | build-mc | extract | train | eval | sweep | report.
Every command is a pure function of (config, seed, input files), so
re-running with the same inputs reproduces its artifacts byte for byte.
Exit codes: 0 success, 2 usage error, 3 input-data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any
from xml.sax.saxutils import escape

from abstainrl import retrieval, synthenv
from abstainrl.grpo import (
    EvalReport,
    GrpoConfig,
    GrpoDivergenceError,
    TrainEnv,
    TrainLog,
    evaluate_items,
    evaluate_policy,
    train_rl,
)
from abstainrl.policy import PolicyParams, make_expert_traces, sft_train
from abstainrl.reward import DEFAULT_VARIANT, RewardVariant
from abstainrl.retrieval import (
    ExtractionClientConfig,
    ExtractionError,
    KGStore,
    PromptKind,
    fact_to_quadruple,
    llm_extract,
    quadruples_from_context,
)
from abstainrl.synthenv import (
    YEAR_FLOOR,
    YEAR_HORIZON,
    DatasetError,
    GenConfig,
    TimeInterval,
    build_abstained_mc,
    generate_dataset,
    read_dataset,
    read_mc_sources,
    write_dataset,
    write_mc_items,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class UsageError(ValueError):
    pass


# --- config resolution ----------------------------------------------------------

_TRAIN_DEFAULTS: dict[str, Any] = {
    "dataset": None,
    "out_dir": None,
    "iters": GrpoConfig.outer_iters,
    "group_size": GrpoConfig.group_size,
    "clip_eps": GrpoConfig.clip_eps,
    "beta": GrpoConfig.kl_beta,
    "lr": GrpoConfig.lr,
    "inner_steps": GrpoConfig.inner_steps,
    "std_eps": GrpoConfig.std_eps,
    "batch_size": GrpoConfig.batch_size,
    "seed": 0,
    "reward_variant": DEFAULT_VARIANT.value,
    "sft_traces": None,
    "sft_lr": 0.5,
    "sft_epochs": 200,
}


def _resolve(args: argparse.Namespace, defaults: dict[str, Any]) -> dict[str, Any]:
    """Merge flag values over config-file values over defaults (flags win)."""
    from_file: dict[str, Any] = {}
    config_path = getattr(args, "config", None)
    if config_path:
        from_file = json.loads(Path(config_path).read_text(encoding="utf-8"))
        if not isinstance(from_file, dict):
            raise UsageError("config file must hold a JSON object")
    resolved = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif key in from_file:
            resolved[key] = from_file[key]
        else:
            resolved[key] = default
    return resolved


def _grpo_config(resolved: dict[str, Any]) -> GrpoConfig:
    return GrpoConfig(
        group_size=int(resolved["group_size"]),
        clip_eps=float(resolved["clip_eps"]),
        kl_beta=float(resolved["beta"]),
        lr=float(resolved["lr"]),
        outer_iters=int(resolved["iters"]),
        inner_steps=int(resolved["inner_steps"]),
        std_eps=float(resolved["std_eps"]),
        batch_size=int(resolved["batch_size"]),
        seed=int(resolved["seed"]),
    )


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_summary_csv(path: Path, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "r1", "r2", "rl", "sem", "em", "tp", "fp", "fn"])
        for e in rows:
            writer.writerow(
                [
                    e.item_id,
                    f"{e.rouge1:.6f}",
                    f"{e.rouge2:.6f}",
                    f"{e.rouge_l:.6f}",
                    f"{e.semantic:.6f}",
                    int(e.em),
                    e.tp,
                    e.fp,
                    e.fn,
                ]
            )


def _print_report(report: EvalReport) -> None:
    c = report.confusion
    print(
        f"items={report.n_items} mean_reward={report.mean_reward:.4f} "
        f"em_rate={report.em_rate:.4f} abstain_rate={report.abstain_rate:.4f} "
        f"r1={report.rouge1:.4f} r2={report.rouge2:.4f} rl={report.rouge_l:.4f} "
        f"sem={report.semantic:.4f} tp={c.tp} fp={c.fp} fn={c.fn}"
    )


# --- SVG rendering ---------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _polyline(points: list[tuple[float, float]], color: str, dashed: bool = False) -> str:
    if len(points) == 1:
        points = points * 2
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    dash = ' stroke-dasharray="6,4"' if dashed else ""
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{coords}"/>'


def render_curves_svg(runs: list[tuple[str, TrainLog]]) -> str:
    """Standalone SVG: learning curves (mean reward solid, abstain rate dashed,
    both on their own vertical scales) plus final TP/FP/FN bars per run."""
    width, height = 960, 700
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        '<text x="70" y="24">mean reward (solid, left scale) and abstain rate '
        "(dashed, 0-1 scale) vs iteration</text>",
    ]
    x0, x1, y0, y1 = 70.0, 930.0, 40.0, 320.0
    max_reward = max(
        (rec.mean_reward for _, log in runs for rec in log.records), default=1.0
    )
    max_reward = max(max_reward, 1e-9)
    max_iter = max((len(log.records) - 1 for _, log in runs), default=1)
    max_iter = max(max_iter, 1)

    def _x(i: int) -> float:
        return x0 + (x1 - x0) * (i / max_iter)

    parts.append(f'<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    parts.append(f'<text x="{x0 - 60}" y="{y0 + 10}">{max_reward:.2f}</text>')
    parts.append(f'<text x="{x0 - 60}" y="{y1}">0.00</text>')
    parts.append(f'<text x="{x1 - 30}" y="{y1 + 16}">{max_iter}</text>')

    for idx, (name, log) in enumerate(runs):
        color = _PALETTE[idx % len(_PALETTE)]
        reward_pts = [
            (_x(rec.iteration), y1 - (y1 - y0) * (rec.mean_reward / max_reward))
            for rec in log.records
        ]
        abstain_pts = [
            (_x(rec.iteration), y1 - (y1 - y0) * rec.abstain_rate) for rec in log.records
        ]
        parts.append(_polyline(reward_pts, color))
        parts.append(_polyline(abstain_pts, color, dashed=True))
        parts.append(
            f'<text x="{x0 + 6}" y="{y0 + 16 + 16 * idx}" fill="{color}">'
            f"{escape(name)}</text>"
        )

    # grouped confusion bars from each run's final record
    bx0, bx1, by0, by1 = 70.0, 930.0, 400.0, 640.0
    parts.append(f'<text x="{bx0}" y="{by0 - 16}">final TP / FP / FN per run</text>')
    parts.append(f'<line x1="{bx0}" y1="{by1}" x2="{bx1}" y2="{by1}" stroke="black"/>')
    finals = [
        (name, log.records[-1] if log.records else None) for name, log in runs
    ]
    max_count = max(
        (max(rec.tp, rec.fp, rec.fn) for _, rec in finals if rec is not None),
        default=1,
    )
    max_count = max(max_count, 1)
    group_width = (bx1 - bx0) / max(len(finals), 1)
    bar_width = min(30.0, group_width / 5)
    bucket_colors = ("#4c9f70", "#d4a017", "#b03a48")
    for j, (name, rec) in enumerate(finals):
        if rec is None:
            continue
        gx = bx0 + j * group_width + group_width / 2
        for k, (label, value) in enumerate((("TP", rec.tp), ("FP", rec.fp), ("FN", rec.fn))):
            h = (by1 - by0) * (value / max_count)
            bx = gx + (k - 1.5) * bar_width
            parts.append(
                f'<rect x="{bx:.2f}" y="{by1 - h:.2f}" width="{bar_width:.2f}" '
                f'height="{h:.2f}" fill="{bucket_colors[k]}"/>'
            )
            parts.append(
                f'<text x="{bx:.2f}" y="{by1 + 14}" font-size="10">{label}:{value}</text>'
            )
        parts.append(
            f'<text x="{gx - group_width / 2 + 4:.2f}" y="{by1 + 30}">'
            f"{escape(name[:36])}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# --- training driver (shared by train and sweep) ----------------------------------

def _train_once(
    items: list[synthenv.SynthQAItem],
    cfg: GrpoConfig,
    variant: RewardVariant,
    out_dir: Path,
    resolved: dict[str, Any],
    run_name: str,
    sft_traces_path: str | None,
    sft_lr: float,
    sft_epochs: int,
) -> EvalReport:
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "config.json", resolved)

    params0 = PolicyParams.zeros()
    if sft_traces_path:
        trace_items = read_dataset(sft_traces_path)
        traces = make_expert_traces(trace_items)
        if not traces:
            raise DatasetError(f"no usable expert traces in {sft_traces_path}")
        params0 = sft_train(params0, traces, lr=sft_lr, epochs=sft_epochs)

    env = TrainEnv(items=items)
    params, log = train_rl(params0, env, variant, cfg)

    log.write(out_dir / "train_log.jsonl")
    (out_dir / "policy.json").write_text(params.dumps() + "\n", encoding="utf-8")
    _write_summary_csv(out_dir / "summary.csv", evaluate_items(params, items, variant))
    (out_dir / "curves.svg").write_text(
        render_curves_svg([(run_name, log)]), encoding="utf-8"
    )
    return evaluate_policy(params, items, variant)


# --- subcommands -------------------------------------------------------------------

def _cmd_gen(args: argparse.Namespace) -> int:
    resolved = _resolve(
        args,
        {
            "n": 200,
            "p_unans": GenConfig.p_unans,
            "difficulty_mix": GenConfig.difficulty_mix,
            "ambiguity": GenConfig.ambiguity,
            "seed": 0,
            "out": None,
        },
    )
    if resolved["out"] is None:
        raise UsageError("gen requires --out")
    cfg = GenConfig(
        n_items=int(resolved["n"]),
        p_unans=float(resolved["p_unans"]),
        difficulty_mix=float(resolved["difficulty_mix"]),
        ambiguity=float(resolved["ambiguity"]),
        seed=int(resolved["seed"]),
    )
    items = generate_dataset(cfg)
    write_dataset(items, resolved["out"])
    n_unans = sum(1 for item in items if item.gold.is_no_answer)
    print(
        f"wrote {len(items)} items ({n_unans} unanswerable, "
        f"fraction {n_unans / len(items):.6f}) -> {resolved['out']}"
    )
    return EXIT_OK


def _cmd_build_mc(args: argparse.Namespace) -> int:
    resolved = _resolve(
        args, {"in_path": None, "ratio": 0.12, "seed": 0, "out": None}
    )
    if resolved["in_path"] is None or resolved["out"] is None:
        raise UsageError("build-mc requires --in and --out")
    records = read_mc_sources(resolved["in_path"])
    items = build_abstained_mc(records, ratio=float(resolved["ratio"]), seed=int(resolved["seed"]))
    write_mc_items(items, resolved["out"])
    n_unans = sum(1 for item in items if item.unanswerable)
    print(f"wrote {len(items)} items ({n_unans} unanswerable) -> {resolved['out']}")
    return EXIT_OK


def _question_interval(args_window: str | None, question: str) -> TimeInterval:
    if args_window:
        lo, hi = (int(part) for part in args_window.split(":"))
        return TimeInterval(lo, hi)
    intervals = retrieval.parse_time_expressions(question)
    if intervals:
        return intervals[0]
    return TimeInterval(YEAR_FLOOR, YEAR_HORIZON)


def _cmd_extract(args: argparse.Namespace) -> int:
    mode = args.mode
    payload: dict[str, Any]

    if args.dataset:
        if mode != "kg":
            raise UsageError("--dataset conversion is only available with --mode kg")
        if not args.out:
            raise UsageError("--dataset conversion requires --out")
        items = read_dataset(args.dataset)
        store = KGStore(
            fact_to_quadruple(fact) for item in items for fact in item.facts
        )
        store.write_jsonl(args.out)
        print(f"wrote {len(store)} quadruples -> {args.out}")
        return EXIT_OK

    if not args.question:
        raise UsageError("extract requires --question")
    if args.context_file:
        context = Path(args.context_file).read_text(encoding="utf-8")
    elif args.context is not None:
        context = args.context
    else:
        raise UsageError("extract requires --context or --context-file")

    source = "rules"
    fallback_reason = None
    remote_result: list | None = None
    if args.remote:
        if not args.endpoint or not args.model:
            raise UsageError("--remote requires --endpoint and --model")
        client_cfg = ExtractionClientConfig(
            endpoint=args.endpoint,
            model=args.model,
            api_key_env=args.api_key_env,
            timeout=args.timeout,
            prompt_kind=PromptKind.SUB_CONTEXT if mode == "sub-context" else PromptKind.KG,
        )
        try:
            remote_result = llm_extract(client_cfg, args.question, context)
            source = "remote"
        except ExtractionError as exc:
            fallback_reason = f"{type(exc).__name__}: {exc}"
            print(
                f"remote extraction failed ({fallback_reason}); "
                "falling back to rule-based extraction",
                file=sys.stderr,
            )

    if mode == "sub-context":
        if source == "remote":
            sentences = remote_result
        else:
            interval = _question_interval(args.window, args.question)
            sentences = retrieval.extract_time_sentences(interval, context)
        payload = {"mode": mode, "source": source, "sentences": sentences}
    else:
        if source == "remote":
            quads = remote_result
        else:
            quads = quadruples_from_context(args.question, context)
        payload = {
            "mode": mode,
            "source": source,
            "quadruples": [
                {
                    "head": q.head,
                    "relation": q.relation,
                    "tail": q.tail,
                    "timestamp": q.timestamp,
                }
                for q in quads
            ],
        }
    if fallback_reason:
        payload["fallback_reason"] = fallback_reason

    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        print(f"wrote extraction -> {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_train(args: argparse.Namespace) -> int:
    resolved = _resolve(args, _TRAIN_DEFAULTS)
    if not resolved["dataset"] or not resolved["out_dir"]:
        raise UsageError("train requires --dataset and --out-dir")
    dataset_path = Path(resolved["dataset"])
    if not dataset_path.exists():
        raise DatasetError(f"dataset not found: {dataset_path}")
    items = read_dataset(dataset_path)
    if not items:
        raise DatasetError(f"dataset is empty: {dataset_path}")
    cfg = _grpo_config(resolved)
    variant = RewardVariant.from_name(str(resolved["reward_variant"]))
    resolved_out = dict(resolved)
    resolved_out["command"] = "train"
    report = _train_once(
        items,
        cfg,
        variant,
        Path(resolved["out_dir"]),
        resolved_out,
        run_name=Path(resolved["out_dir"]).name,
        sft_traces_path=resolved["sft_traces"],
        sft_lr=float(resolved["sft_lr"]),
        sft_epochs=int(resolved["sft_epochs"]),
    )
    _print_report(report)
    print(f"artifacts -> {resolved['out_dir']}")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    if not args.checkpoint or not args.dataset:
        raise UsageError("eval requires --checkpoint and --dataset")
    checkpoint_path = Path(args.checkpoint)
    dataset_path = Path(args.dataset)
    if not checkpoint_path.exists():
        raise DatasetError(f"checkpoint not found: {checkpoint_path}")
    if not dataset_path.exists():
        raise DatasetError(f"dataset not found: {dataset_path}")
    params = PolicyParams.loads(checkpoint_path.read_text(encoding="utf-8"))
    items = read_dataset(dataset_path)
    if not items:
        raise UsageError(f"dataset is empty: {dataset_path}")
    variant = RewardVariant.from_name(args.reward_variant)
    rows = evaluate_items(params, items, variant)
    _write_summary_csv(Path(args.out), rows)
    _print_report(evaluate_policy(params, items, variant))
    print(f"wrote per-item metrics -> {args.out}")
    return EXIT_OK


_SWEEP_AXES = ("p-unans", "beta", "reward-variant")


def _cmd_sweep(args: argparse.Namespace) -> int:
    if args.axis not in _SWEEP_AXES:
        raise UsageError(f"--axis must be one of {_SWEEP_AXES}")
    raw_values = [v.strip() for v in args.values.split(",") if v.strip()]
    if len(raw_values) < 2:
        raise UsageError("sweep needs at least 2 values")
    if len(set(raw_values)) != len(raw_values):
        raise UsageError("duplicate sweep values are not allowed")
    if not args.out_dir_sweep:
        raise UsageError("sweep requires --out-dir")

    values: list[Any]
    if args.axis == "reward-variant":
        values = [RewardVariant.from_name(v).value for v in raw_values]
    else:
        values = [float(v) for v in raw_values]
        if len(set(values)) != len(values):
            raise UsageError("duplicate sweep values are not allowed")

    resolved = _resolve(args, _TRAIN_DEFAULTS)
    out_dir = Path(args.out_dir_sweep)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    for value in values:
        run_resolved = dict(resolved)
        run_name = f"{args.axis}_{value}"
        run_dir = out_dir / run_name
        if args.axis == "p-unans":
            gen_cfg = GenConfig(
                n_items=int(args.n),
                p_unans=float(value),
                difficulty_mix=float(args.difficulty_mix),
                ambiguity=float(args.ambiguity),
                seed=int(resolved["seed"]),
            )
            items = generate_dataset(gen_cfg)
            dataset_path = run_dir / "dataset.jsonl"
            write_dataset(items, dataset_path)
            run_resolved["dataset"] = str(dataset_path)
            run_resolved["p_unans"] = float(value)
        else:
            if not resolved["dataset"]:
                raise UsageError(f"sweep over {args.axis} requires --dataset")
            items = read_dataset(resolved["dataset"])
            if not items:
                raise DatasetError(f"dataset is empty: {resolved['dataset']}")
            if args.axis == "beta":
                run_resolved["beta"] = float(value)
            else:
                run_resolved["reward_variant"] = str(value)
        cfg = _grpo_config(run_resolved)
        variant = RewardVariant.from_name(str(run_resolved["reward_variant"]))
        run_resolved["command"] = "train"
        run_resolved["out_dir"] = str(run_dir)
        report = _train_once(
            items,
            cfg,
            variant,
            run_dir,
            run_resolved,
            run_name=run_name,
            sft_traces_path=resolved["sft_traces"],
            sft_lr=float(resolved["sft_lr"]),
            sft_epochs=int(resolved["sft_epochs"]),
        )
        c = report.confusion
        summary_rows.append(
            [
                args.axis,
                value,
                f"{report.mean_reward:.6f}",
                f"{report.abstain_rate:.6f}",
                f"{report.em_rate:.6f}",
                c.tp,
                c.fp,
                c.fn,
            ]
        )
        print(f"run {run_name}: mean_reward={report.mean_reward:.4f} "
              f"abstain_rate={report.abstain_rate:.4f} tp={c.tp} fp={c.fp} fn={c.fn}")

    summary_path = out_dir / "sweep_summary.csv"
    with summary_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["axis", "value", "mean_reward", "abstain_rate", "em_rate", "tp", "fp", "fn"]
        )
        writer.writerows(summary_rows)
    print(f"sweep summary -> {summary_path}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    run_dirs = [Path(p) for p in args.runs]
    runs: list[tuple[str, TrainLog]] = []
    for run_dir in run_dirs:
        log_path = run_dir / "train_log.jsonl"
        if not log_path.exists():
            raise DatasetError(f"missing train log: {log_path}")
        runs.append((run_dir.name, TrainLog.read(log_path)))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    (out_dir / "curves.svg").write_text(render_curves_svg(runs), encoding="utf-8")
    with (out_dir / "aggregate.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["run", "iterations", "final_mean_reward", "final_abstain_rate", "tp", "fp", "fn"]
        )
        for name, log in runs:
            final = log.records[-1]
            writer.writerow(
                [
                    name,
                    len(log.records),
                    f"{final.mean_reward:.6f}",
                    f"{final.abstain_rate:.6f}",
                    final.tp,
                    final.fp,
                    final.fn,
                ]
            )
    print(f"report -> {out_dir / 'curves.svg'} and {out_dir / 'aggregate.csv'}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abstainrl",
        description="Abstention-aware temporal-QA training harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic temporal-QA dataset")
    p_gen.add_argument("--n", type=int)
    p_gen.add_argument("--p-unans", dest="p_unans", type=float)
    p_gen.add_argument("--difficulty-mix", dest="difficulty_mix", type=float)
    p_gen.add_argument("--ambiguity", type=float)
    p_gen.add_argument("--seed", type=int)
    p_gen.add_argument("--out", type=str)
    p_gen.add_argument("--config", type=str)
    p_gen.set_defaults(handler=_cmd_gen)

    p_mc = sub.add_parser("build-mc", help="build the abstained 3-option MC dataset")
    p_mc.add_argument("--in", dest="in_path", type=str)
    p_mc.add_argument("--ratio", type=float)
    p_mc.add_argument("--seed", type=int)
    p_mc.add_argument("--out", type=str)
    p_mc.add_argument("--config", type=str)
    p_mc.set_defaults(handler=_cmd_build_mc)

    p_ext = sub.add_parser("extract", help="rule-based or remote reasoning-information extraction")
    p_ext.add_argument("--mode", choices=("sub-context", "kg"), default="sub-context")
    p_ext.add_argument("--question", type=str)
    p_ext.add_argument("--context", type=str)
    p_ext.add_argument("--context-file", dest="context_file", type=str)
    p_ext.add_argument("--dataset", type=str, help="convert dataset facts to a KG store")
    p_ext.add_argument("--window", type=str, help="question interval as LO:HI years")
    p_ext.add_argument("--out", type=str)
    p_ext.add_argument("--remote", action="store_true")
    p_ext.add_argument("--endpoint", type=str)
    p_ext.add_argument("--model", type=str)
    p_ext.add_argument("--api-key-env", dest="api_key_env", type=str, default="ABSTAINRL_API_KEY")
    p_ext.add_argument("--timeout", type=float, default=30.0)
    p_ext.set_defaults(handler=_cmd_extract)

    p_train = sub.add_parser("train", help="SFT cold start (optional) plus RL training")
    p_train.add_argument("--dataset", type=str)
    p_train.add_argument("--out-dir", dest="out_dir", type=str)
    p_train.add_argument("--iters", type=int)
    p_train.add_argument("--group-size", dest="group_size", type=int)
    p_train.add_argument("--clip-eps", dest="clip_eps", type=float)
    p_train.add_argument("--beta", type=float)
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--inner-steps", dest="inner_steps", type=int)
    p_train.add_argument("--std-eps", dest="std_eps", type=float)
    p_train.add_argument("--batch-size", dest="batch_size", type=int)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--reward-variant", dest="reward_variant", type=str)
    p_train.add_argument(
        "--sft-traces",
        dest="sft_traces",
        type=str,
        help="dataset JSONL; expert traces are derived from it and filtered for correctness",
    )
    p_train.add_argument("--sft-lr", dest="sft_lr", type=float)
    p_train.add_argument("--sft-epochs", dest="sft_epochs", type=int)
    p_train.add_argument("--config", type=str)
    p_train.set_defaults(handler=_cmd_train)

    p_eval = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    p_eval.add_argument("--checkpoint", type=str)
    p_eval.add_argument("--dataset", type=str)
    p_eval.add_argument("--reward-variant", dest="reward_variant", type=str, default=DEFAULT_VARIANT.value)
    p_eval.add_argument("--out", type=str, default="summary.csv")
    p_eval.set_defaults(handler=_cmd_eval)

    p_sweep = sub.add_parser("sweep", help="train/eval once per value of one axis")
    p_sweep.add_argument("--axis", type=str, required=True)
    p_sweep.add_argument("--values", type=str, required=True)
    p_sweep.add_argument("--out-dir", dest="out_dir_sweep", type=str)
    p_sweep.add_argument("--dataset", type=str)
    p_sweep.add_argument("--n", type=int, default=200)
    p_sweep.add_argument("--difficulty-mix", dest="difficulty_mix", type=float, default=0.5)
    p_sweep.add_argument("--ambiguity", type=float, default=0.25)
    p_sweep.add_argument("--iters", type=int)
    p_sweep.add_argument("--group-size", dest="group_size", type=int)
    p_sweep.add_argument("--clip-eps", dest="clip_eps", type=float)
    p_sweep.add_argument("--beta", type=float)
    p_sweep.add_argument("--lr", type=float)
    p_sweep.add_argument("--inner-steps", dest="inner_steps", type=int)
    p_sweep.add_argument("--std-eps", dest="std_eps", type=float)
    p_sweep.add_argument("--batch-size", dest="batch_size", type=int)
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--reward-variant", dest="reward_variant", type=str)
    p_sweep.add_argument("--sft-traces", dest="sft_traces", type=str)
    p_sweep.add_argument("--sft-lr", dest="sft_lr", type=float)
    p_sweep.add_argument("--sft-epochs", dest="sft_epochs", type=int)
    p_sweep.add_argument("--config", type=str)
    p_sweep.set_defaults(handler=_cmd_sweep)

    p_rep = sub.add_parser("report", help="learning-curve SVG and aggregate CSV from run dirs")
    p_rep.add_argument("--runs", nargs="+", required=True)
    p_rep.add_argument("--out-dir", dest="out_dir", type=str, default="report")
    p_rep.set_defaults(handler=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return int(args.handler(args))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GrpoDivergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DatasetError as exc:
        print(f"input-data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"input-data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
