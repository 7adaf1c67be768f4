"""Command-line interface.

Subcommands: gen-data, train, compare, layer-sweep, rank-demo,
exchange-check, report. All randomness flows from --seed (or the seed list
in the config file); outputs are plain JSON/CSV written under --out.
Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .activations import resolve
from .analysis import (
    check_exchangeability,
    count_invariant_permutations,
    rank_experiment,
)
from .rng import stream
from .harness import (
    ExperimentConfig,
    Substitution,
    emit_report,
    load_config,
    paper_scale,
    run_comparison,
    run_layer_sweep,
    trained_network,
)
from .network import load_network, predict_fn, save_network
from .tasks import (
    coordinate_perms,
    generate_dataset,
    get_task,
    save_dataset,
    task_names,
    vertex_block_perms,
    with_label_noise,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; the CLI reserves 2 for runtime
        raise UsageError(message)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="root seed for all randomness")
    parser.add_argument("--out", type=Path, default=Path("results"), help="output directory")


def _config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, required=True, help="experiment config (JSON)")
    parser.add_argument("--paper-scale", action="store_true", help="10000/2000 samples, 500 epochs, 5 seeds")
    parser.add_argument("--workers", type=int, default=None, help="parallel training workers")


def build_parser() -> _Parser:
    parser = _Parser(prog="actlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"actlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a task dataset as CSV + JSON sidecar")
    p.add_argument("--task", required=True, choices=task_names())
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--noise", type=float, default=0.0, help="label noise as a fraction of label std")
    _common(p)

    p = sub.add_parser("train", help="train one network from a config")
    _config_flags(p)
    p.add_argument("--seed", type=int, default=None, help="trial seed (default: first config seed)")
    p.add_argument("--out", type=Path, default=None, help="output directory (default: config out_dir)")

    p = sub.add_parser("compare", help="baseline vs substituted-activation comparison")
    _config_flags(p)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("layer-sweep", help="comparison at every hidden-layer position")
    _config_flags(p)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("rank-demo", help="numerical-rank experiments for an activation")
    p.add_argument("--construction", choices=("random", "rank1", "staircase"), default="rank1")
    p.add_argument("--activation", default="seagull", help="catalog name, or powP for the monomial t^P")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--n", type=int, default=100, help="number of sample points")
    p.add_argument("--d", type=int, default=9, help="input dimension")
    p.add_argument("--m", type=int, default=20, help="target rank / number of features")
    p.add_argument("--trials", type=int, default=5)
    _common(p)

    p = sub.add_parser("exchange-check", help="exchangeability diagnostics for a task or a saved network")
    p.add_argument("--task", choices=task_names(), default=None)
    p.add_argument("--network", type=Path, default=None, help="network JSON saved by `actlab train`")
    p.add_argument("--k", type=int, default=3, help="block size of the exchangeable pair")
    p.add_argument("--samples", type=int, default=200)
    _common(p)

    p = sub.add_parser("report", help="render stored JSON reports as text tables")
    p.add_argument("--dir", type=Path, required=True, dest="in_dir")
    return parser


def _load_scaled_config(args) -> ExperimentConfig:
    config = load_config(args.config)
    if args.paper_scale:
        config = paper_scale(config)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    return config


def _table(rows: list[list], header: list[str]) -> str:
    cells = [header] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_gen_data(args) -> int:
    ds = generate_dataset(args.task, args.n, args.seed)
    if args.noise > 0:
        ds = with_label_noise(ds, args.noise, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    stem = args.out / f"{args.task}_n{args.n}_seed{args.seed}"
    csv_path, meta_path = save_dataset(ds, stem)
    print(csv_path)
    print(meta_path)
    return 0


def _cmd_train(args) -> int:
    config = _load_scaled_config(args)
    seed = args.seed if args.seed is not None else config.seeds[0]
    out = args.out if args.out is not None else Path(config.out_dir)
    net, report = trained_network(config, seed)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "run_report.json", report.to_dict())
    report.history.to_csv(out / "history.csv")
    save_network(net, out / "network.json")
    print(f"{report.task} {report.arm} {report.activation} seed={seed} lr={report.chosen_lr}")
    print(f"test MAE {report.final_test_mae:.6g}   test MSE {report.final_test_mse:.6g}")
    print(out / "run_report.json")
    return 0


def _print_comparison(report) -> None:
    rows = [
        [
            t["seed"],
            f"{t['baseline_mae']:.5g}",
            f"{t['substituted_mae']:.5g}",
            f"{t['baseline_mse']:.5g}",
            f"{t['substituted_mse']:.5g}",
        ]
        for t in report.trials
    ]
    print(_table(rows, ["seed", "base MAE", "sub MAE", "base MSE", "sub MSE"]))
    print(
        f"medians: MAE {report.median_baseline_mae:.5g} -> {report.median_substituted_mae:.5g} "
        f"(ratio {report.improvement_ratio_mae:.3f}); "
        f"MSE ratio {report.improvement_ratio_mse:.3f}"
    )


def _cmd_compare(args) -> int:
    config = _load_scaled_config(args)
    if config.substitution is None:
        config = replace(config, substitution=Substitution("seagull", layer_index=0))
    out = args.out if args.out is not None else Path(config.out_dir)
    report = run_comparison(config)
    paths = emit_report(report, out)
    print(f"task {report.task}: {report.baseline_activation} vs "
          f"{report.substitution['activation']}@layer{report.substitution['layer_index']}")
    _print_comparison(report)
    for p in paths:
        print(p)
    return 0


def _cmd_layer_sweep(args) -> int:
    config = _load_scaled_config(args)
    if config.substitution is None:
        config = replace(config, substitution=Substitution("seagull"))
    out = args.out if args.out is not None else Path(config.out_dir)
    reports = run_layer_sweep(config)
    rows = []
    for idx, report in enumerate(reports):
        emit_report(report, out / f"layer{idx}")
        rows.append(
            [
                idx,
                f"{report.median_baseline_mae:.5g}",
                f"{report.median_substituted_mae:.5g}",
                f"{report.improvement_ratio_mae:.3f}",
                f"{report.improvement_ratio_mse:.3f}",
            ]
        )
    sweep_csv = out / "layer_sweep.csv"
    out.mkdir(parents=True, exist_ok=True)
    with open(sweep_csv, "w", encoding="ascii") as fh:
        fh.write("layer_index,median_baseline_mae,median_substituted_mae,ratio_mae,ratio_mse\n")
        for r in reports:
            idx = r.substitution["layer_index"]
            fh.write(
                f"{idx},{r.median_baseline_mae!r},{r.median_substituted_mae!r},"
                f"{r.improvement_ratio_mae!r},{r.improvement_ratio_mse!r}\n"
            )
    print(_table(rows, ["layer", "base MAE", "sub MAE", "ratio MAE", "ratio MSE"]))
    print(sweep_csv)
    return 0


def _cmd_rank_demo(args) -> int:
    act = resolve(args.activation, args.alpha)
    construction = {"random": "random", "rank1": "rank1_smooth", "staircase": "relu_staircase"}[
        args.construction
    ]
    poly_degree = int(args.activation[3:]) if args.activation.startswith("pow") else None
    reports = []
    for trial in range(args.trials):
        rng = stream(args.seed, "rank-demo", trial)
        x = rng.uniform(-2.0, 2.0, size=(args.n, args.d))
        reports.append(
            rank_experiment(
                construction, x, args.m, activation=act, seed=args.seed + trial, poly_degree=poly_degree
            )
        )
    rows = [
        [i, r.activation, r.construction, r.n, r.d, r.m, r.achieved_rank, r.theoretical_bound or ""]
        for i, r in enumerate(reports)
    ]
    print(_table(rows, ["trial", "activation", "construction", "N", "d", "m", "rank", "poly bound"]))
    _write_json(args.out / "rank_reports.json", [r.to_dict() for r in reports])
    print(args.out / "rank_reports.json")
    return 0


def _cmd_exchange_check(args) -> int:
    if (args.task is None) == (args.network is None):
        raise UsageError("exchange-check needs exactly one of --task or --network")
    if args.network is not None:
        net = load_network(args.network)
        report = check_exchangeability(
            predict_fn(net), k=args.k, d=net.in_dim, n_samples=args.samples, seed=args.seed
        )
        doc = {"subject": str(args.network), **report.to_dict()}
        print(_table([[f"{report.swap_gap:.3e}", f"{report.antisym_gap:.3e}"]], ["swap gap", "antisym gap"]))
    else:
        task = get_task(args.task)
        report = check_exchangeability(
            lambda x: np.asarray(task.label_fn(x)), k=args.k, d=task.dim, n_samples=args.samples, seed=args.seed
        )
        sample_fn = (lambda n, rng: generate_dataset(task, n, int(rng.integers(2**32))).x)
        candidates = task.candidate_perms()
        total = count_invariant_permutations(
            task.label_fn, candidates, n_samples=100, seed=args.seed, sample_fn=sample_fn
        )
        doc = {"subject": task.name, **report.to_dict(), "invariant_permutations": total,
               "candidates": len(candidates)}
        rows = [[task.name, f"{report.swap_gap:.3e}", f"{report.antisym_gap:.3e}",
                 f"{total}/{len(candidates)}"]]
        if task.dim == 9:
            fam = {}
            for name, cands in (("vertex-blocks", vertex_block_perms(3, 3)),
                                ("coordinates", coordinate_perms(3, 3))):
                fam[name] = count_invariant_permutations(
                    task.label_fn, cands, n_samples=100, seed=args.seed, sample_fn=sample_fn
                )
            doc["invariant_by_family"] = fam
            rows[0].append("  ".join(f"{k}:{v}/6" for k, v in fam.items()))
            print(_table(rows, ["task", "swap gap", "antisym gap", "invariant", "by family"]))
        else:
            print(_table(rows, ["task", "swap gap", "antisym gap", "invariant"]))
    _write_json(args.out / "exchange_check.json", doc)
    print(args.out / "exchange_check.json")
    return 0


def _cmd_report(args) -> int:
    found = False
    for summary in sorted(args.in_dir.rglob("summary.json")):
        found = True
        with open(summary, "r", encoding="ascii") as fh:
            doc = json.load(fh)
        print(f"== {summary}")
        sub = doc["substitution"]
        print(f"task {doc['task']}: {doc['baseline_activation']} vs "
              f"{sub['activation']}@layer{sub['layer_index']}")
        rows = [
            [t["seed"], f"{t['baseline_mae']:.5g}", f"{t['substituted_mae']:.5g}"]
            for t in doc["trials"]
        ]
        print(_table(rows, ["seed", "base MAE", "sub MAE"]))
        print(f"ratio MAE {doc['improvement_ratio_mae']:.3f}  ratio MSE {doc['improvement_ratio_mse']:.3f}")
    for rank_file in sorted(args.in_dir.rglob("rank_reports.json")):
        found = True
        with open(rank_file, "r", encoding="ascii") as fh:
            docs = json.load(fh)
        print(f"== {rank_file}")
        rows = [
            [d["activation"], d["construction"], d["n"], d["d"], d["m"], d["achieved_rank"],
             d["theoretical_bound"] if d["theoretical_bound"] is not None else ""]
            for d in docs
        ]
        print(_table(rows, ["activation", "construction", "N", "d", "m", "rank", "poly bound"]))
    if not found:
        print(f"no reports under {args.in_dir}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "compare": _cmd_compare,
    "layer-sweep": _cmd_layer_sweep,
    "rank-demo": _cmd_rank_demo,
    "exchange-check": _cmd_exchange_check,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure contract: exit code 2
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
