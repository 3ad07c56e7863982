"""
Command line for SteadyRNN.

    steadyrnn synth   --out runs/data
    steadyrnn train   --data runs/data/synthetic.csv --out runs/gru
    steadyrnn train   --data runs/data/synthetic.csv --set lambda=0.05 --out runs/rc-gru
    steadyrnn sweep   --data runs/data/synthetic.csv --out runs/sweep
    steadyrnn compare --data runs/data/synthetic.csv --seed 7 --out runs/compare
    steadyrnn drift   --model runs/rc-gru/model.bin --data runs/data/synthetic.csv --out runs/drift
    steadyrnn eval    --model runs/rc-gru/model.bin --data held_out.csv --out runs/eval

Common flags: ``--config`` (a ``key = value`` file), ``--seed``, ``--out``
and repeated ``--set key=value``. Commands that take ``--data`` synthesize
the default benchmark from the config when it is omitted (``eval`` needs
it). Every output is byte-identical across reruns of the same config,
except the ``created`` line in ``meta.txt``.

Exit codes: 0 on success, 1 on an error (printed to stderr as a single
``error[<code>]: <message>`` line), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from steadyrnn import __version__
from steadyrnn._util import error_code, fmt_float
from steadyrnn.cells import CellParams
from steadyrnn.config import RunConfig, describe_keys
from steadyrnn.data import Dataset, NormStats, apply_zscore, load_csv, patient_split, save_csv, synth_generate
from steadyrnn.experiment import drift_reports, drift_summary_lines, prepare_splits, run_comparison, score_model
from steadyrnn.linalg import Rng
from steadyrnn.metrics import evaluate, summarize
from steadyrnn.plot import drift_svg
from steadyrnn.runlog import RUNLOG
from steadyrnn.train import lambda_sweep, train


#############################################################################
#############################################################################

### OUTPUT HELPERS

def _write_rows(path: Path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        csv.writer(f, lineterminator="\n").writerows(rows)


def _write_lines(path: Path, lines) -> None:
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_meta(out: Path, command: str, config: RunConfig) -> None:
    created = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    _write_lines(out / "meta.txt", [
        "run_id = {}".format(config.fingerprint()),
        "command = {}".format(command),
        "version = {}".format(__version__),
        "created = {}".format(created),
    ])
    (out / "config.txt").write_text(config.to_text(), encoding="utf-8")


def _runlog(args, config: RunConfig) -> RUNLOG:
    echo = (lambda line: print(line, file=sys.stderr)) if args.verbose else None
    return RUNLOG(run_id=config.fingerprint(), echo=echo)


#############################################################################
#############################################################################

### INPUTS

def load_config(args) -> RunConfig:
    """Defaults, then ``--config``, then ``--set`` and ``--seed``."""
    base = RunConfig.from_file(args.config) if args.config else RunConfig()
    return base.with_overrides(args.set or [], seed=args.seed)


def load_data(args, config: RunConfig) -> Dataset:
    """The ``--data`` CSV, or the synthetic benchmark the config describes."""
    if getattr(args, "data", None):
        return load_csv(args.data)
    return synth_generate(Rng(config["seed"]), **config.synth_kwargs())


def _normalized(dataset: Dataset, saved) -> Dataset:
    if saved.norm_mean is None:
        return dataset
    return apply_zscore(dataset, NormStats(mean=saved.norm_mean, std=saved.norm_std))


#############################################################################
#############################################################################

### COMMANDS

def cmd_synth(args) -> int:
    """Write the synthetic benchmark to ``<out>/synthetic.csv``."""
    config = load_config(args)
    out = _out_dir(args)
    dataset = synth_generate(Rng(config["seed"]), **config.synth_kwargs())
    path = out / "synthetic.csv"
    save_csv(dataset, path)
    print("wrote {} windows to {}".format(len(dataset), path))
    return 0


def cmd_train(args) -> int:
    """Split, normalize, train one model, score it on the test split."""
    config = load_config(args)
    dataset = load_data(args, config)
    out = _out_dir(args)
    runlog = _runlog(args, config)
    seed = config["seed"]
    kind = config.model_kind()

    splits = prepare_splits(dataset, config, seed)
    params, log = train(kind, splits.train, splits.val, config.train_config(), runlog=runlog)
    run = score_model(kind, params, log, splits.test, log.lam, seed)
    runlog.add_event("evaluation", {"model": kind, "metrics": run.metrics.to_dict(), "test_l_rc": run.test_l_rc})

    params.save(out / "model.bin", splits.stats.mean, splits.stats.std)
    _write_rows(out / "train_log.csv", log.csv_rows())
    (out / "metrics.txt").write_text(run.metrics.to_text(), encoding="utf-8")
    _write_rows(out / "confusion.csv", run.confusion.csv_rows())
    _write_lines(out / "summary.txt", log.summary_lines() + [
        "test_l_rc = {}".format(fmt_float(run.test_l_rc)),
        "test_mean_drift = {}".format(fmt_float(run.test_mean_drift)),
    ])
    runlog.to_json(out / "events.json")
    _write_meta(out, "train", config)
    print(run.metrics.to_text(), end="")
    return 0


def cmd_sweep(args) -> int:
    """Train the regularized cell once per λ in ``lambda_grid`` and keep the best."""
    config = load_config(args)
    dataset = load_data(args, config)
    out = _out_dir(args)
    runlog = _runlog(args, config)
    seed = config["seed"]
    kind = "rc-" + config["cell"]

    splits = prepare_splits(dataset, config, seed)
    sweep = lambda_sweep(splits.train, splits.val, config.train_config(), grid=config["lambda_grid"],
                         model_kind=kind, runlog=runlog)
    params, log = sweep.selected
    run = score_model(kind, params, log, splits.test, sweep.selected_lambda, seed)

    params.save(out / "model.bin", splits.stats.mean, splits.stats.std)
    _write_rows(out / "sweep.csv", sweep.csv_rows())
    for lam, (_, lam_log) in sweep.runs.items():
        _write_rows(out / "train_log_lambda_{}.csv".format(fmt_float(lam)), lam_log.csv_rows())
    (out / "metrics.txt").write_text(run.metrics.to_text(), encoding="utf-8")
    _write_rows(out / "confusion.csv", run.confusion.csv_rows())
    _write_lines(out / "summary.txt", ["selected_lambda = {}".format(fmt_float(sweep.selected_lambda))]
                 + log.summary_lines())
    runlog.to_json(out / "events.json")
    _write_meta(out, "sweep", config)
    print("selected lambda = {}".format(fmt_float(sweep.selected_lambda)))
    return 0


def cmd_compare(args) -> int:
    """Multi-seed comparison table of every model in ``compare_models``."""
    config = load_config(args)
    dataset = load_data(args, config)
    out = _out_dir(args)
    runlog = _runlog(args, config)

    results = run_comparison(dataset, config, runlog=runlog)
    _write_rows(out / "comparison.csv", results.csv_rows())
    text = results.to_text()
    (out / "comparison.txt").write_text(text, encoding="utf-8")
    runlog.to_json(out / "events.json")
    _write_meta(out, "compare", config)
    print(text, end="")
    return 0


def cmd_drift(args) -> int:
    """Per-sequence drift CSVs, an aggregate summary and an SVG chart."""
    config = load_config(args)
    saved = CellParams.load(args.model)
    dataset = load_data(args, config)
    out = _out_dir(args)

    split = config["drift_split"]
    if split != "all":
        parts = dict(zip(("train", "val", "test"), patient_split(dataset, config.split_spec())))
        dataset = parts[split]
    dataset = _normalized(dataset, saved)
    reports = drift_reports(saved.params, dataset, config["lambda"],
                            epsilon=config["drift_epsilon"], threshold=config["drift_threshold"])

    drift_dir = out / "drift"
    drift_dir.mkdir(exist_ok=True)
    for index, report in enumerate(reports):
        _write_rows(drift_dir / "seq_{:04d}.csv".format(index), report.csv_rows())
    summary = drift_summary_lines(reports)
    _write_lines(out / "drift_summary.txt", summary)
    shown = reports[:config["drift_sequences"]]
    if shown:
        labels = [s.record_id for s in dataset.samples[:len(shown)]]
        (out / "drift.svg").write_text(drift_svg(shown, labels=labels), encoding="utf-8")
    _write_meta(out, "drift", config)
    print("\n".join(summary))
    return 0


def cmd_eval(args) -> int:
    """Metrics and confusion matrix of a saved model on a data file."""
    config = load_config(args)
    saved = CellParams.load(args.model)
    dataset = _normalized(load_csv(args.data), saved)
    out = _out_dir(args)

    confusion = evaluate(saved.params, dataset)
    metrics = summarize(confusion)
    (out / "metrics.txt").write_text(metrics.to_text(), encoding="utf-8")
    _write_rows(out / "confusion.csv", confusion.csv_rows())
    _write_meta(out, "eval", config)
    print(metrics.to_text(), end="")
    return 0


#############################################################################
#############################################################################

### ENTRY POINT

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Path to a 'key = value' config file.")
    common.add_argument("--seed", type=int, default=None, help="Root seed (overrides the config).")
    common.add_argument("--out", default=".", help="Output directory (created if missing).")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override one config key; repeatable.")
    common.add_argument("--verbose", action="store_true", help="Echo run events to stderr.")

    parser = argparse.ArgumentParser(
        prog="steadyrnn",
        description="Train and diagnose gated recurrent classifiers with a hidden-state consistency penalty.",
        epilog="Config keys:\n" + describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version="steadyrnn " + __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="Write the synthetic benchmark CSV.")
    p.set_defaults(handler=cmd_synth)

    for name, handler, text in (
        ("train", cmd_train, "Train one model and score it on the test split."),
        ("sweep", cmd_sweep, "Sweep lambda for the regularized cell."),
        ("compare", cmd_compare, "Compare models over several seeds."),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--data", default=None, help="Dataset CSV (default: synthesize from the config).")
        p.set_defaults(handler=handler)

    p = sub.add_parser("drift", parents=[common], help="Drift reports of a saved model.")
    p.add_argument("--model", required=True, help="Model file written by train or sweep.")
    p.add_argument("--data", default=None, help="Dataset CSV (default: synthesize from the config).")
    p.set_defaults(handler=cmd_drift)

    p = sub.add_parser("eval", parents=[common], help="Score a saved model on a dataset.")
    p.add_argument("--model", required=True, help="Model file written by train or sweep.")
    p.add_argument("--data", required=True, help="Dataset CSV.")
    p.set_defaults(handler=cmd_eval)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except Exception as e:
        message = " ".join(str(e).split()) or type(e).__name__
        print("error[{}]: {}".format(error_code(e), message), file=sys.stderr)
        return 1
