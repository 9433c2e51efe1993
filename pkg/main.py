#!/usr/bin/env python3
"""
RSLab Main Entry Point
Data synthesis, training, evaluation, dissection and ablation sweeps from one command line
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from ablation_runner import TABLE, AblationRunner, parse_grid, show_table, write_table
from config.schema import RunConfig, describe_error
from config.settings import settings
from datasynth.dataset import Dataset, load_dataset
from datasynth.generate import generate
from dissect import (
    band_trend, collect_queries, export_gate_profile, export_heatmap, gate_profile,
    position_regression, similarity_matrix, step1_invariance,
)
from scanner.checkpoint import load_checkpoint
from scanner.model import RobustScanner
from trainer.evaluate import evaluate, position_error_profile, write_predictions
from trainer.loop import train
from utils.errors import ConfigError, DataIOError, InsufficientDataError, RSLabError
from utils.logger import attach_file, detach, get_logger

logger = get_logger("rslab_main")

COMMANDS = ("synth", "train", "eval", "dissect", "ablate")
RUN_FILE = "run.json"


def parse_len_range(text: str):
    """Parse "5..12" into (5, 12)"""
    lo, sep, hi = text.partition("..")
    try:
        if not sep:
            raise ValueError(text)
        return int(lo), int(hi)
    except ValueError:
        raise ConfigError(f"--len expects a..b with integers, got {text!r}") from None


def _write_json(path: Path, payload: Dict[str, Any]):
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e


class RSLab:
    """Runs one fully resolved RunConfig"""

    def __init__(self, run: RunConfig):
        self.run = run
        self.out = Path(run.out)

    def _arg(self, key: str, required: bool = True) -> Any:
        value = self.run.args.get(key)
        if required and value in (None, "", []):
            raise ConfigError(f"{self.run.command} needs --{key.replace('_', '-')}")
        return value

    def execute(self):
        handlers = {
            "synth": self.run_synth,
            "train": self.run_train,
            "eval": self.run_eval,
            "dissect": self.run_dissect,
            "ablate": self.run_ablate,
        }
        if self.run.command not in handlers:
            raise ConfigError(f"unknown command {self.run.command!r}; expected one of {COMMANDS}")
        logger.module_start(f"rslab {self.run.command}")
        handlers[self.run.command]()
        logger.module_complete(f"rslab {self.run.command}")

    # ------------------------------------------------------------------ commands

    def run_synth(self):
        run = self.run
        manifest = generate(run.synth, run.seed, self.out, run.input, run.model.position.t_max)
        logger.success(f"{len(manifest)} {manifest.kind} samples in {self.out}")

    def run_train(self):
        run = self.run
        data = load_dataset(Path(self._arg("data")))
        if run.train.val_data:
            train_set, val_set = data, load_dataset(Path(run.train.val_data))
        else:
            train_set, val_set = data.split(run.train.val_fraction, run.seed)
        model = RobustScanner.build(run.model, run.seed, run.encoder, run.input)
        result = train(model, train_set, run.train, self.out, val_set)
        logger.success(f"Best epoch {result.best_epoch} (score {result.best_score:.4f}) -> {result.best_path}")

    def run_eval(self):
        run = self.run
        model = load_checkpoint(Path(self._arg("ckpt")))
        data = load_dataset(Path(self._arg("data")))
        report = evaluate(model, data, run.train.case_sensitive, run.train.batch_size)
        self.out.mkdir(parents=True, exist_ok=True)
        write_predictions(report, self.out / "predictions.tsv")
        position_error_profile(report.rows).to_csv(self.out / "position_errors.csv", index=False,
                                                   lineterminator="\n")
        _write_json(self.out / "eval.json", {**report.summary(), "checkpoint": str(self._arg("ckpt"))})
        logger.success(f"Sequence accuracy {report.accuracy:.4f} ({report.correct}/{report.total})")

    def run_dissect(self):
        run = self.run
        model = load_checkpoint(Path(self._arg("ckpt")))
        data = load_dataset(Path(self._arg("data")))
        lengths: List[int] = [int(l) for l in (self._arg("l", required=False) or [5])]
        split = float(self._arg("split", required=False) or 0.9)
        self.out.mkdir(parents=True, exist_ok=True)

        bank = collect_queries(model, data, lengths, run.train.batch_size)
        # every length is analysed before anything is written
        results = []
        for l in lengths:
            if bank.count(l) < 2:
                raise InsufficientDataError(f"l={l}: need at least 2 sequences, found {bank.count(l)}")
            sim = similarity_matrix(bank, l)
            results.append((l, sim, band_trend(sim.S), position_regression(bank, l, split, run.seed)))
        summary: Dict[str, Any] = {}
        for l, sim, trend, regression in results:
            export_heatmap(sim.S, self.out / f"similarity_l{l}.csv")
            regression.report().write(self.out / f"regression_l{l}.json")
            summary[str(l)] = {"n": sim.n, "zero_vectors": sim.zero_vectors, **trend}
        summary["step1_max_diff"] = step1_invariance(bank)
        _write_json(self.out / "dissect.json", summary)

        if model.variant == "full" and model.config.fusion.mode == "dynamic":
            export_gate_profile(gate_profile(model, data, run.train.batch_size), self.out / "gate_profile.csv")

    def run_ablate(self):
        run = self.run
        grid = parse_grid(self._arg("grid"))
        sources: Dict[str, str] = self._arg("datasets")
        datasets: Dict[str, tuple] = {}
        shared: Optional[Dataset] = None
        train_data = self._arg("train_data", required=False)
        if train_data:
            shared = load_dataset(Path(train_data))
        for name in sorted(sources):
            data = load_dataset(Path(sources[name]))
            datasets[name] = (data, data) if shared is not None else data.split(run.train.val_fraction, run.seed)
        runner = AblationRunner(run, grid, datasets, self.out, shared_train=shared)
        frame = runner.run()
        write_table(frame, self.out / TABLE)
        show_table(frame)


# ---------------------------------------------------------------------- argument handling


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="RSLab - RobustScanner desk laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run.json / flat dotted-key JSON to start from")
    common.add_argument("--seed", type=int, help="global seed; every other seed derives from it")
    common.add_argument("--out", help="output directory")

    model_flags = argparse.ArgumentParser(add_help=False)
    model_flags.add_argument("--variant", help="full | no_hb | no_peb")
    model_flags.add_argument("--position", help="learned_pam | sincos | none")
    model_flags.add_argument("--fusion", help="dynamic | add | concat")
    model_flags.add_argument("--vocab", help="default or a charset name / chars:<characters>")

    train_flags = argparse.ArgumentParser(add_help=False)
    train_flags.add_argument("--epochs", type=int)
    train_flags.add_argument("--batch-size", type=int)
    train_flags.add_argument("--lr", type=float, help="base learning rate")
    train_flags.add_argument("--clip-norm", type=float)
    train_flags.add_argument("--val-fraction", type=float)
    train_flags.add_argument("--record-time", action="store_const", const=True,
                             help="fill the seconds column of metrics.csv")

    synth = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    synth.add_argument("--kind", help="contextless | lexicon")
    synth.add_argument("--n", type=int)
    synth.add_argument("--len", dest="length", help="length range a..b")
    synth.add_argument("--charset")
    synth.add_argument("--wordlist")

    tr = sub.add_parser("train", parents=[common, model_flags, train_flags], help="train a model")
    tr.add_argument("--data")
    tr.add_argument("--val-data")

    ev = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    ev.add_argument("--ckpt")
    ev.add_argument("--data")
    ev.add_argument("--batch-size", type=int)
    ev.add_argument("--case-sensitive", action="store_const", const=True)

    ds = sub.add_parser("dissect", parents=[common], help="query similarity and position regression")
    ds.add_argument("--ckpt")
    ds.add_argument("--data")
    ds.add_argument("--l", type=int, action="append", help="sequence length (repeatable)")
    ds.add_argument("--split", type=float, help="training share of the regression split")

    ab = sub.add_parser("ablate", parents=[common, model_flags, train_flags], help="run an ablation grid")
    ab.add_argument("--grid", action="append", help="axis=v1,v2 (repeatable)")
    ab.add_argument("--data-context", help="contextual dataset directory")
    ab.add_argument("--data-random", help="contextless dataset directory")
    ab.add_argument("--data", action="append", help="NAME=PATH extra dataset (repeatable)")
    ab.add_argument("--train-data", help="train every cell once on this set and test on all datasets")

    rerun = sub.add_parser("rerun", help="repeat a run from its run.json")
    rerun.add_argument("run_file")
    return parser


def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
    """Flag values as flat dotted keys; flags left unset are omitted"""
    get = lambda name: getattr(args, name, None)  # noqa: E731
    flat: Dict[str, Any] = {
        "command": args.command,
        "out": get("out"),
        "seed": get("seed"),
        "train.seed": get("seed"),
        "model.variant": get("variant"),
        "model.position.mode": get("position"),
        "model.fusion.mode": get("fusion"),
        "model.vocab": get("vocab"),
        "train.epochs": get("epochs"),
        "train.batch_size": get("batch_size"),
        "train.base_lr": get("lr"),
        "train.clip_norm": get("clip_norm"),
        "train.val_fraction": get("val_fraction"),
        "train.record_time": get("record_time"),
        "train.val_data": get("val_data"),
        "train.case_sensitive": get("case_sensitive"),
        "synth.kind": get("kind"),
        "synth.n": get("n"),
        "synth.charset": get("charset"),
        "synth.wordlist": get("wordlist"),
        "args.ckpt": get("ckpt"),
        "args.l": get("l"),
        "args.split": get("split"),
        "args.grid": get("grid"),
        "args.train_data": get("train_data"),
    }
    if get("length") is not None:
        flat["synth.len_min"], flat["synth.len_max"] = parse_len_range(args.length)

    if args.command == "ablate":
        datasets: Dict[str, str] = {}
        if get("data_context"):
            datasets["context"] = args.data_context
        if get("data_random"):
            datasets["random"] = args.data_random
        for item in get("data") or []:
            name, sep, path = item.partition("=")
            if not sep or not name or not path:
                raise ConfigError(f"--data expects NAME=PATH, got {item!r}")
            datasets[name] = path
        flat["args.datasets"] = datasets or None
    else:
        flat["args.data"] = get("data")
    return flat


def resolve_run(args: argparse.Namespace) -> RunConfig:
    if args.command == "rerun":
        return RunConfig.read(Path(args.run_file))
    base = RunConfig.read(Path(args.config)) if args.config else RunConfig()
    return base.with_overrides(overrides_from(args))


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code"""

    args = build_parser().parse_args(argv)
    for problem in settings.validate_config():
        logger.warning(problem)

    handler = None
    try:
        run = resolve_run(args)
        out = Path(run.out)
        run.write(out / RUN_FILE)
        if run.command != "synth":
            # synth output is a dataset directory and must hash identically across reruns
            handler = attach_file(out / "run.log")
        logger.info(f"rslab {run.command} (seed {run.seed}) -> {out}")
        RSLab(run).execute()
        return 0
    except RSLabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"ConfigError: {describe_error(e)}")
        return ConfigError.exit_code
    except OSError as e:
        logger.error(f"DataIOError: {e}")
        return DataIOError.exit_code
    finally:
        if handler is not None:
            detach(handler)


if __name__ == "__main__":
    sys.exit(main())
