"""``binaf`` command line: search, enumerate, eval, fuse, gen-data."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import ga
from .bnn.fusion import BOUND, fuse_sign_threshold, verify_fusion
from .config import ConfigError, RunConfig
from .data import DatasetFormatError, load_dataset, make_synthetic, write_cifar10_binary
from .expr import (
    CATALOG_NAMES,
    GENOME_GRAMMAR,
    EncodingType,
    GenomeError,
    all_genomes,
    canonicalize,
    format_genome,
    parse_genome,
    render_formula,
    resolve_af,
    search_space_size,
)
from .fitness import AnalyticEvaluator, BNNTrainer, TrainingEvaluator, analytic_fitness

log = logging.getLogger("binaf")

LOG_NAME = "evaluations.jsonl"
REPORT_NAME = "search_report.json"
META_NAME = "metadata.json"
ENUM_NAME = "enumerate.csv"

# run-location fields kept out of result files so identical runs write identical bytes
_NON_RESULT_FIELDS = ("out", "jobs")


class UsageError(ValueError):
    pass


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    sup = argparse.SUPPRESS
    p.add_argument("--config", metavar="PATH", default=sup, help="JSON run configuration")
    p.add_argument("--seed", type=int, default=sup, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", metavar="DIR", default=sup, help="output directory")
    p.add_argument("--jobs", type=int, metavar="N", default=sup, help="parallel initial evaluations")
    p.add_argument("-v", "--verbose", action="count", default=sup)
    return p


def _data_flags(p):
    g = p.add_argument_group("data and training")
    g.add_argument("--dataset", choices=("synthetic", "cifar10-binary", "npz"))
    g.add_argument("--dataset-path", dest="dataset_path")
    g.add_argument("--n-samples", dest="n_samples", type=int)
    g.add_argument("--n-classes", dest="n_classes", type=int)
    g.add_argument("--noise", type=float)
    g.add_argument("--subset", type=int)
    g.add_argument("--data-seed", dest="data_seed", type=int)
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch-size", dest="batch_size", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--arch", choices=("dense", "conv"))
    g.add_argument("--width", type=int)
    g.add_argument("--n-blocks", dest="n_blocks", type=int)
    g.add_argument("--t-clip", dest="t_clip", type=float)


def build_parser() -> argparse.ArgumentParser:
    gflags = _global_flags()
    parser = argparse.ArgumentParser(
        prog="binaf", parents=[gflags],
        description="Evolutionary search for complementary activation functions in binary networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("search", parents=[gflags], help="run the steady-state GA")
    s.add_argument("--encoding", choices=("type1", "type2"))
    s.add_argument("--pop-size", dest="pop_size", type=int)
    s.add_argument("--budget", type=int, help="total evaluations, initialization included")
    s.add_argument("--stagnation", type=int, help="stop after K steps without replacement")
    s.add_argument("--mutation-prob", dest="mutation_prob", type=float)
    s.add_argument("--fitness", choices=("train", "analytic"))
    _data_flags(s)

    e = sub.add_parser("enumerate", parents=[gflags], help="score every Type-I genome")
    e.add_argument("--encoding", choices=("type1", "type2"))
    e.add_argument("--trainer", action="store_true",
                   help="score with the real trainer instead of the analytic fitness; use a tiny config")
    _data_flags(e)

    v = sub.add_parser("eval", parents=[gflags], help="one fitness evaluation")
    v.add_argument("af", help=f"genome text, baseline, or one of {', '.join(CATALOG_NAMES)}")
    _data_flags(v)

    f = sub.add_parser("fuse", parents=[gflags], help="fold sign(AF(x)) into thresholds")
    f.add_argument("af")
    f.add_argument("--channels", type=int, default=1)
    f.add_argument("--bound", type=float, default=BOUND)
    f.add_argument("--samples", type=int, default=100_000)
    f.add_argument("--piecewise", action="store_true", help="locate crossings of non-monotone functions")
    f.add_argument("--json", action="store_true")

    d = sub.add_parser("gen-data", parents=[gflags], help="write a synthetic dataset file")
    d.add_argument("--format", choices=("npz", "cifar10-binary"), default="npz")
    d.add_argument("--n-samples", dest="n_samples", type=int, default=1250)
    d.add_argument("--n-classes", dest="n_classes", type=int, default=2)
    d.add_argument("--noise", type=float, default=0.5)
    d.add_argument("--name", default=None, help="file name inside --out")
    return parser


_OVERRIDES = ("encoding", "pop_size", "budget", "stagnation", "mutation_prob", "fitness", "dataset",
              "dataset_path", "n_samples", "n_classes", "noise", "subset", "data_seed", "epochs",
              "batch_size", "lr", "arch", "width", "n_blocks", "t_clip", "seed", "out", "jobs")


def resolve_config(args) -> RunConfig:
    base = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {k: getattr(args, k, None) for k in _OVERRIDES}
    return base.merged(overrides).validate()


def _result_config(cfg: RunConfig) -> dict:
    return {k: v for k, v in cfg.to_dict().items() if k not in _NON_RESULT_FIELDS}


def _training_evaluator(cfg: RunConfig, log_path=None) -> TrainingEvaluator:
    source = cfg.dataset_source()
    ds = load_dataset(source)
    fcfg = cfg.fitness_config()
    return TrainingEvaluator(BNNTrainer(ds, fcfg), fcfg, log_path=log_path, data_fingerprint=source.fingerprint())


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------------
# commands


def cmd_search(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    log_path = out / LOG_NAME
    if cfg.fitness == "analytic":
        evaluator = AnalyticEvaluator(cfg.fitness_config(), log_path=log_path)
    else:
        evaluator = _training_evaluator(cfg, log_path)
    started = time.time()

    def progress(state, info):
        if state.steps % 50 == 0:
            log.info("step %d  evals %d  best %.4f", state.steps, state.evaluations, state.population.best.fitness)

    report = ga.run(cfg.ga_config(), evaluator, callback=progress)
    report["config"] = _result_config(cfg)
    report["log_path"] = LOG_NAME
    ga.write_report(report, out / REPORT_NAME)
    _write_json(out / META_NAME, {
        "started": started, "finished": time.time(), "out": str(out), "jobs": cfg.jobs,
        "preprocessing": "normalization only (no crop or flip)",
    })
    print(f"best {report['best_genome']}  fitness {report['best_fitness']:.4f}  ({report['stop_cause']})")
    print(f"  f(x) = {report['best_formula']}")
    print(f"report: {out / REPORT_NAME}")
    return 0


def cmd_enumerate(cfg: RunConfig, use_trainer: bool = False) -> int:
    enc = EncodingType.parse(cfg.encoding)
    if enc is not EncodingType.TYPE1:
        raise UsageError(
            f"refusing to enumerate {enc.value}: {search_space_size(enc):,} genomes is infeasible; "
            "use 'search' instead"
        )
    out = _out_dir(cfg)
    genomes = list(all_genomes(enc))
    if use_trainer:
        ev = _training_evaluator(cfg, out / LOG_NAME)
        scores = [ev.cached_evaluate(g).fitness for g in genomes]
    else:
        scores = [analytic_fitness(g) for g in genomes]
    order = sorted(range(len(genomes)), key=lambda i: (-scores[i], i))
    path = out / ENUM_NAME
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["genome", "canonical", "fitness"])
        for i in order:
            g = genomes[i]
            w.writerow([format_genome(g), format_genome(canonicalize(g)), repr(float(scores[i]))])
    top = genomes[order[0]]
    print(f"{len(genomes)} genomes -> {path}")
    print(f"top {format_genome(top)}  fitness {scores[order[0]]:.6f}  f(x) = {render_formula(top)}")
    return 0


def _resolve_cli_af(spec: str, channels: int = 1):
    try:
        return resolve_af(spec, channels)
    except KeyError:
        raise GenomeError(
            f"unknown function {spec!r}; expected genome text ({GENOME_GRAMMAR}), "
            f"baseline, or one of {', '.join(CATALOG_NAMES)}"
        ) from None


def cmd_eval(cfg: RunConfig, af_spec: str, write_log: bool = False) -> int:
    genome = parse_genome(af_spec) if ":" in af_spec else None
    af = None if genome is not None else _resolve_cli_af(af_spec)
    log_path = _out_dir(cfg) / LOG_NAME if write_log else None
    ev = _training_evaluator(cfg, log_path)
    if genome is not None:
        res = ev.evaluate(genome)
    else:
        res = ev.evaluate_af(af, af_spec)
    print(json.dumps(res.record()))
    return 0


def cmd_fuse(af_spec: str, channels: int, bound: float, samples: int, piecewise: bool, as_json: bool, seed: int) -> int:
    af = _resolve_cli_af(af_spec, channels)
    rows = []
    for c in range(channels):
        ts = fuse_sign_threshold(af, c, bound=bound, piecewise_fallback=piecewise)
        row = {"channel": c, **ts.to_dict()}
        if ts.fusable:
            ok, n_far = verify_fusion(af, ts, c, n=samples, seed=seed)
            row["contract"] = "pass" if ok else "fail"
            row["disagreements"] = n_far
        else:
            row["contract"] = "n/a"
        rows.append(row)
        if not as_json:
            print(f"channel {c}: {ts.describe()}")
            if len(ts.thresholds) > 1:
                print("  thresholds: " + ", ".join(f"{t:.12g}" for t in ts.thresholds))
            if ts.fusable:
                print(f"  contract over {samples:,} samples: {row['contract'].upper()}"
                      + (f" ({n_far} disagreements)" if not ok else ""))
    if as_json:
        print(json.dumps({"af": af_spec, "bound": bound, "channels": rows}, indent=2))
    return 0


def cmd_gen_data(fmt: str, out: str, n_samples: int, n_classes: int, noise: float, seed: int, name) -> int:
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    if fmt == "npz":
        x, y = make_synthetic(n_samples, n_classes, noise, seed)
        path = outdir / (name or "synthetic.npz")
        with open(path, "wb") as fh:
            np.savez(fh, x=x, y=y)
    else:
        x, y = make_synthetic(n_samples, n_classes, noise, seed, shape=(3, 32, 32))
        scale = max(float(np.abs(x).max()), 1e-12)
        pixels = np.clip(np.round((x / scale + 1.0) * 127.5), 0, 255).astype(np.uint8)
        path = outdir / (name or "synthetic.bin")
        write_cifar10_binary(path, pixels, y)
    print(f"wrote {n_samples} samples ({n_classes} classes) to {path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    verbose = getattr(args, "verbose", 0) or 0
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "fuse":
            return cmd_fuse(args.af, args.channels, args.bound, args.samples, args.piecewise, args.json,
                            getattr(args, "seed", 0))
        if args.command == "gen-data":
            return cmd_gen_data(args.format, getattr(args, "out", "data"), args.n_samples, args.n_classes,
                                args.noise, getattr(args, "seed", 0), args.name)
        cfg = resolve_config(args)
        if args.command == "search":
            return cmd_search(cfg)
        if args.command == "enumerate":
            return cmd_enumerate(cfg, args.trainer)
        if args.command == "eval":
            return cmd_eval(cfg, args.af, write_log=hasattr(args, "out"))
    except (ConfigError, GenomeError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (DatasetFormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    parser.error(f"unknown command {args.command}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
