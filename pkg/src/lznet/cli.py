"""Command-line entry point: ``lznet <subcommand> ...``.

Exit codes: 0 on success, 2 on a usage or configuration error, 1 when the
command itself fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from lznet import lz
from lznet.bench import roundtrip_cosines, tag_separability
from lznet.checkpoint import CheckpointError
from lznet.config import ConfigError, TrainConfig, make_config, parse_value, read_config_file
from lznet.gradcheck import run_suite
from lznet.tasks import DataFormatError
from lznet.train import TrainingError, evaluate_checkpoint, train

class UsageError(Exception):
    pass

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("config overrides")
    for f in fields(TrainConfig):
        group.add_argument("--" + f.name.replace("_", "-"), dest=f"cfg_{f.name}", metavar=f.type.upper())

def _overrides(args: argparse.Namespace) -> dict:
    out = {}
    for f in fields(TrainConfig):
        raw = getattr(args, f"cfg_{f.name}", None)
        if raw is not None:
            out[f.name] = parse_value(f.name, raw)
    return out

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lznet", description="LZ layer, VSA memories and LZJD tools.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model and write metrics.csv")
    p.add_argument("--config", type=Path, help="key=value config file")
    p.add_argument("--resume", type=Path, help="continue from a checkpoint")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on its task's test split")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--config", type=Path, help="key=value overrides applied on top of the saved config")
    _add_config_flags(p)

    p = sub.add_parser("digest", help="print the LZ digest of a file, one hex entry per line")
    p.add_argument("file", type=Path)
    p.add_argument("--hashed", action="store_true", help="print 64-bit hashes instead of entries")

    p = sub.add_parser("lzjd", help="LZ Jaccard distance between two files")
    p.add_argument("a", type=Path)
    p.add_argument("b", type=Path)
    p.add_argument("--hashed", action="store_true")

    p = sub.add_parser("knn", help="k-NN classify files against a labelled index")
    p.add_argument("--index", type=Path, required=True, help="lines of 'label<TAB>path', paths relative to the index")
    p.add_argument("-k", type=int, default=1)
    p.add_argument("--hashed", action="store_true")
    p.add_argument("queries", type=Path, nargs="+")

    p = sub.add_parser("vsa-bench", help="round-trip and memory capacity sweeps")
    p.add_argument("--dims", type=int, nargs="+", default=[64, 256, 1024])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--items", type=int, nargs="+", default=[5, 20, 50, 100])
    p.add_argument("--fresh", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gradcheck", help="finite-difference check of every differentiable op")
    p.add_argument("--seed", type=int, default=0)
    return parser

def _config(args) -> TrainConfig:
    file_values = read_config_file(args.config) if args.config else {}
    return make_config(file_values, _overrides(args))

def cmd_train(args) -> int:
    cfg = _config(args)
    result = train(cfg, resume=args.resume)
    last = result.rows[-1] if result.rows else None
    if last is not None:
        print(f"epoch {last['epoch']} {last['split']} loss {last['loss']:.6f}")
    print(f"metrics: {result.metrics_path}")
    print(f"checkpoint: {result.checkpoint_path}")
    return 0

def cmd_eval(args) -> int:
    overrides = read_config_file(args.config) if args.config else {}
    overrides.update(_overrides(args))
    ev = evaluate_checkpoint(args.checkpoint, overrides)
    for key in ("loss", "accuracy", "mean_p"):
        if ev[key] is not None:
            print(f"{key} {ev[key]:.6f}")
    return 0

def _entry_text(entry) -> str:
    if isinstance(entry, int):
        return f"{entry:016x}"
    return bytes(entry).hex()

def cmd_digest(args) -> int:
    digest = lz.lz_digest(args.file.read_bytes(), hashed=args.hashed)
    for entry in digest:
        print(_entry_text(entry))
    return 0

def cmd_lzjd(args) -> int:
    d = lz.lzjd(args.a.read_bytes(), args.b.read_bytes(), hashed=args.hashed)
    print(f"{d:.6f}")
    return 0

def read_index(path: Path) -> list[tuple[bytes, str]]:
    train = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataFormatError(f"{path}:{lineno}: expected 'label<TAB>path'")
        label, rel = parts[0].strip(), parts[1].strip()
        train.append(((path.parent / rel).read_bytes(), label))
    if not train:
        raise DataFormatError(f"{path}: index is empty")
    return train

def cmd_knn(args) -> int:
    if args.k < 1:
        raise UsageError("knn: -k must be positive")
    train = read_index(args.index)
    queries = [q.read_bytes() for q in args.queries]
    for path, label in zip(args.queries, lz.knn_predict(train, queries, args.k, args.hashed)):
        print(f"{path}\t{label}")
    return 0

def cmd_vsa_bench(args) -> int:
    print("roundtrip kind d trials mean_cos min_cos")
    for d in args.dims:
        for kind in ("hrr", "vtb"):
            if kind == "vtb" and int(round(d**0.5)) ** 2 != d:
                continue
            c = roundtrip_cosines(kind, d, args.trials, args.seed)
            print(f"roundtrip {kind} {d} {args.trials} {c.mean():.6f} {c.min():.6f}")
    print("capacity kind d items threshold accuracy")
    for d in args.dims:
        for n in args.items:
            sep = tag_separability(d, n, args.fresh, args.seed)
            t = sep.best_threshold()
            # The threshold is fitted on one seed and scored on the next.
            acc = tag_separability(d, n, args.fresh, args.seed + 1).accuracy(t)
            print(f"capacity hrr {d} {n} {t:.6f} {acc:.4f}")
    return 0

def cmd_gradcheck(args) -> int:
    rows = run_suite(args.seed)
    width = max(len(r[0]) for r in rows)
    for name, err, rtol, ok in rows:
        print(f"{name:<{width}}  {err:.3e}  rtol {rtol:.0e}  {'PASS' if ok else 'FAIL'}")
    failed = sum(not r[3] for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} passed")
    return 0 if failed == 0 else 1

COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "digest": cmd_digest,
    "lzjd": cmd_lzjd,
    "knn": cmd_knn,
    "vsa-bench": cmd_vsa_bench,
    "gradcheck": cmd_gradcheck,
}

def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"lznet {args.command}: {exc}", file=sys.stderr)
        return 2
    except (OSError, CheckpointError, DataFormatError, TrainingError, ValueError, ArithmeticError) as exc:
        print(f"lznet {args.command}: {exc}", file=sys.stderr)
        return 1

if __name__ == "__main__":
    sys.exit(main())
