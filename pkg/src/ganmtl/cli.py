"""Command-line surface: gendata, train, synth, eval, and gv subcommands.

Exit codes: 0 on success, 1 on usage errors (unknown flags or subcommands),
2 on runtime failures (unreadable files, bad configs, diverged training).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint
from .config import ConfigError, TrainConfig, load_experiment, with_paths
from .corpus import CorpusConfig, Dataset, Utterance, generate_corpus, natural_gv_oracle
from .dataio import FormatError, read_dataset, write_dataset
from .metrics import EmptySupportError, evaluate, global_variance
from .report import (LOSS_PNG_NAME, read_csv_rows, render_gv,
                     render_loss_curves, write_gv_table, write_report)
from .rng import Rng
from .tensor import GradientError, ShapeError
from .trainer import (CHECKPOINT_NAME, TRAIN_LOG_NAME, TrainingDivergedError,
                      synthesize, train)

DATASET_NAME = "dataset.gspd"
ORACLE_GV_CSV = "oracle_gv.csv"
ORACLE_GV_PNG = "oracle_gv.png"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ganmtl",
        description="Adversarial multi-task acoustic model training on a "
                    "synthetic parametric-speech corpus.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gendata", help="generate a corpus file plus its variance oracle")
    g.add_argument("--config", help="experiment config file (corpus.* section applies)")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, help="override corpus.seed")

    t = sub.add_parser("train", help="run one training run")
    t.add_argument("--config", help="experiment config file")
    t.add_argument("--data", required=True, help="GSPD dataset path")
    t.add_argument("--out", required=True, help="output directory for logs and checkpoints")
    t.add_argument("--resume", action="store_true",
                   help="continue from the checkpoint in the output directory")
    t.add_argument("--quiet", action="store_true", help="suppress progress lines")

    s = sub.add_parser("synth", help="synthesize acoustic frames for one split")
    s.add_argument("--ckpt", required=True, help="GMTL checkpoint path")
    s.add_argument("--data", required=True, help="GSPD dataset with the linguistic inputs")
    s.add_argument("--split", default="test", help="split to synthesize (default: test)")
    s.add_argument("--seed", type=int, default=0, help="noise seed (default: 0)")
    s.add_argument("--stride", type=int, default=None,
                   help="window hop for long sequences (default: half a window)")
    s.add_argument("--out", required=True, help="output GSPD path for the predictions")

    e = sub.add_parser("eval", help="score a synthesized split against its reference")
    e.add_argument("--ref", required=True, help="reference GSPD dataset")
    e.add_argument("--hyp", required=True, help="synthesized GSPD file (from synth)")
    e.add_argument("--split", default="test", help="reference split (default: test)")
    e.add_argument("--report", required=True, help="directory for report.txt/gv.csv/gv.png")

    v = sub.add_parser("gv", help="per-coefficient global-variance comparison")
    v.add_argument("--ref", required=True, help="reference GSPD dataset")
    v.add_argument("--hyp", required=True, help="synthesized GSPD file (from synth)")
    v.add_argument("--split", default="test", help="reference split (default: test)")
    v.add_argument("--out", required=True, help="output CSV path (figure lands next to it)")
    return parser


def _cmd_gendata(args) -> int:
    corpus_cfg = load_experiment(args.config).corpus if args.config else CorpusConfig()
    if args.seed is not None:
        corpus_cfg = replace(corpus_cfg, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds, gt = generate_corpus(corpus_cfg)
    write_dataset(ds, out / DATASET_NAME)
    # keep the spectral entries only: the F0/voicing columns of the closed
    # form ignore the intonation ripple, so they are not comparison-grade
    M = corpus_cfg.spectral_dims
    gv_nat, gv_cond = (v[:M] for v in natural_gv_oracle(gt))
    with open(out / ORACLE_GV_CSV, "w", encoding="utf-8") as f:
        f.write("dim,gv_natural,gv_condmean\n")
        for d in range(gv_nat.size):
            f.write(f"{d},{float(gv_nat[d])!r},{float(gv_cond[d])!r}\n")
    render_gv(gv_nat, gv_cond, out / ORACLE_GV_PNG,
              labels=("natural", "condition mean"))
    frames = sum(u.frames for u in ds.utterances)
    print(f"wrote {out / DATASET_NAME} ({len(ds.utterances)} utterances, "
          f"{frames} frames, seed {corpus_cfg.seed})")
    return 0


def _cmd_train(args) -> int:
    base = load_experiment(args.config).train if args.config else TrainConfig()
    cfg = with_paths(base, data=args.data, out=args.out)
    dataset = read_dataset(cfg.data)
    resume_ckpt = None
    if args.resume:
        ckpt_path = Path(args.out) / CHECKPOINT_NAME
        if not ckpt_path.exists():
            raise FileNotFoundError(f"--resume given but {ckpt_path} does not exist")
        resume_ckpt = load_checkpoint(ckpt_path)
    try:
        ckpt, _ = train(cfg, dataset, resume_from=resume_ckpt,
                        verbose=not args.quiet)
    except TrainingDivergedError:
        _render_train_figure(args.out)  # curves up to the failing step
        raise
    _render_train_figure(args.out)
    print(f"finished at step {ckpt.step}; checkpoint at "
          f"{Path(args.out) / CHECKPOINT_NAME}")
    return 0


def _render_train_figure(out_dir) -> None:
    log_path = Path(out_dir) / TRAIN_LOG_NAME
    if log_path.exists():
        rows = read_csv_rows(log_path)
        if rows:
            render_loss_curves(rows, Path(out_dir) / LOSS_PNG_NAME)


def _cmd_synth(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    ds = read_dataset(args.data)
    idx = ds.indices(args.split)
    if not idx:
        raise ValueError(f"split {args.split!r} is empty")
    root = Rng(args.seed)
    utts = []
    for u in idx:
        ref = ds.utterances[u]
        acoustic = synthesize(ckpt, ref.ling, root.stream(("synth", u)),
                              stride=args.stride)
        utts.append(Utterance(ling=ref.ling.copy(), acoustic=acoustic,
                              labels=ref.labels.copy()))
    hyp = Dataset(utterances=utts, config=ds.config)
    write_dataset(hyp, args.out)
    print(f"wrote {args.out} ({len(utts)} utterances from split {args.split!r})")
    return 0


def _hyp_acoustics(ref: Dataset, hyp: Dataset, split: str) -> list[np.ndarray]:
    idx = ref.indices(split)
    if len(hyp.utterances) != len(idx):
        raise ValueError(f"hypothesis holds {len(hyp.utterances)} utterances, "
                         f"split {split!r} has {len(idx)}")
    return [u.acoustic for u in hyp.utterances]


def _cmd_eval(args) -> int:
    ref = read_dataset(args.ref)
    hyp = read_dataset(args.hyp)
    report = evaluate(ref, args.split, _hyp_acoustics(ref, hyp, args.split))
    paths = write_report(report, args.report)
    with open(paths["report"], "r", encoding="utf-8") as f:
        sys.stdout.write(f.read())
    return 0


def _cmd_gv(args) -> int:
    ref = read_dataset(args.ref)
    hyp = read_dataset(args.hyp)
    hyp_mats = _hyp_acoustics(ref, hyp, args.split)
    M = ref.config.spectral_dims
    gv_ref = global_variance([ref.utterances[i].acoustic[:, :M]
                              for i in ref.indices(args.split)])
    gv_hyp = global_variance([m[:, :M] for m in hyp_mats])
    out = Path(args.out)
    write_gv_table(gv_ref, gv_hyp, out)
    render_gv(gv_ref, gv_hyp, out.with_suffix(".png"))
    print(f"mean gv distance: {float(np.mean(np.abs(gv_ref - gv_hyp)))!r}")
    return 0


_COMMANDS = {
    "gendata": _cmd_gendata,
    "train": _cmd_train,
    "synth": _cmd_synth,
    "eval": _cmd_eval,
    "gv": _cmd_gv,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FormatError, EmptySupportError, TrainingDivergedError,
            ShapeError, GradientError, ValueError, OSError) as e:
        print(f"ganmtl {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
