"""Command-line interface.

Subcommands:

  export-synth     generate the synthetic dataset: archives, manifest, trials
  train            fit the fusion model on archived embeddings
  evaluate         score trials with a trained checkpoint and report EER
  inspect-archive  summarize a VXA1 embedding archive

Every failure exits nonzero with a message on stderr; outputs are
written atomically so an interrupted run never leaves partial files.
"""
from __future__ import annotations

import argparse
import sys
from collections import Counter
from pathlib import Path

from .archive import read_embedding_archive, write_embedding_archive
from .config import RunConfig, load_config
from .data import (
    Split, load_manifest, load_trials, write_manifest, write_trials,
)
from .errors import VoxfuseError
from .model import ExtractMode, FusionModel
from .scoring import build_cohort, evaluate
from .synth import export_synthetic, generate_manifest, generate_trials
from .training import class_index, fit, load_checkpoint, write_text_atomic


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH",
                        help="key=value configuration file")
    parser.add_argument("--seed", type=int, metavar="N",
                        help="override the configured rng_seed")
    parser.add_argument("--set", action="append", default=[],
                        metavar="KEY=VALUE", dest="overrides",
                        help="override one config key (repeatable)")


def _build_config(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise VoxfuseError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value
    if args.seed is not None:
        overrides["rng_seed"] = str(args.seed)
    config_path = args.config
    if config_path is not None and not Path(config_path).exists():
        raise VoxfuseError(f"config file does not exist: {config_path}")
    return load_config(config_path, overrides)


def _cmd_export_synth(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    synth_cfg = cfg.synth_config()
    manifest = generate_manifest(synth_cfg)
    audio_set, text_set = export_synthetic(synth_cfg, manifest)
    write_manifest(manifest, out_dir / "manifest.tsv")
    write_embedding_archive(audio_set, out_dir / "audio.vxa")
    write_embedding_archive(text_set, out_dir / "text.vxa")
    written = ["manifest.tsv", "audio.vxa", "text.vxa"]
    if synth_cfg.dev_trial_per_speaker > 0:
        write_trials(generate_trials(manifest, Split.DEV_TRIAL),
                     out_dir / "trials_dev.tsv")
        written.append("trials_dev.tsv")
    if synth_cfg.test_trial_per_speaker > 0:
        write_trials(generate_trials(manifest, Split.TEST_TRIAL),
                     out_dir / "trials_test.tsv")
        written.append("trials_test.tsv")
    print(f"wrote {', '.join(written)} to {out_dir}")
    print(f"{len(manifest)} utterances, {len(audio_set)} audio records, "
          f"{len(text_set)} text records")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    cfg.require_paths("audio_archive", "text_archive", "manifest", "trials")
    cfg.require_paths("checkpoint", existing=False)
    manifest = load_manifest(cfg.manifest)
    dev_trials = load_trials(cfg.trials)
    audio_set = read_embedding_archive(cfg.audio_archive)
    text_set = read_embedding_archive(cfg.text_archive)
    train_cfg = cfg.train_config()
    classes = class_index(manifest, train_cfg)
    if cfg.n_classes and cfg.n_classes != len(classes):
        raise VoxfuseError(
            f"configured n_classes {cfg.n_classes} does not match the "
            f"{len(classes)} speakers in the train pool")
    model = FusionModel(cfg.model_config(n_classes=len(classes)),
                        seed=train_cfg.rng_seed)
    result = fit(model, train_cfg, manifest, audio_set, text_set, dev_trials,
                 checkpoint_path=cfg.checkpoint,
                 log_path=cfg.metric_log or None,
                 eval_mode=cfg.extract_mode(),
                 resume_from=args.resume)
    last = result.history[-1]
    print(f"trained {last.epoch} epochs ({result.global_step} steps); "
          f"best dev EER {100 * result.best_eer:.2f}% at epoch "
          f"{result.best_epoch}")
    print(f"checkpoint: {cfg.checkpoint}")
    if cfg.metric_log:
        print(f"metric log: {cfg.metric_log}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    if args.mode:
        cfg.mode_select = args.mode
    mode = cfg.extract_mode()
    cfg.require_paths("checkpoint", "manifest", "trials")
    if mode is not ExtractMode.TEXT_ONLY:
        cfg.require_paths("audio_archive")
    if mode is not ExtractMode.AUDIO_ONLY:
        cfg.require_paths("text_archive")
    manifest = load_manifest(cfg.manifest)
    trials = load_trials(cfg.trials)
    audio_set = (read_embedding_archive(cfg.audio_archive)
                 if mode is not ExtractMode.TEXT_ONLY else None)
    text_set = (read_embedding_archive(cfg.text_archive)
                if mode is not ExtractMode.AUDIO_ONLY else None)
    model = load_checkpoint(cfg.checkpoint).build_model()
    cohort = None
    if cfg.use_as_norm:
        cohort = build_cohort(
            model, manifest, audio_set, text_set, mode,
            top_k=cfg.as_norm_top_k,
            max_size=cfg.cohort_size or None)
    result = evaluate(model, manifest, trials, audio_set=audio_set,
                      text_set=text_set, mode=mode, cohort=cohort)
    tsv = result.report.to_tsv()
    out = args.out or cfg.report
    if out:
        write_text_atomic(out, tsv)
        print(f"report written to {out}")
    sys.stdout.write(tsv)
    return 0


def _cmd_inspect_archive(args: argparse.Namespace) -> int:
    path = Path(args.archive)
    if not path.exists():
        raise VoxfuseError(f"archive does not exist: {path}")
    embeddings = read_embedding_archive(path)
    speakers = sorted({r.speaker_id for r in embeddings})
    utterances = {(r.speaker_id, r.utterance_id) for r in embeddings}
    by_aug = Counter(r.augmentation.value for r in embeddings)
    print(f"archive: {path}")
    print(f"modality: {embeddings.modality.value}")
    print(f"dimension: {embeddings.dimension}")
    print(f"records: {len(embeddings)}")
    print(f"speakers: {len(speakers)}")
    print(f"utterances: {len(utterances)}")
    for aug, count in sorted(by_aug.items()):
        print(f"augmentation {aug}: {count}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voxfuse",
        description="speaker re-identification attack toolkit over "
                    "precomputed audio/text embeddings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-synth",
                       help="generate synthetic archives, manifest, trials")
    _add_common(p)
    p.add_argument("--out", required=True, metavar="DIR",
                   help="output directory")
    p.set_defaults(func=_cmd_export_synth)

    p = sub.add_parser("train", help="train the fusion model")
    _add_common(p)
    p.add_argument("--resume", metavar="PATH",
                   help="checkpoint to resume from")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score trials and report EER")
    _add_common(p)
    p.add_argument("--out", metavar="PATH", help="report TSV destination")
    p.add_argument("--mode",
                   choices=[m.value for m in ExtractMode],
                   help="embedding mode (overrides mode_select)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("inspect-archive", help="summarize a VXA1 archive")
    p.add_argument("archive", help="archive path")
    p.set_defaults(func=_cmd_inspect_archive)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VoxfuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
