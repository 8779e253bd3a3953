"""Command-line pipeline: preprocess, split, train, eval, embed, sweep.

Configuration resolves in precedence order: command-line flags, then the
environment (ARTISTID_CACHE_DIR, ARTISTID_OUT_DIR), then an optional
--config key/value file, then built-in defaults. Unknown config keys are
rejected. Every subcommand exits 0 on success and nonzero with a one-line
diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .crnn import CrnnConfig, build_model, load_checkpoint, save_checkpoint
from .datasets import LabelMap, SplitSpec, album_split, load_clips, load_split, song_split, save_split
from .dsp import DspParams, cache_path, clip_frame_count, mel_spectrogram, save_mel_cache
from .evaluation import export_embeddings, frame_eval, song_eval
from .ingest import decode_wav, load_manifest, resample, save_manifest, scan_dataset
from .training import TrainConfig, train, write_history

ENV_OVERRIDES = {"ARTISTID_CACHE_DIR": "cache_dir", "ARTISTID_OUT_DIR": "out_dir"}


def _int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _pool_tuple(text: str) -> tuple[tuple[int, int], ...]:
    pairs = []
    for item in text.split(","):
        h, _, w = item.partition("x")
        pairs.append((int(h), int(w)))
    return tuple(pairs)


@dataclass(frozen=True)
class RunConfig:
    # feature extraction
    sample_rate: int = 16000
    n_fft: int = 2048
    hop: int = 512
    n_mels: int = 128
    ref_power: float = 1.0
    # training
    lr: float = 1e-4
    batch_size: int = 16
    max_epochs: int = 400
    patience: int = 10
    clip_seconds: float = 3.0
    seed: int = 0
    # architecture (n_classes 0 = take the artist count from the manifest)
    n_classes: int = 0
    conv_channels: tuple[int, ...] = (64, 128, 128, 128)
    kernel_size: int = 3
    pools: tuple[tuple[int, int], ...] = ((4, 2), (4, 2), (4, 2), (2, 2))
    conv_dropout: float = 0.1
    gru_units: tuple[int, ...] = (32, 32)
    final_dropout: float = 0.3
    # paths
    dataset_root: str = ""
    cache_dir: str = "cache"
    out_dir: str = "out"
    split_file: str = ""
    checkpoint: str = ""

    def dsp_params(self) -> DspParams:
        return DspParams(sample_rate=self.sample_rate, n_fft=self.n_fft, hop=self.hop,
                         n_mels=self.n_mels, ref_power=self.ref_power)

    def crnn_config(self, n_classes: int) -> CrnnConfig:
        return CrnnConfig(
            n_mels=self.n_mels, n_classes=n_classes, conv_channels=self.conv_channels,
            kernel_size=self.kernel_size, pools=self.pools, conv_dropout=self.conv_dropout,
            gru_units=self.gru_units, final_dropout=self.final_dropout,
        )

    def train_config(self, clip_seconds: float) -> TrainConfig:
        return TrainConfig(clip_seconds=clip_seconds, seed=self.seed, lr=self.lr,
                           batch_size=self.batch_size, max_epochs=self.max_epochs,
                           patience=self.patience)


_PARSERS = {
    "conv_channels": _int_tuple,
    "gru_units": _int_tuple,
    "pools": _pool_tuple,
}


def parse_config_file(path) -> dict:
    """Flat key=value document; blank lines and # comments are skipped."""
    path = Path(path)
    known = {f.name: f.type for f in fields(RunConfig)}
    defaults = RunConfig()
    values = {}
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ValueError(f"{path}: malformed config line {raw!r}")
        if key not in known:
            raise ValueError(f"{path}: unknown config key {key!r}")
        parser = _PARSERS.get(key, type(getattr(defaults, key)))
        values[key] = parser(value.strip())
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for env_name, key in ENV_OVERRIDES.items():
        if os.environ.get(env_name):
            values[key] = os.environ[env_name]
    for key in (f.name for f in fields(RunConfig)):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return replace(RunConfig(), **values)


def _load_manifest(cfg: RunConfig):
    path = Path(cfg.cache_dir) / "manifest.tsv"
    if not path.exists():
        raise FileNotFoundError(f"no manifest at {path}; run preprocess first")
    return load_manifest(path)


def _load_split(cfg: RunConfig, split_arg: str | None) -> SplitSpec:
    path = split_arg or cfg.split_file
    if not path:
        raise ValueError("no split file given (use --split or the split_file config key)")
    return load_split(path)


def _fmt_seconds(t: float) -> str:
    return f"{t:g}"


def cmd_preprocess(args) -> int:
    cfg = resolve_config(args)
    if not cfg.dataset_root:
        raise ValueError("no dataset root given (use --dataset or the dataset_root config key)")
    params = cfg.dsp_params()
    manifest = scan_dataset(cfg.dataset_root)
    cache_dir = Path(cfg.cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    save_manifest(manifest, cache_dir / "manifest.tsv")
    for track in manifest.tracks:
        waveform = decode_wav(track.path)
        if waveform.sample_rate != params.sample_rate:
            waveform = resample(waveform, params.sample_rate)
        spec = mel_spectrogram(waveform, params, track_id=track.track_id)
        save_mel_cache(spec, cache_path(cache_dir, track.track_id))
    print(f"preprocessed {len(manifest.tracks)} tracks -> {cache_dir}")
    return 0


def cmd_split(args) -> int:
    cfg = resolve_config(args)
    manifest = _load_manifest(cfg)
    split = song_split(manifest, cfg.seed) if args.mode == "song" else album_split(manifest, cfg.seed)
    out = Path(args.out) if args.out else Path(cfg.out_dir) / f"split_{args.mode}_{cfg.seed}.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_split(split, out)
    print(f"wrote {out} (train={len(split.train)} val={len(split.val)} test={len(split.test)})")
    return 0


def _train_one(cfg: RunConfig, manifest, split: SplitSpec, clip_seconds: float):
    params = cfg.dsp_params()
    label_map = LabelMap.from_manifest(manifest)
    n_classes = cfg.n_classes or label_map.n_classes
    clip_frames = clip_frame_count(params, clip_seconds)
    model = build_model(cfg.crnn_config(n_classes), cfg.seed, clip_frames=clip_frames)
    train_clips = load_clips(manifest, split.train, cfg.cache_dir, params, clip_seconds)
    val_clips = load_clips(manifest, split.val, cfg.cache_dir, params, clip_seconds)
    _, history = train(model, train_clips, val_clips, cfg.train_config(clip_seconds))
    return model, history, label_map


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    manifest = _load_manifest(cfg)
    split = _load_split(cfg, args.split)
    t = cfg.clip_seconds
    model, history, _ = _train_one(cfg, manifest, split, t)
    out_dir = Path(cfg.out_dir)
    ckpt = Path(cfg.checkpoint) if cfg.checkpoint else out_dir / f"model_{_fmt_seconds(t)}s.ckpt"
    save_checkpoint(model, ckpt)
    write_history(history, out_dir / f"history_{_fmt_seconds(t)}s.tsv")
    best = min(h.val_loss for h in history)
    print(f"trained {len(history)} epochs, best val loss {best:.4f}, checkpoint {ckpt}")
    return 0


def _eval_context(split: SplitSpec, clip_seconds: float, seed: int) -> dict[str, str]:
    return {"mode": split.mode, "clip_seconds": _fmt_seconds(clip_seconds), "seed": str(seed)}


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    manifest = _load_manifest(cfg)
    split = _load_split(cfg, args.split)
    model = load_checkpoint(args.checkpoint)
    label_map = LabelMap.from_manifest(manifest)
    clips = load_clips(manifest, split.test, cfg.cache_dir, cfg.dsp_params(), cfg.clip_seconds)
    evaluate = frame_eval if args.level == "frame" else song_eval
    names = label_map.artists if label_map.n_classes == model.config.n_classes else None
    report = evaluate(model, clips, _eval_context(split, cfg.clip_seconds, cfg.seed), names)
    text = report.render()
    out = Path(cfg.out_dir) / f"report_{args.level}_{_fmt_seconds(cfg.clip_seconds)}s.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def cmd_embed(args) -> int:
    cfg = resolve_config(args)
    manifest = _load_manifest(cfg)
    split = _load_split(cfg, args.split)
    model = load_checkpoint(args.checkpoint)
    label_map = LabelMap.from_manifest(manifest)
    clips = load_clips(manifest, split.test, cfg.cache_dir, cfg.dsp_params(), cfg.clip_seconds)
    names = label_map.artists if label_map.n_classes == model.config.n_classes else None
    count = export_embeddings(model, clips, args.out, names)
    print(f"wrote {count} embeddings -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    manifest = _load_manifest(cfg)
    split = _load_split(cfg, args.split)
    label_map = LabelMap.from_manifest(manifest)
    lengths = [float(v) for v in args.sweep_lengths.split(",")]
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for t in lengths:
        model, history, _ = _train_one(cfg, manifest, split, t)
        tag = _fmt_seconds(t)
        save_checkpoint(model, out_dir / f"model_{tag}s.ckpt")
        write_history(history, out_dir / f"history_{tag}s.tsv")
        clips = load_clips(manifest, split.test, cfg.cache_dir, cfg.dsp_params(), t)
        names = label_map.artists
        scores = {}
        for level, evaluate in (("frame", frame_eval), ("song", song_eval)):
            report = evaluate(model, clips, _eval_context(split, t, cfg.seed), names)
            (out_dir / f"report_{level}_{tag}s.txt").write_text(report.render(), encoding="utf-8")
            scores[level] = report.weighted_f1
        print(f"t={tag}s frame_f1={scores['frame']:.4f} song_f1={scores['song']:.4f}")
    return 0


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="key/value config file")
    sp.add_argument("--cache-dir", dest="cache_dir", help="spectrogram cache directory")
    sp.add_argument("--out-dir", dest="out_dir", help="output directory")
    sp.add_argument("--seed", type=int, help="random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artistid",
        description="Music artist classification over mel-spectrogram clips.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="scan a dataset tree and cache mel spectrograms")
    p.add_argument("--dataset", dest="dataset_root", help="dataset root (artist/album/title.wav)")
    _add_common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("split", help="write a train/val/test split")
    p.add_argument("--mode", choices=("song", "album"), required=True)
    p.add_argument("--out", help="split file path")
    _add_common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model on a split")
    p.add_argument("--clip-seconds", dest="clip_seconds", type=float, help="clip length in seconds")
    p.add_argument("--split", help="split file")
    p.add_argument("--checkpoint", help="checkpoint output path")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test subset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--level", choices=("frame", "song"), required=True)
    p.add_argument("--split", help="split file")
    p.add_argument("--clip-seconds", dest="clip_seconds", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("embed", help="export bottleneck embeddings for the test subset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="embeddings file path")
    p.add_argument("--split", help="split file")
    p.add_argument("--clip-seconds", dest="clip_seconds", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("sweep", help="train and evaluate across clip lengths")
    p.add_argument("--clip-seconds", dest="sweep_lengths", required=True,
                   help="comma-separated lengths, e.g. 1,3,5,10,20,30")
    p.add_argument("--split", help="split file")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError, FloatingPointError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
