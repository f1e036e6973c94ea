"""Command-line entry point: ``clstm-bearing <command> [flags]``.

Exit status is 0 on success, 1 for usage errors, 2 for unreadable or
malformed data and 3 when training diverges. Every command that writes
files also writes a JSON run manifest next to them; ``rerun`` replays one.
"""
import argparse
import csv
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__, checkpoint
from .audio_io import frame_array, read_wav
from .errors import ClstmError, DataFormatError, DivergenceError, UnsupportedFormatError
from .features import build_features
from .labels import CLASS_NAMES, FaultLabel
from .model import ModelConfig, build_model, format_summary
from .nn import gradsuite
from .synth import Split, SynthConfig, clip_name, load_dataset, write_corpus
from .train_eval import (
    TrainConfig,
    evaluate,
    export_confusion,
    export_history,
    fpr_normal,
    normal_false_alarm_rate,
    precision_recall,
    predict,
    train,
)

log = logging.getLogger("clstm_bearing")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3
MANIFEST_FILE = "run_manifest.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def atomic_write_text(path, text):
    """Write via a temporary file in the same directory and rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_run_manifest(path, command, args, inputs, outputs, started):
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}
    manifest = {
        "command": command,
        "config": config,
        "seeds": {k: v for k, v in config.items() if "seed" in k},
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "duration_s": round(time.perf_counter() - started, 3),
    }
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# -- commands ---------------------------------------------------------------

def cmd_synth(args):
    started = time.perf_counter()
    cfg = SynthConfig(
        rpm=args.rpm, sample_rate_hz=args.sample_rate, clip_seconds=args.seconds,
        positions=args.positions, resonance_hz=args.resonance_hz,
        noise_rms=args.noise_rms, rng_seed=args.seed,
    )
    out = Path(args.out)
    manifest = write_corpus(cfg, out)
    wavs = sorted(out / f"{name}.wav" for name in _clip_names(cfg))
    write_run_manifest(out / MANIFEST_FILE, "synth", args, [], wavs + [manifest], started)
    print(f"wrote {len(wavs)} clips to {out}")
    return EXIT_OK


def _clip_names(cfg):
    return [clip_name(label, pos) for label in FaultLabel for pos in range(cfg.positions)]


def cmd_features(args):
    started = time.perf_counter()
    data = load_dataset(args.data, args.frame_len, args.seed, args.seq_len)
    idx = np.arange(len(data)) if args.split == "all" else data.indices(Split[args.split.upper()])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "bin":
        checkpoint.save_tensors(out, {
            "features": data.x[idx],
            "labels": data.labels[idx].astype(np.float64),
            "split": data.split[idx].astype(np.float64),
            "frame_index": data.frame_index[idx].astype(np.float64),
            "stats": np.asarray(data.stats.as_array()),
        })
    else:
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for i in idx:
                writer.writerow([repr(float(v)) for v in data.x[i].reshape(-1)] + [int(data.labels[i])])
    write_run_manifest(out.parent / MANIFEST_FILE, "features", args, [args.data], [out], started)
    print(f"wrote {idx.size} features of shape {data.x.shape[1:]} to {out}")
    return EXIT_OK


def cmd_train(args):
    started = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = load_dataset(args.data, args.frame_len, args.seed, args.seq_len)
    log.info("dataset: %s", data.counts())
    model = build_model(ModelConfig(frame_len=args.frame_len, sequence_len=args.seq_len), init_seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch, learning_rate=args.lr,
                      momentum=args.momentum, shuffle_seed=args.seed)
    result = train(model, data, cfg)
    outputs = []
    if result.best_checkpoint is not None:
        (out / "best.ckpt").write_bytes(result.best_checkpoint)
        outputs.append(out / "best.ckpt")
    else:
        log.warning("validation accuracy never reached %.2f; no best checkpoint written",
                    cfg.val_accuracy_save_threshold)
    (out / "final.ckpt").write_bytes(result.final_checkpoint)
    export_history(result.history, out / "history.csv")
    outputs += [out / "final.ckpt", out / "history.csv"]
    write_run_manifest(out / MANIFEST_FILE, "train", args, [args.data], outputs, started)
    hist = result.history
    print(f"final_val_acc={hist.val_acc[-1]!r}")
    print(f"best_epoch={'' if hist.best_epoch is None else hist.best_epoch}")
    return EXIT_OK


def cmd_eval(args):
    started = time.perf_counter()
    model, meta = checkpoint.load_checkpoint(args.ckpt)
    cfg = model.config
    data = load_dataset(args.data, cfg.frame_len, meta.seed, cfg.sequence_len, stats=meta.stats)
    res = evaluate(model, data, Split[args.split.upper()])
    precision, recall = precision_recall(res.confusion)
    lines = [f"split={args.split}", f"samples={int(res.confusion.sum())}",
             f"accuracy={res.accuracy!r}", f"loss={res.loss!r}"]
    for name, p, r in zip(CLASS_NAMES, precision, recall):
        lines += [f"precision_{name}={float(p)!r}", f"recall_{name}={float(r)!r}"]
    lines.append(f"fpr_normal={fpr_normal(res.confusion)!r}")
    lines.append(f"normal_false_alarm_rate={normal_false_alarm_rate(res.confusion)!r}")
    for name, row in zip(CLASS_NAMES, res.confusion):
        lines.append(f"confusion_{name}=" + ",".join(str(int(v)) for v in row))
    print("\n".join(lines))
    out = Path(args.out) if args.out else Path(args.ckpt).parent / f"confusion_{args.split}.csv"
    export_confusion(res.confusion, out)
    write_run_manifest(out.parent / f"eval_{args.split}_manifest.json", "eval", args,
                       [args.ckpt, args.data], [out], started)
    return EXIT_OK


def cmd_infer(args):
    started = time.perf_counter()
    model, meta = checkpoint.load_checkpoint(args.ckpt)
    cfg = model.config
    clip = read_wav(args.wav)
    if clip.sample_rate_hz != meta.sample_rate_hz:
        raise UnsupportedFormatError(
            f"{args.wav} is sampled at {clip.sample_rate_hz} Hz, the model was trained at {meta.sample_rate_hz} Hz")
    frames = frame_array(clip.samples, cfg.frame_len)
    n_units = frames.shape[0] // cfg.sequence_len
    rows = ["frame_index,predicted_label,probability"]
    if n_units == 0:
        log.warning("%s holds fewer than %d samples; no predictions", args.wav, cfg.frame_len * cfg.sequence_len)
    else:
        feats = build_features(frames[: n_units * cfg.sequence_len], meta.stats)
        x = feats.reshape(n_units, cfg.sequence_len, 2, cfg.frame_len)
        pred, probs = predict(model, x)
        for u in range(n_units):
            rows.append(f"{u * cfg.sequence_len},{CLASS_NAMES[pred[u]]},{float(probs[u, pred[u]])!r}")
    text = "\n".join(rows) + "\n"
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        write_run_manifest(out.parent / "infer_manifest.json", "infer", args, [args.ckpt, args.wav], [out], started)
    return EXIT_OK


def cmd_gradcheck(args):
    failed = False
    print(f"{'layer':<24}{'max_rel_error':>16}{'threshold':>12}  status")
    for name, fn, tol in gradsuite.LAYER_CHECKS:
        res = gradsuite.CheckResult(name, fn(eps=args.eps, seed=args.seed), tol)
        failed |= not res.passed
        print(f"{res.name:<24}{res.error:>16.3e}{res.threshold:>12.0e}  {'ok' if res.passed else 'FAIL'}")
    return EXIT_DIVERGED if failed else EXIT_OK


def cmd_summary(args):
    print(format_summary(build_model(ModelConfig(frame_len=args.frame_len, sequence_len=args.seq_len))))
    return EXIT_OK


def cmd_rerun(args):
    manifest = json.loads(Path(args.manifest).read_text())
    command = manifest.get("command")
    if command not in COMMANDS or not isinstance(manifest.get("config"), dict):
        raise DataFormatError(f"{args.manifest} is not a run manifest")
    ns = argparse.Namespace(**manifest["config"])
    return COMMANDS[command](ns)


COMMANDS = {
    "synth": cmd_synth,
    "features": cmd_features,
    "train": cmd_train,
    "eval": cmd_eval,
    "infer": cmd_infer,
    "gradcheck": cmd_gradcheck,
    "summary": cmd_summary,
}


def build_parser():
    parser = _Parser(prog="clstm-bearing", description="Acoustic bearing-fault diagnosis with a conv-LSTM.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate the synthetic WAV corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--rpm", type=float, default=2000.0)
    p.add_argument("--seconds", type=float, default=40.0)
    p.add_argument("--positions", type=_positive_int, default=5)
    p.add_argument("--noise-rms", type=float, default=0.1)
    p.add_argument("--sample-rate", type=_positive_int, default=48000)
    p.add_argument("--resonance-hz", type=float, default=4000.0)

    p = sub.add_parser("features", help="write standardized time/frequency features")
    p.add_argument("--data", required=True)
    p.add_argument("--frame-len", type=_positive_int, default=4800)
    p.add_argument("--seq-len", type=_positive_int, default=1)
    p.add_argument("--seed", type=_u64, default=0, help="split seed")
    p.add_argument("--split", choices=("all", "train", "val", "test"), default="all")
    p.add_argument("--format", choices=("bin", "csv"), default="bin")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a model on a synth directory")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=_positive_int, default=10)
    p.add_argument("--batch", type=_positive_int, default=128)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.0)
    p.add_argument("--frame-len", type=_positive_int, default=4800)
    p.add_argument("--seq-len", type=_positive_int, default=1)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score a checkpoint on a split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("test", "val"), default="test")
    p.add_argument("--out", default=None, help="confusion CSV path (default: next to the checkpoint)")

    p = sub.add_parser("infer", help="per-frame predictions for one WAV")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--out", default=None, help="also write the CSV here")

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--seed", type=_u64, default=0)

    p = sub.add_parser("summary", help="print the layer and parameter table")
    p.add_argument("--frame-len", type=_positive_int, default=4800)
    p.add_argument("--seq-len", type=_positive_int, default=1)

    p = sub.add_parser("rerun", help="replay a run manifest")
    p.add_argument("manifest")

    for name, parser_ in sub.choices.items():
        parser_.set_defaults(func=COMMANDS.get(name, cmd_rerun))
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except DivergenceError as exc:
        log.error("%s", exc)
        return EXIT_DIVERGED
    except (DataFormatError, OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except (ClstmError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
