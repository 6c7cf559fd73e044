"""Command-line front door: every pipeline stage as a subcommand.

stdout carries machine-readable results only (key=value lines, prediction
lines, or CSV); everything meant for a human goes to stderr. Exit codes:
0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import evalx, knn, labelsvc, tsne
from .capgen import (
    STYLES,
    GenStyle,
    generate_cells,
    generate_dataset,
    split_sizes,
)
from .dataset import load_split
from .imageio import (
    MANIFEST_NAME,
    DatasetManifest,
    ManifestRecord,
    load_manifest,
    read_image,
    write_manifest,
    write_pgm,
)
from .nn import (
    ModelSpec,
    TrainConfig,
    batchnorm,
    char_cnn_spec,
    conv2d,
    dense,
    dropout,
    encode_labels,
    evaluate,
    flatten,
    grad_check,
    history_to_csv,
    load_weights,
    maxpool2d,
    multihead_spec,
    predict_strings,
    relu,
    save_weights,
    train,
)
from .segment import PREPROCESS_MODES, binarize, segment_pipeline

MODE_CHOICES = ("none",) + PREPROCESS_MODES


def _mode(args) -> str | None:
    return None if args.mode == "none" else args.mode


def _fractions(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three fractions, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _load_lines(path) -> list[str]:
    with open(path, "r", encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f if line.rstrip("\n")]


def _cmd_generate(args) -> int:
    if args.cells:
        if not args.charset:
            raise ValueError("--cells needs --charset")
        cells, labels = generate_cells(args.charset, args.per_class, args.cell, args.seed)
        n_train, n_val, n_test = split_sizes(len(labels), args.fractions)
        assignment = ["train"] * n_train + ["val"] * n_val + ["test"] * n_test
        img_dir = os.path.join(args.out, "images")
        os.makedirs(img_dir, exist_ok=True)
        records = []
        for i, (cell, ch) in enumerate(zip(cells, labels)):
            rel = f"images/{i:06d}_{ch}.pgm"
            write_pgm(cell, os.path.join(args.out, rel))
            records.append(ManifestRecord(rel, ch, assignment[i]))
        manifest = DatasetManifest(records)
        write_manifest(manifest, os.path.join(args.out, MANIFEST_NAME))
    else:
        style = GenStyle.preset(args.style, args.length, args.charset or None)
        manifest = generate_dataset(style, args.count, args.fractions, args.seed, args.out)
    for split in ("train", "val", "test"):
        print(f"{split}={len(manifest.by_split(split))}")
    return 0


def _cmd_preprocess(args) -> int:
    mask = binarize(read_image(args.infile), args.mode)
    write_pgm(mask.to_gray(), args.out)
    print(args.out)
    return 0


def _cmd_segment(args) -> int:
    cells = segment_pipeline(
        read_image(args.infile), args.mode, args.cell, min_area=args.min_area
    )
    os.makedirs(args.out, exist_ok=True)
    for i, cell in enumerate(cells):
        write_pgm(cell, os.path.join(args.out, f"cell_{i:02d}.pgm"))
    print(f"cells={len(cells)}")
    return 0


def _segmented_cells(args, split: str):
    """Segment every image of a split into per-character cells, keeping
    only images whose cell count matches their label length."""
    manifest = load_manifest(os.path.join(args.data, MANIFEST_NAME))
    records = manifest.by_split(split)
    if not records:
        raise ValueError(f"split {split!r} of {args.data} is empty")
    cells, labels, skipped = [], [], 0
    for rec in records:
        img = read_image(os.path.join(args.data, rec.file))
        parts = segment_pipeline(img, args.mode, args.cell, min_area=args.min_area)
        if len(parts) != len(rec.label):
            skipped += 1
            continue
        cells.extend(parts)
        labels.extend(rec.label)
    if not cells:
        raise ValueError(f"no image in split {split!r} segmented to its label length")
    return cells, labels, skipped


def _cmd_knn_train(args) -> int:
    cells, labels, skipped = _segmented_cells(args, args.split)
    model = knn.fit(cells, labels, charset=args.charset or None)
    knn.save_knn(model, args.out)
    print(f"n={len(labels)} skipped={skipped}")
    return 0


def _cmd_knn_eval(args) -> int:
    model = knn.load_knn(args.model)
    cells, labels, skipped = _segmented_cells(args, args.split)
    if skipped:
        print(f"skipped {skipped} images that segmented badly", file=sys.stderr)
    rows = knn.sweep_k(model, cells, labels, args.ks)
    lines = ["k,accuracy"] + [f"{k},{acc:.6f}" for k, acc in rows]
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    return 0


def _train_data(args):
    train_xs, train_labels = load_split(args.data, "train", preprocess=_mode(args))
    val_xs, val_labels = load_split(args.data, "val", preprocess=_mode(args))
    charset = args.charset or "".join(sorted(set("".join(train_labels))))
    length = len(train_labels[0])
    return train_xs, train_labels, val_xs, val_labels, charset, length


def _cmd_train(args) -> int:
    train_xs, train_labels, val_xs, val_labels, charset, length = _train_data(args)
    h, w = train_xs.shape[1:3]
    if args.arch == "char":
        if length != 1:
            raise ValueError(f"char architecture needs length-1 labels, got {length}")
        if h != w:
            raise ValueError(f"char architecture needs square cells, got {h}x{w}")
        spec = char_cnn_spec(charset, cell=h)
    else:
        spec = multihead_spec(charset, length, h, w)
    cfg = TrainConfig(
        optimizer=args.optimizer,
        lr=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
    )
    model, history = train(
        spec,
        train_xs,
        encode_labels(train_labels, charset, length),
        val_xs,
        encode_labels(val_labels, charset, length),
        cfg,
    )
    save_weights(model, args.out)
    if args.history:
        history_to_csv(history, args.history)
    head_accs, full = evaluate(model, val_xs, encode_labels(val_labels, charset, length))
    print(f"full={full:g} per_char={sum(head_accs) / len(head_accs):g}")
    return 0


def _cmd_predict(args) -> int:
    model = load_weights(args.weights)
    xs, _ = load_split(args.data, args.split, preprocess=_mode(args))
    preds = predict_strings(model, xs)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write("\n".join(preds) + "\n")
    else:
        print("\n".join(preds))
    return 0


def _cmd_eval(args) -> int:
    preds = _load_lines(args.pred)
    truths = _load_lines(args.truth)
    report = evalx.score(preds, truths, charset=args.charset or None)
    if args.report:
        evalx.write_report_csv(report, args.report)
    if args.confusion:
        evalx.write_confusion_csv(report, args.confusion)
    print(f"full={report.full_string_accuracy:g} per_char={report.per_char_accuracy:g}")
    return 0


def _cmd_length_study(args) -> int:
    cfg = TrainConfig(
        optimizer=args.optimizer,
        lr=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
    )
    rows = evalx.length_study(
        args.lengths, args.work, samples_per_length=args.samples, cfg=cfg, seed=args.seed
    )
    if args.out:
        evalx.write_length_study_csv(rows, args.out)
    for r in rows:
        ref = "" if r.reference_percent is None else f" reference={r.reference_percent}"
        print(f"L={r.length} full={r.full_acc:g} per_char={r.per_char_acc:g}{ref}")
    return 0


def _cmd_embed(args) -> int:
    manifest = load_manifest(os.path.join(args.data, MANIFEST_NAME))
    records = manifest.by_split(args.split)
    xs, labels = load_split(args.data, args.split, preprocess=_mode(args))
    if args.sample and args.sample < len(records):
        records = records[: args.sample]
        xs, labels = xs[: args.sample], labels[: args.sample]
    points = xs.reshape(len(records), -1).astype(np.float64)
    y, trace = tsne.embed(
        points,
        dims=args.dims,
        perplexity=args.perplexity,
        iters=args.iters,
        seed=args.seed,
    )
    tsne.write_embedding_csv(args.out, [r.file for r in records], labels, y)
    print(f"n={len(records)} kl={trace[-1]:.6f}")
    return 0


def _cmd_grad_check(args) -> int:
    # Small enough for exhaustive central differences, deep enough to touch
    # every layer kind. Dropout rate 0 keeps the loss surface smooth.
    spec = ModelSpec(
        input_shape=(8, 8, 1),
        backbone=(
            conv2d(4, 3),
            relu(),
            batchnorm(),
            maxpool2d(2),
            dropout(0.0),
            flatten(),
            dense(16),
            relu(),
        ),
        charset="ABCDE",
        n_heads=2,
    )
    err = grad_check(spec, args.seed, batch=args.batch, eps=args.eps)
    print(f"max_rel_err={err:g}")
    return 0 if err < 1e-4 else 1


def _cmd_label_serve(args) -> int:
    try:
        labelsvc.serve(
            args.data, args.charset, args.length, args.port, ui_dir=args.ui or None
        )
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="captchakit", description=__doc__.splitlines()[0]
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="upper bound on worker threads (current pipelines always use 1)",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(fn=fn)
        return p

    p = add("generate", _cmd_generate, "render a captcha or cell dataset")
    p.add_argument("--style", choices=STYLES, default="clean")
    p.add_argument("--length", type=int, default=4)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--charset", default="")
    p.add_argument("--fractions", type=_fractions, default=(0.8, 0.1, 0.1))
    p.add_argument("--cells", action="store_true", help="single-character cells instead of captchas")
    p.add_argument("--per-class", type=int, default=100, help="cells per character (with --cells)")
    p.add_argument("--cell", type=int, default=16, help="cell side in px (with --cells)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)

    p = add("preprocess", _cmd_preprocess, "binarize one image to a PGM mask")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--mode", choices=PREPROCESS_MODES, required=True)
    p.add_argument("--out", required=True)

    p = add("segment", _cmd_segment, "split one captcha into classifier cells")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--mode", choices=PREPROCESS_MODES, required=True)
    p.add_argument("--cell", type=int, default=16)
    p.add_argument("--min-area", type=int, default=4)
    p.add_argument("--out", required=True)

    p = add("knn-train", _cmd_knn_train, "fit a k-NN model from segmented captchas")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--mode", choices=PREPROCESS_MODES, default="jam")
    p.add_argument("--cell", type=int, default=20)
    p.add_argument("--min-area", type=int, default=4)
    p.add_argument("--charset", default="")
    p.add_argument("--out", required=True)

    p = add("knn-eval", _cmd_knn_eval, "per-character accuracy of a k-NN model over k")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="val")
    p.add_argument("--mode", choices=PREPROCESS_MODES, default="jam")
    p.add_argument("--cell", type=int, default=20)
    p.add_argument("--min-area", type=int, default=4)
    p.add_argument("--ks", type=_int_list, default=[1, 3, 5, 7])
    p.add_argument("--out", default="")

    p = add("train", _cmd_train, "train a CNN on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--arch", choices=("char", "multihead"), default="multihead")
    p.add_argument("--mode", choices=MODE_CHOICES, default="none")
    p.add_argument("--charset", default="")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--history", default="", help="write per-epoch stats CSV here")
    p.add_argument("--out", required=True)

    p = add("predict", _cmd_predict, "decode a split with trained weights")
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--mode", choices=MODE_CHOICES, default="none")
    p.add_argument("--out", default="")

    p = add("eval", _cmd_eval, "score prediction lines against truth lines")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--charset", default="")
    p.add_argument("--report", default="", help="write metric CSV here")
    p.add_argument("--confusion", default="", help="write confusion CSV here")

    p = add("length-study", _cmd_length_study, "accuracy vs captcha length under one budget")
    p.add_argument("--lengths", type=_int_list, default=[3, 4, 5])
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--work", required=True, help="staging dir for the per-length datasets")
    p.add_argument("--out", default="", help="write the study CSV here")

    p = add("embed", _cmd_embed, "2-D/3-D embedding of a split, written as CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--mode", choices=MODE_CHOICES, default="none")
    p.add_argument("--sample", type=int, default=0, help="use only the first N records")
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)

    p = add("grad-check", _cmd_grad_check, "verify analytic gradients over every layer kind")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--batch", type=int, default=3)

    p = add("label-serve", _cmd_label_serve, "serve the labelling UI over a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--charset", required=True)
    p.add_argument("--length", type=int, default=0, help="expected label length, 0 = free")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui", default="", help="directory of built UI assets to serve at /")

    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except (KeyboardInterrupt, SystemExit):
        raise
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
