"""``facekit`` command-line experiment harness."""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path

from . import experiments as ex
from .dataset import (LabeledDataset, encode_pgm, read_manifest, stratified_split,
                      synth_dataset, write_dataset)
from .errors import FacekitError
from .plot import svg_chart


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _write(path: Path, data) -> None:
    """Write via a temporary file so a failed run never leaves a partial file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    if isinstance(data, str):
        tmp.write_text(data, encoding="utf-8", newline="\n")
    else:
        tmp.write_bytes(data)
    os.replace(tmp, path)


def _config(args) -> ex.ExperimentConfig:
    values = {}
    if args.config:
        values.update(ex.parse_config_text(Path(args.config).read_text(encoding="utf-8")))
    overrides = {
        "dataset": args.dataset, "seed": args.seed, "out": args.out,
        "methods": args.methods, "metrics": args.metrics, "votings": args.votings,
        "per_class_train": args.per_class_train, "per_class_test": args.per_class_test,
        "t": args.t, "d": args.d, "d_original": args.d_original, "k": args.k, "b": args.b,
        "repeats": args.repeats, "equalize": args.equalize,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ex.ExperimentConfig.from_mapping(values)


def _csv_list(text):
    return [v for v in text.split(",") if v.strip()]


def cmd_table(args):
    cfg = _config(args)
    header, rows = ex.run_table(cfg)
    _write(Path(cfg.out) / "table.csv", csv_text(header, rows))


def cmd_entropy_sweep(args):
    cfg = _config(args)
    header, rows = ex.run_entropy_sweep(cfg, args.over, _csv_list(args.values))
    out = Path(cfg.out)
    _write(out / f"entropy_{args.over}.csv", csv_text(header, rows))
    if args.svg:
        series = {}
        for method, metric, _, value, *_rest in rows:
            series.setdefault(f"{method} {metric}", []).append((value, _rest[2]))
        _write(out / f"entropy_{args.over}.svg",
               svg_chart(series, f"Entropy vs {args.over}", args.over, "entropy"))


def cmd_ari_report(args):
    cfg = _config(args)
    header, rows = ex.run_ari_report(cfg)
    out = Path(cfg.out)
    _write(out / "ari.csv", csv_text(header, rows))
    if args.svg:
        series = {}
        for method, metric, i, _l, _r, ari, _w in rows:
            series.setdefault(f"{method} {metric}", []).append((i, ari))
        _write(out / "ari.svg", svg_chart(series, "Classifier ARI", "classifier", "ARI", lines=False))


def cmd_b_sweep(args):
    cfg = _config(args)
    header, rows = ex.run_b_sweep(cfg, _csv_list(args.b_values))
    out = Path(cfg.out)
    _write(out / "b_sweep.csv", csv_text(header, rows))
    if args.svg:
        series = {}
        for method, metric, b, _n, mean, *_ in rows:
            series.setdefault(f"{method} {metric}", []).append((b, mean))
        _write(out / "b_sweep.svg", svg_chart(series, "Accuracy vs b", "b", "accuracy"))


def cmd_reconstruct(args):
    cfg = _config(args)
    ds = ex.load_dataset(cfg)
    header, rows, mosaic = ex.run_reconstruction(ds, args.image, _csv_list(args.d_values), args.method)
    out = Path(cfg.out)
    _write(out / "reconstruction.pgm", encode_pgm(mosaic))
    _write(out / "reconstruction.csv", csv_text(header, rows))


def cmd_split(args):
    cfg = _config(args)
    ds = read_manifest(cfg.dataset, equalize=cfg.equalize)
    plan = stratified_split(ds, cfg.per_class_train, cfg.per_class_test, cfg.seed)
    _write(Path(cfg.out) / "split.txt", plan.to_text())


def cmd_synth(args):
    ds = synth_dataset(args.classes, args.per_class, (args.rows, args.cols),
                       args.class_sep, args.noise, args.seed if args.seed is not None else 0)
    # one global affine map to 0..255 keeps relative structure intact
    lo, hi = ds.images.min(), ds.images.max()
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    pixels = LabeledDataset((ds.images - lo) * scale, ds.labels, ds.class_names)
    write_dataset(pixels, Path(args.out or "."), binary=not args.ascii)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="facekit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--dataset", help="manifest file: '<relative-path> <label>' per line")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--methods", help="comma list, e.g. R2DLDA,B2DPCA")
    common.add_argument("--metrics", help="comma list of frobenius,cosine")
    common.add_argument("--votings", help="comma list of weighted,unweighted,original")
    common.add_argument("--per-class-train", type=int)
    common.add_argument("--per-class-test", type=int)
    common.add_argument("--t", type=int, help="classifiers per ensemble")
    common.add_argument("--d", type=int, help="eigenvectors per classifier (per side)")
    common.add_argument("--d-original", type=int, help="top eigenvectors for the 'original' baseline")
    common.add_argument("--k", type=int, help="nearest neighbours")
    common.add_argument("--b", type=float, help="ARI weighting exponent")
    common.add_argument("--repeats", type=int)
    common.add_argument("--equalize", action="store_const", const=True,
                        help="histogram-equalize images on load")

    p = sub.add_parser("table", parents=[common], help="accuracy table over the method grid")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("entropy-sweep", parents=[common], help="ensemble entropy over d or T")
    p.add_argument("--over", choices=("d", "t"), default="d")
    p.add_argument("--values", required=True, help="comma list of sweep values")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_entropy_sweep)

    p = sub.add_parser("ari-report", parents=[common], help="per-classifier ARI")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_ari_report)

    p = sub.add_parser("b-sweep", parents=[common], help="accuracy over weighting exponents")
    p.add_argument("--b-values", required=True, help="comma list of exponents")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_b_sweep)

    p = sub.add_parser("reconstruct", parents=[common], help="PCA reconstruction mosaic")
    p.add_argument("--image", type=int, default=0, help="dataset index of the image")
    p.add_argument("--d-values", required=True, help="comma list of eigenvector counts")
    p.add_argument("--method", default="R2DPCA", choices=("R2DPCA", "L2DPCA"))
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("split", parents=[common], help="write a stratified split plan")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("synth", help="write a synthetic PGM dataset with manifest")
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--per-class", type=int, default=10)
    p.add_argument("--rows", type=int, default=32)
    p.add_argument("--cols", type=int, default=28)
    p.add_argument("--class-sep", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--ascii", action="store_true", help="write P2 instead of P5")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (FacekitError, ValueError, OSError) as exc:
        print(f"facekit {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
