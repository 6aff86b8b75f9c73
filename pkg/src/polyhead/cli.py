"""Command-line entry point.

Subcommands: ``gen-weights`` (emit a polytope head as JSON), ``check``
(verify a head file), ``train`` (run a config-driven training job and
dump artifacts), ``eval`` (score a checkpoint on a dataset).

Exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import data as datamod
from . import losses, metrics, network
from .polytope import (ClassCountError, PolytopeKind, expected_angle,
                       load_json, make_weights, save_json, verify_geometry)

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_IO = 3


class ConfigError(ValueError):
    pass


@dataclass
class _RowsHead:
    """Duck-typed stand-in for ClassifierWeights in geometry reports."""
    rows: np.ndarray
    num_classes: int
    dim: int
    phi: float


def _require_keys(section: dict, allowed: set, required: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    missing = required - set(section)
    if missing:
        raise ConfigError(f"missing key(s) in {where}: {sorted(missing)}")


def _parse_loss(section: dict, phi: float) -> tuple:
    _require_keys(section, {"kind", "kappa", "m"}, {"kind"}, "loss")
    kind = section["kind"]
    kappa = float(section.get("kappa", losses.KAPPA_DEFAULT))
    m_raw = section.get("m", "max")
    m = phi if m_raw == "max" else float(m_raw)
    if kind == "plain_ce":
        return losses.PlainCE(), {"kind": kind}
    if kind == "fixed_softmax":
        return losses.FixedSoftmax(), {"kind": kind}
    if kind == "norm_scaled":
        return losses.NormScaled(kappa), {"kind": kind, "kappa": kappa}
    if kind == "angular_margin":
        return (losses.AngularMargin(kappa, m),
                {"kind": kind, "kappa": kappa, "m": m})
    raise ConfigError(f"unknown loss kind {kind!r}")


def _load_dataset(section: dict) -> datamod.LabeledBatch:
    kind = section.get("type")
    if kind == "blobs":
        _require_keys(section, {"type", "classes", "dim", "per_class", "spread",
                                "separation", "seed"},
                      {"type", "classes", "dim", "per_class", "spread",
                       "separation", "seed"}, "dataset")
        return datamod.make_blobs(int(section["classes"]), int(section["dim"]),
                                  int(section["per_class"]),
                                  float(section["spread"]),
                                  float(section["separation"]),
                                  int(section["seed"]))
    if kind == "idx":
        _require_keys(section, {"type", "images", "labels", "emnist", "limit"},
                      {"type", "images", "labels"}, "dataset")
        batch = datamod.load_idx(section["images"], section["labels"],
                                 emnist=bool(section.get("emnist", False)))
        limit = section.get("limit")
        if limit is not None:
            batch = datamod.LabeledBatch(batch.inputs[:int(limit)],
                                         batch.labels[:int(limit)])
        return batch
    raise ConfigError(f"dataset type must be 'blobs' or 'idx', got {kind!r}")


def cmd_gen_weights(args) -> int:
    try:
        weights = make_weights(PolytopeKind(args.kind), args.classes)
    except ClassCountError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    save_json(weights, args.out)
    print(f"kind={weights.kind.value} K={weights.num_classes} d={weights.dim}")
    print(f"phi={weights.phi:.10f} rad ({math.degrees(weights.phi):.6f} deg)")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        weights = load_json(args.weights)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    check = verify_geometry(weights, args.tol)
    status = "PASS" if check.passed else "FAIL"
    print(f"{status} worst_deviation={check.worst_deviation:.3e} "
          f"min_angle={check.min_angle:.10f}")
    if not check.passed:
        print(check.message)
        return EXIT_VERIFY
    return EXIT_OK


def _run_train(config: dict, out_dir: Path) -> int:
    _require_keys(config, {"seed", "epochs", "batch_size", "lr", "hidden_widths",
                           "loss", "classifier", "dataset", "out_dir"},
                  {"seed", "epochs", "hidden_widths", "loss", "classifier",
                   "dataset"}, "config")
    cls = config["classifier"]
    _require_keys(cls, {"kind", "classes", "trainable"}, {"kind", "classes"},
                  "classifier")
    kind = PolytopeKind(cls["kind"])
    weights = make_weights(kind, int(cls["classes"]))
    trainable = bool(cls.get("trainable", False))

    loss_kind, loss_echo = _parse_loss(config["loss"], weights.phi)
    dataset = _load_dataset(config["dataset"])

    hidden = [int(w) for w in config["hidden_widths"]]
    if not hidden or hidden[-1] != weights.dim:
        hidden = hidden + [weights.dim]  # embedding layer appended when omitted
    seed = int(config["seed"])
    train_cfg = network.TrainConfig(
        loss=loss_kind,
        epochs=int(config["epochs"]),
        seed=seed,
        hidden_widths=hidden,
        batch_size=int(config.get("batch_size", 512)),
        lr=float(config.get("lr", 0.0005)),
    )
    if trainable:
        model = network.init_model(dataset.inputs.shape[1], hidden, None, seed,
                                   trainable_classes=weights.num_classes)
    else:
        model = network.init_model(dataset.inputs.shape[1], hidden, weights, seed)
    model, log = network.train(model, dataset, train_cfg)

    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = dict(config)
    resolved["loss"] = loss_echo
    resolved["hidden_widths"] = hidden
    with open(out_dir / "config_resolved.json", "w") as fh:
        json.dump(resolved, fh, indent=2)

    with open(out_dir / "epochs.csv", "w") as fh:
        fh.write("epoch,mean_loss,train_accuracy\n")
        for row in log:
            fh.write(f"{row.epoch},{row.mean_loss!r},{row.train_accuracy!r}\n")

    network.save_checkpoint(model, out_dir / "checkpoint.json", extra=resolved)

    feats, _, _ = network.forward(model, dataset.inputs)
    preds = network.predict(model, dataset.inputs)
    head = weights if not trainable else _trainable_head_shim(model, weights.phi)
    report = metrics.geometry_report(head, feats, dataset.labels, preds)
    report.save(out_dir / "geometry.json")
    metrics.export_scatter(feats, dataset.labels, False, out_dir / "features.csv")
    metrics.export_scatter(feats, dataset.labels, True,
                           out_dir / "features_norm.csv")

    print(f"final mean_loss={log[-1].mean_loss:.6f} "
          f"train_accuracy={log[-1].train_accuracy:.4f}")
    print(f"min_pairwise_mean_angle={report.min_pairwise_mean_angle:.6f} "
          f"phi={report.phi:.6f}")
    return EXIT_OK


def _trainable_head_shim(model: network.MlpModel, phi: float) -> _RowsHead:
    rows = model.head.rows
    unit = rows / np.linalg.norm(rows, axis=1, keepdims=True)
    return _RowsHead(unit, rows.shape[0], rows.shape[1], phi)


def cmd_train(args) -> int:
    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"config parse error at line {exc.lineno}, column {exc.colno}: "
              f"{exc.msg}", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(args.out_dir or config.get("out_dir", "run"))
    try:
        return _run_train(config, out_dir)
    except (ConfigError, ClassCountError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def cmd_eval(args) -> int:
    try:
        model = network.load_checkpoint(args.checkpoint)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        if args.images:
            dataset = datamod.load_idx(args.images, args.labels,
                                       emnist=args.emnist)
        elif args.blobs_classes:
            dataset = datamod.make_blobs(args.blobs_classes, args.blobs_dim,
                                         args.blobs_per_class, args.blobs_spread,
                                         args.blobs_separation, args.blobs_seed)
        else:
            print("error: provide --images/--labels or --blobs-* options",
                  file=sys.stderr)
            return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (datamod.IdxFormatError, datamod.EmptyDatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        feats, _, _ = network.forward(model, dataset.inputs)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    preds = network.predict(model, dataset.inputs)
    if isinstance(model.head, network.FixedHead):
        head = model.head.weights
    else:
        head = _trainable_head_shim(model, math.nan)
    report = metrics.geometry_report(head, feats, dataset.labels, preds)
    print(f"accuracy={report.accuracy:.4f}")
    print(f"min_pairwise_mean_angle={report.min_pairwise_mean_angle:.6f}")
    if args.out:
        report.save(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyhead")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-weights", help="emit polytope classifier weights")
    p.add_argument("--kind", required=True,
                   choices=[k.value for k in PolytopeKind])
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_weights)

    p = sub.add_parser("check", help="verify a weights file")
    p.add_argument("--weights", required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("train", help="train from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--images")
    p.add_argument("--labels")
    p.add_argument("--emnist", action="store_true")
    p.add_argument("--blobs-classes", type=int)
    p.add_argument("--blobs-dim", type=int, default=2)
    p.add_argument("--blobs-per-class", type=int, default=100)
    p.add_argument("--blobs-spread", type=float, default=1.0)
    p.add_argument("--blobs-separation", type=float, default=6.0)
    p.add_argument("--blobs-seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
