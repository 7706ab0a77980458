"""``kahm`` command line: fit, predict, fedsim, bounds, grid, validate.

Exit codes: 0 success, 1 input/build/domain failure, 2 empty class,
3 validation score above threshold.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import bounds as bnd
from . import io as kio
from .errors import EmptyClass, KahmError
from .federation import (
    LabeledDataset,
    assumption_score,
    build_global_model,
    distance_tensor,
    predict_global,
    predict_local,
)
from .fedsim import Mode, PartitionSpec, preprocess_tanh, run_federation
from .partitioned import DEFAULT_MAX_PART_SIZE

VALIDATION_THRESHOLD = 0.01


class CliFailure(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def _transform(X: np.ndarray, args) -> np.ndarray:
    if getattr(args, "scale255", False):
        if X.size and (X.min() < 0 or X.max() > 255):
            raise CliFailure("--scale255: values outside [0, 255]")
        X = X / 255.0
    if getattr(args, "tanh", False):
        X = preprocess_tanh(X)
    return X


def _load(path, args, class_count=None) -> LabeledDataset:
    try:
        data = kio.load_dataset(path)
    except (OSError, KahmError) as exc:
        raise CliFailure(str(exc)) from None
    try:
        return LabeledDataset(
            _transform(data.samples, args),
            data.labels,
            data.clients,
            class_count=class_count,
            client_count=None,
        )
    except ValueError as exc:
        raise CliFailure(str(exc)) from None


def cmd_fit(args) -> int:
    data = _load(args.data, args)
    try:
        gm = build_global_model(data, args.seed, args.max_part_size)
    except EmptyClass as exc:
        raise CliFailure(str(exc), code=2) from None
    blob = kio.save_model(gm, args.out)
    print(f"classes={gm.class_count} clients={gm.client_count} dim={gm.dim} cells={len(gm.cells)}")
    for (c, q) in gm.cell_keys:
        cell = gm.cells[(c, q)]
        dims = ",".join(str(p.subspace_dim) for p in cell.parts)
        lams = ",".join(f"{p.lambda_star:.6g}" for p in cell.parts)
        print(f"cell c={c} q={q} size={cell.n_samples} parts={cell.n_parts} n={dims} lambda={lams}")
    print(f"E={assumption_score(gm, data):.6g}")
    print(f"checksum={kio.archive_checksum(blob):016x}")
    return 0


def cmd_predict(args) -> int:
    gm = kio.load_model(args.model)
    try:
        M, header = kio.read_table(args.data)
    except (OSError, KahmError) as exc:
        raise CliFailure(str(exc)) from None
    labels = None
    if header is not None and "label" in header or M.shape[1] == gm.dim + 1:
        X, labels, _ = kio.split_columns(M, header, args.data)
    else:
        X = M
    if X.shape[1] != gm.dim:
        raise CliFailure(f"dimension mismatch: data has {X.shape[1]} features, model expects {gm.dim}")
    X = _transform(X, args)
    if args.client is not None:
        pred = predict_local(gm, args.client, X)
    else:
        pred = predict_global(gm, X, distance_tensor(gm, X))
    cols = {"predicted": pred.class_ids}
    if args.scores:
        for c in range(gm.class_count):
            cols[f"distance_{c + 1}"] = pred.distances[:, c]
        scores = pred.scores
        for c in range(gm.class_count):
            cols[f"score_{c + 1}"] = scores[:, c]
    kio.write_table(args.out, cols)
    print(f"rows={len(pred)}")
    if labels is not None:
        print(f"accuracy={float(np.mean(pred.class_ids == labels)):.6f}")
    return 0


def cmd_fedsim(args) -> int:
    train = _load(args.train, args)
    test = _load(args.test, args, class_count=train.class_count)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    mode = Mode(args.mode)
    reports = []
    for seed in seeds:
        spec = PartitionSpec(args.clients, args.skew, seed, mode)
        try:
            report = run_federation(train, test, spec, seed, args.max_part_size)
        except KahmError as exc:
            raise CliFailure(f"{type(exc).__name__}: {exc}") from None
        reports.append(report)
        for line in report.lines(prefix=f"seed={seed} "):
            print(line)
        print(f"runtime=seed {seed} {report.runtime_seconds:.2f}s")
    print(f"mean_global_accuracy={np.mean([r.global_accuracy for r in reports]):.6f}")
    print(f"mean_local_accuracy={np.mean([r.averaged_accuracy for r in reports]):.6f}")
    print(f"max_E={max(r.assumption_E for r in reports):.6g}")
    return 0


def cmd_bounds(args) -> int:
    try:
        report = bnd.bound_report(args.n, args.delta, args.epsilon, args.empirical_loss)
    except KahmError as exc:
        raise CliFailure(str(exc)) from None
    for line in report.lines():
        print(line)
    return 0


def cmd_grid(args) -> int:
    gm = kio.load_model(args.model)
    if gm.dim != 2:
        raise CliFailure(f"grid export needs a 2-D model, got p={gm.dim}")
    xs = np.linspace(args.xmin, args.xmax, args.steps)
    ys = np.linspace(args.ymin, args.ymax, args.steps)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    pred = predict_global(gm, pts)
    cols = {"x": pts[:, 0], "y": pts[:, 1], "class": pred.class_ids}
    for c in range(gm.class_count):
        cols[f"gamma_{c + 1}"] = pred.distances[:, c]
    kio.write_table(args.out, cols)
    print(f"rows={pts.shape[0]}")
    return 0


def cmd_validate(args) -> int:
    gm = kio.load_model(args.model)
    data = _load(args.data, args, class_count=gm.class_count)
    if data.dim != gm.dim:
        raise CliFailure(f"dimension mismatch: data has {data.dim} features, model expects {gm.dim}")
    E = assumption_score(gm, data)
    print(f"E={E:.6g}")
    return 0 if E < VALIDATION_THRESHOLD else 3


def _preprocessing_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scale255", action="store_true", help="divide features by 255")
    p.add_argument("--tanh", action="store_true", help="apply tanh to every feature")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kahm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="build a global model from a labelled table")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-part-size", type=int, default=DEFAULT_MAX_PART_SIZE)
    _preprocessing_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="classify rows of a feature table")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scores", action="store_true", help="add per-class distance and score columns")
    p.add_argument("--client", type=int, default=None, help="use this client's local classifier")
    _preprocessing_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("fedsim", help="run the federated label-skew / single-class protocol")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--clients", type=int, default=100)
    p.add_argument("--skew", type=float, default=0.2)
    p.add_argument("--seeds", default="0")
    p.add_argument("--mode", choices=[Mode.LABEL_SKEW.value, Mode.SINGLE_CLASS.value], default="label_skew")
    p.add_argument("--max-part-size", type=int, default=DEFAULT_MAX_PART_SIZE)
    _preprocessing_flags(p)
    p.set_defaults(func=cmd_fedsim)

    p = sub.add_parser("bounds", help="evaluate risk, complexity and sample-size bounds")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--empirical-loss", type=float, default=0.0)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("grid", help="export decision regions of a 2-D model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--xmin", type=float, required=True)
    p.add_argument("--xmax", type=float, required=True)
    p.add_argument("--ymin", type=float, required=True)
    p.add_argument("--ymax", type=float, required=True)
    p.add_argument("--steps", type=int, default=200)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("validate", help="check training rows are reproduced (E < 0.01)")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    _preprocessing_flags(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        code = args.func(args)
    except CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (OSError, KahmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"runtime={time.perf_counter() - start:.3f}s")
    return code


if __name__ == "__main__":
    sys.exit(main())
