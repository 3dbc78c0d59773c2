"""Command-line pipeline: descriptors -> fda -> evaluate, plus grid sweeps.

Stages hand data off through CSV files so each one is independently
testable and cacheable (descriptor extraction dominates runtime and gets
reused across fits and sweeps). Every output is written atomically via a
temp file and rename, and rows follow manifest order regardless of worker
count, so repeated runs with the same config and seed are byte-identical.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from itertools import product
from pathlib import Path

import numpy as np

from .classify import ClassifierConfig, FeatureTable, cross_validate
from .descriptors import DescriptorCurve, fourier_derivative, smoothed_derivative, vbfd_descriptors
from .errors import DataError, FractexError, NumericError, ParseError, UnderdeterminedError
from .fda import gram_factor, make_basis, make_basis_for_samples, fit_alpha, transform_beta
from .imageio import load_image, load_manifest
from .surface_edt import dilation_volumes, embed_surface, exact_edt, radius_set

META_PREFIX = "# fractex "

DESCRIPTOR_KINDS = ("vbfd", "smoothed", "fourier")
COEF_KINDS = ("alpha", "beta")
CLASSIFIERS = ("knn", "bayes", "lda")


@dataclass
class RunConfig:
    """Pipeline settings; flat key=value file serializable, CLI flags override."""

    r_max: float = 10.0
    include_r0: bool = True
    kind: str = "vbfd"
    scale: float = 0.5
    order: int = 4
    count: int = 60
    coef: str = "alpha"
    beta_convention: str = "s"
    knots: str = "quantile"
    classifier: str = "knn"
    k: int = 1
    shrinkage: float = 1e-4
    folds: int = 10
    seed: int = 42
    standardize: bool = False
    threads: int = 0

    def validate(self) -> None:
        if self.r_max < 1:
            raise ValueError(f"r_max must be >= 1, got {self.r_max}")
        if self.kind not in DESCRIPTOR_KINDS:
            raise ValueError(f"descriptor kind must be one of {DESCRIPTOR_KINDS}, got {self.kind!r}")
        if self.scale <= 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")
        if self.order < 1 or self.count < self.order:
            raise ValueError(f"need order >= 1 and count >= order, got order={self.order} count={self.count}")
        if self.coef not in COEF_KINDS:
            raise ValueError(f"coef must be one of {COEF_KINDS}, got {self.coef!r}")
        if self.beta_convention not in ("s", "st"):
            raise ValueError(f"beta convention must be 's' or 'st', got {self.beta_convention!r}")
        if self.knots not in ("quantile", "uniform"):
            raise ValueError(f"knots must be 'quantile' or 'uniform', got {self.knots!r}")
        if self.classifier not in CLASSIFIERS:
            raise ValueError(f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.shrinkage <= 1.0:
            raise ValueError(f"shrinkage must be in [0, 1], got {self.shrinkage}")
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        if self.threads < 0:
            raise ValueError(f"threads must be >= 0, got {self.threads}")

    def to_file(self, path) -> None:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name}={v}\n")
        Path(path).write_text("".join(lines), encoding="utf-8")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        cfg = cls()
        spec = {f.name: f for f in fields(cls)}
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"'{path}' line {lineno}: expected key=value, got {raw!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in spec:
                raise ParseError(f"'{path}' line {lineno}: unknown key {key!r}")
            setattr(cfg, key, _parse_value(spec[key].type, value, path, lineno))
        cfg.validate()
        return cfg


def _parse_value(type_name: str, value: str, path, lineno: int):
    try:
        if type_name == "bool":
            if value.lower() in ("true", "1", "yes", "on"):
                return True
            if value.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(value)
        if type_name == "int":
            return int(value)
        if type_name == "float":
            return float(value)
        return value
    except ValueError:
        raise ParseError(f"'{path}' line {lineno}: bad {type_name} value {value!r}") from None


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return repr(float(x))


def write_feature_csv(path, meta: dict, column_prefix: str,
                      paths: list[str], labels: list[str], rows: np.ndarray) -> None:
    rows = np.asarray(rows)
    buf = io.StringIO()
    meta_parts = [f"{k}={v}" for k, v in meta.items()]
    buf.write(META_PREFIX + " ".join(meta_parts) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["path", "label"] + [f"{column_prefix}_{i + 1}" for i in range(rows.shape[1])])
    for p, lab, row in zip(paths, labels, rows):
        writer.writerow([p, lab] + [_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def read_feature_csv(path) -> tuple[dict, list[str], list[str], np.ndarray]:
    """Read a descriptor or coefficient CSV: metadata, paths, labels, matrix."""
    meta: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if first.startswith(META_PREFIX):
            for part in first[len(META_PREFIX):].strip().split():
                key, _, value = part.partition("=")
                meta[key] = value
        else:
            fh.seek(0)
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"'{path}': empty CSV") from None
        if len(header) < 3 or header[0] != "path" or header[1] != "label":
            raise ParseError(f"'{path}': expected header 'path,label,<features...>'")
        width = len(header) - 2
        paths, labels, data = [], [], []
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"'{path}' row {rowno}: expected {len(header)} fields, got {len(row)}")
            try:
                data.append([float(v) for v in row[2:]])
            except ValueError:
                raise ParseError(f"'{path}' row {rowno}: non-numeric feature value") from None
            paths.append(row[0])
            labels.append(row[1])
    if not paths:
        raise ParseError(f"'{path}': CSV has no data rows")
    return meta, paths, labels, np.asarray(data, dtype=np.float64).reshape(len(paths), width)


def extract_features(image_path, r_max: float, include_r0: bool,
                     kind: str, scale: float) -> np.ndarray:
    """Full per-image pipeline: embed, distance transform, volumes, descriptors."""
    img = load_image(image_path)
    vol = embed_surface(img, r_max)
    field = exact_edt(vol)
    curve = dilation_volumes(field, radius_set(r_max))
    desc = vbfd_descriptors(curve, include_r0=include_r0)
    if kind == "vbfd":
        return desc.features
    if kind == "smoothed":
        return smoothed_derivative(desc, scale).features
    if kind == "fourier":
        return fourier_derivative(desc, scale).features
    raise ValueError(f"unknown descriptor kind {kind!r}")


def _worker(job) -> np.ndarray:
    path, r_max, include_r0, kind, scale = job
    return extract_features(path, r_max, include_r0, kind, scale)


def _descriptor_grid(config: RunConfig) -> np.ndarray:
    rs = radius_set(config.r_max)
    t = 0.5 * np.log(rs.squared[rs.squared >= 1].astype(np.float64))
    if config.kind == "fourier":
        return np.linspace(t[0], t[-1], t.size)
    return t


def _extract_all(manifest, config: RunConfig) -> np.ndarray:
    jobs = [(str(manifest.resolved_path(i)), config.r_max, config.include_r0,
             config.kind, config.scale) for i in range(len(manifest))]
    threads = config.threads or os.cpu_count() or 1
    results: list[np.ndarray] = []
    if threads == 1 or len(jobs) == 1:
        for i, job in enumerate(jobs):
            try:
                results.append(_worker(job))
            except (FractexError, OSError, ValueError) as e:
                raise DataError(f"failed on '{manifest.entries[i][0]}': {e}") from e
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_worker, job) for job in jobs]
            for i, fut in enumerate(futures):
                try:
                    results.append(fut.result())
                except (FractexError, OSError, ValueError) as e:
                    raise DataError(f"failed on '{manifest.entries[i][0]}': {e}") from e
    return np.vstack(results)


def cmd_descriptors(args) -> int:
    config = _merge_config(args)
    manifest = load_manifest(args.manifest)
    rows = _extract_all(manifest, config)
    grid = _descriptor_grid(config)
    meta = {
        "table": "descriptors",
        "kind": config.kind,
        "rmax": _fmt(config.r_max),
        "include_r0": int(config.include_r0 and config.kind == "vbfd"),
        "scale": _fmt(config.scale),
        "grid": ";".join(_fmt(v) for v in grid),
    }
    write_feature_csv(args.out, meta, "d",
                      [e[0] for e in manifest.entries],
                      [e[1] for e in manifest.entries], rows)
    return 0


def _build_fit_basis(config: RunConfig, grid: np.ndarray):
    if config.knots == "uniform":
        return make_basis(config.order, config.count, (float(grid.min()), float(grid.max())))
    return make_basis_for_samples(config.order, config.count, grid)


def _fit_table(config: RunConfig, grid: np.ndarray, values: np.ndarray) -> tuple:
    """Fit every row of `values` on one shared basis; returns (basis, coefficient rows)."""
    m = grid.size
    if config.count > m:
        raise UnderdeterminedError(
            f"count {config.count} exceeds the {m} descriptor samples per image")
    basis = _build_fit_basis(config, grid)
    coef_rows = np.empty((values.shape[0], config.count))
    for i, row in enumerate(values):
        coef_rows[i] = fit_alpha(basis, DescriptorCurve(t=grid, u=row)).alpha
    if config.coef == "beta":
        gf = gram_factor(basis)
        s = gf.s.T if config.beta_convention == "s" else gf.s
        coef_rows = coef_rows @ s
    return basis, coef_rows


def _grid_from_meta(meta: dict, path, n_cols: int) -> tuple[np.ndarray, np.ndarray | None]:
    """Split a descriptor CSV into the fit grid and the optional leading v0 column."""
    if "grid" not in meta:
        raise ParseError(f"'{path}': missing descriptor grid metadata "
                         "(was this file produced by 'fractex descriptors'?)")
    grid = np.array([float(v) for v in meta["grid"].split(";")])
    has_r0 = meta.get("include_r0", "0") == "1"
    expected = grid.size + (1 if has_r0 else 0)
    if expected != n_cols:
        raise ParseError(f"'{path}': grid metadata lists {grid.size} positions but the "
                         f"table has {n_cols} feature columns")
    return grid, (0 if has_r0 else None)


def cmd_fda(args) -> int:
    config = _merge_config(args)
    meta, paths, labels, values = read_feature_csv(args.input)
    grid, v0_col = _grid_from_meta(meta, args.input, values.shape[1])
    if v0_col is not None:
        values = values[:, 1:]
    basis, coef_rows = _fit_table(config, grid, values)
    out_meta = {
        "table": "coefficients",
        "kind": config.coef,
        "order": config.order,
        "count": config.count,
        "domain": f"{_fmt(basis.domain[0])};{_fmt(basis.domain[1])}",
        "knots": config.knots,
        "convention": config.beta_convention if config.coef == "beta" else "",
        "source": meta.get("kind", "unknown"),
    }
    write_feature_csv(args.out, out_meta, "c", paths, labels, coef_rows)
    return 0


def _feature_kind(meta: dict) -> str:
    kind = meta.get("kind", "original")
    return "original" if kind == "vbfd" else kind


def cmd_evaluate(args) -> int:
    config = _merge_config(args)
    meta, paths, labels, values = read_feature_csv(args.input)
    table = FeatureTable.from_labeled(values, labels, feature_kind=_feature_kind(meta))
    clf = ClassifierConfig(name=config.classifier, k=config.k,
                           shrinkage=config.shrinkage, standardize=config.standardize)
    report = cross_validate(table, clf, folds=config.folds, seed=config.seed)
    _atomic_write(args.out, report.to_json() + "\n")
    if args.confusion:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["truth\\pred"] + list(table.class_names))
        for name, row in zip(table.class_names, report.confusion):
            writer.writerow([name] + [int(v) for v in row])
        _atomic_write(args.confusion, buf.getvalue())
    print(report.summary_line())
    return 0


def _parse_grid_file(path) -> dict[str, list[str]]:
    grid: dict[str, list[str]] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"'{path}' line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in ("q", "order", "coef", "classifier"):
            raise ParseError(f"'{path}' line {lineno}: unknown grid key {key!r}")
        grid[key] = [v.strip() for v in value.split(",") if v.strip()]
    return grid


def _sweep_cells(grid: dict[str, list[str]], config: RunConfig):
    coefs = grid.get("coef", [config.coef])
    orders = [int(v) for v in grid.get("order", [str(config.order)])]
    classifiers = grid.get("classifier", [config.classifier])
    for kind in coefs:
        # mirrors the useful ranges: large counts for alpha, small for beta
        default_q = range(60, 101, 10) if kind == "alpha" else range(10, 51, 10)
        qs = [int(v) for v in grid.get("q", [str(v) for v in default_q])]
        for q, order, clf in product(qs, orders, classifiers):
            yield q, order, kind, clf


def cmd_sweep(args) -> int:
    config = _merge_config(args)
    manifest = load_manifest(args.manifest)
    grid_spec = _parse_grid_file(args.grid)
    values = _extract_all(manifest, config)
    t_grid = _descriptor_grid(config)
    if config.include_r0 and config.kind == "vbfd":
        values = values[:, 1:]
    labels = [e[1] for e in manifest.entries]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["q", "order", "kind", "classifier", "mean", "std", "error"])
    for q, order, kind, clf_name in _sweep_cells(grid_spec, config):
        cell = replace(config, count=q, order=order, coef=kind, classifier=clf_name)
        try:
            cell.validate()
            _, coef_rows = _fit_table(cell, t_grid, values)
            table = FeatureTable.from_labeled(coef_rows, labels, feature_kind=kind)
            clf = ClassifierConfig(name=clf_name, k=cell.k, shrinkage=cell.shrinkage,
                                   standardize=cell.standardize)
            report = cross_validate(table, clf, folds=cell.folds, seed=cell.seed)
            writer.writerow([q, order, kind, clf_name,
                             f"{report.mean_accuracy:.4f}", f"{report.deviation:.4f}", ""])
        except (FractexError, ValueError) as e:
            writer.writerow([q, order, kind, clf_name, "", "", str(e)])
    _atomic_write(args.out, buf.getvalue())
    return 0


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _merge_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {
        "rmax": "r_max", "kind": "kind", "scale": "scale", "order": "order",
        "count": "count", "coef": "coef", "beta_convention": "beta_convention",
        "knots": "knots", "classifier": "classifier", "k": "k",
        "shrinkage": "shrinkage", "folds": "folds", "seed": "seed",
        "threads": "threads",
    }
    for arg_name, field_name in overrides.items():
        v = getattr(args, arg_name, None)
        if v is not None:
            setattr(config, field_name, v)
    if getattr(args, "no_r0", False):
        config.include_r0 = False
    if getattr(args, "standardize", False):
        config.standardize = True
    config.validate()
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fractex",
                     description="Volumetric fractal texture descriptors, functional "
                                 "coefficients, and classifier evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--out", required=True, help="output file (written atomically)")

    p_desc = sub.add_parser("descriptors", help="extract descriptor CSV from a manifest")
    p_desc.add_argument("--manifest", required=True)
    p_desc.add_argument("--rmax", type=float, default=None, help="maximum dilation radius (default 10)")
    p_desc.add_argument("--no-r0", action="store_true", dest="no_r0",
                        help="exclude the log V(0) feature")
    p_desc.add_argument("--kind", choices=DESCRIPTOR_KINDS, default=None)
    p_desc.add_argument("--scale", type=float, default=None,
                        help="smoothing scale for smoothed/fourier kinds")
    p_desc.add_argument("--threads", type=int, default=None, help="worker count (0 = all cores)")
    add_common(p_desc)
    p_desc.set_defaults(func=cmd_descriptors)

    p_fda = sub.add_parser("fda", help="fit functional coefficients to a descriptor CSV")
    p_fda.add_argument("--input", required=True)
    p_fda.add_argument("--order", type=int, default=None, help="B-spline order (default 4)")
    p_fda.add_argument("--count", "--q", type=int, default=None, dest="count",
                       help="number of basis functions")
    p_fda.add_argument("--coef", choices=COEF_KINDS, default=None)
    p_fda.add_argument("--beta-convention", choices=("s", "st"), default=None,
                       dest="beta_convention")
    p_fda.add_argument("--knots", choices=("quantile", "uniform"), default=None)
    add_common(p_fda)
    p_fda.set_defaults(func=cmd_fda)

    p_eval = sub.add_parser("evaluate", help="cross-validate a classifier on a feature CSV")
    p_eval.add_argument("--input", required=True)
    p_eval.add_argument("--classifier", choices=CLASSIFIERS, default=None)
    p_eval.add_argument("--k", type=int, default=None)
    p_eval.add_argument("--shrinkage", type=float, default=None)
    p_eval.add_argument("--standardize", action="store_true")
    p_eval.add_argument("--folds", type=int, default=None)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--confusion", help="also write the confusion matrix CSV here")
    add_common(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="evaluate a grid of fda/classifier settings")
    p_sweep.add_argument("--manifest", required=True)
    p_sweep.add_argument("--grid", required=True, help="grid file: q/order/coef/classifier lists")
    p_sweep.add_argument("--rmax", type=float, default=None)
    p_sweep.add_argument("--kind", choices=DESCRIPTOR_KINDS, default=None)
    p_sweep.add_argument("--scale", type=float, default=None)
    p_sweep.add_argument("--knots", choices=("quantile", "uniform"), default=None)
    p_sweep.add_argument("--threads", type=int, default=None)
    add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except NumericError as e:
        print(f"fractex: numeric error: {e}", file=sys.stderr)
        return 3
    except DataError as e:
        print(f"fractex: data error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"fractex: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"fractex: invalid option: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
