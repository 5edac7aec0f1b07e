"""File formats: data CSV, model JSON, path/metric/benchmark CSV and run manifests.

Every JSON document carries ``format_version``. Floats are written with
``repr`` so that reading a file back gives bit-identical values and repeated
runs give byte-identical files.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from pathlib import Path

import numpy as np

from .core import Dataset, DomainError, Standardizer, StepCumulativeHazard
from .risknet import ResidualRiskNet
from .trainer import FittedModel, hierarchy_feasible

FORMAT_VERSION = 1
REQUIRED_COLUMNS = ("u", "v", "delta1", "delta2")
ID_COLUMN = "id"
MISSING_TOKENS = {"", "na", "nan", "null", "none", "."}
# covariate codes of the NHANES accelerometry extract
NHANES_COLUMNS = (
    "Gender", "Cancer", "Stroke", "Diabetes", "BMI", "CHF", "CHD", "MobilityProblem",
    "RIDAGEYR", "LBXTC", "LBDHDD", "SYS", "TAC", "TLAC", "WT", "ST", "MVPA", "ABout",
    "SBout", "SATP", "ASTP", *(f"TLAC_{k}" for k in range(1, 13)),
)
_GENERIC = re.compile(r"z[1-9][0-9]*\Z")


class SchemaError(DomainError):
    """A data file does not follow the expected layout."""

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.row = row
        self.column = column


def fmt(x) -> str:
    """Shortest round-trip text for a number."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _parse_float(text, row, column):
    if text.strip().lower() in MISSING_TOKENS:
        raise SchemaError("missing value (imputation is not supported)", row, column)
    try:
        val = float(text)
    except ValueError:
        raise SchemaError(f"not a number: {text!r}", row, column) from None
    if not math.isfinite(val):
        raise SchemaError(f"value must be finite, got {text!r}", row, column)
    return val


def _read_table(path):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        except UnicodeDecodeError:
            raise SchemaError(f"{path} is not UTF-8 text") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise SchemaError("duplicate column names in header", row=1)
        rows = []
        try:
            for line_no, rec in enumerate(reader, start=2):
                if not rec:
                    continue
                if len(rec) != len(header):
                    raise SchemaError(f"expected {len(header)} fields, found {len(rec)}", line_no)
                rows.append((line_no, rec))
        except UnicodeDecodeError:
            raise SchemaError(f"{path} is not UTF-8 text") from None
    return header, rows


def covariate_columns(header, allow_columns=()) -> list:
    """Covariate names of a data header, in file order; rejects unknown columns."""
    allowed = set(NHANES_COLUMNS) | set(allow_columns)
    out = []
    for name in header:
        if name in REQUIRED_COLUMNS or name == ID_COLUMN:
            continue
        if not (_GENERIC.match(name) or name in allowed):
            raise SchemaError("unknown column (allow it explicitly to use it as a covariate)",
                              row=1, column=name)
        out.append(name)
    return out


def read_dataset(path, allow_columns=()) -> Dataset:
    """Parse a data CSV with columns ``u, v, delta1, delta2`` plus covariates.

    Errors name the file row (the header is row 1) and column at fault.
    """
    header, rows = _read_table(path)
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise SchemaError("required column is missing", row=1, column=col)
    features = covariate_columns(header, allow_columns)
    if not features:
        raise SchemaError("no covariate columns", row=1)
    if not rows:
        raise SchemaError("no data rows")
    pos = {name: i for i, name in enumerate(header)}
    n, d = len(rows), len(features)
    u, v = np.empty(n), np.empty(n)
    d1, d2 = np.empty(n, dtype=np.int64), np.empty(n, dtype=np.int64)
    Z = np.empty((n, d))
    for i, (line_no, rec) in enumerate(rows):
        vals = {c: _parse_float(rec[pos[c]], line_no, c) for c in REQUIRED_COLUMNS}
        for c in ("delta1", "delta2"):
            if vals[c] not in (0.0, 1.0):
                raise SchemaError(f"indicator must be 0 or 1, got {rec[pos[c]]!r}", line_no, c)
        if vals["u"] < 0:
            raise SchemaError("interval endpoint must be nonnegative", line_no, "u")
        if vals["u"] > vals["v"]:
            raise SchemaError("need u <= v", line_no, "v")
        if vals["delta1"] + vals["delta2"] > 1:
            raise SchemaError("delta1 and delta2 cannot both be 1", line_no, "delta2")
        if vals["delta2"] == 1 and vals["u"] == vals["v"]:
            raise SchemaError("interval-censored row needs u < v", line_no, "v")
        u[i], v[i] = vals["u"], vals["v"]
        d1[i], d2[i] = int(vals["delta1"]), int(vals["delta2"])
        for j, c in enumerate(features):
            Z[i, j] = _parse_float(rec[pos[c]], line_no, c)
    return Dataset(u, v, d1, d2, Z, features)


def read_covariates(path, feature_names):
    """Rows of covariates for prediction, matched to ``feature_names`` by name.

    Returns ``(ids, Z)``; ids come from an ``id`` column when present and are
    1-based row numbers otherwise. Other columns are ignored.
    """
    header, rows = _read_table(path)
    missing = [c for c in feature_names if c not in header]
    if missing:
        raise SchemaError(f"model covariates missing from file: {', '.join(missing)}", row=1)
    if not rows:
        raise SchemaError("no data rows")
    pos = {name: i for i, name in enumerate(header)}
    Z = np.array([[_parse_float(rec[pos[c]], line_no, c) for c in feature_names]
                  for line_no, rec in rows], dtype=float).reshape(len(rows), len(feature_names))
    if ID_COLUMN in pos:
        ids = [rec[pos[ID_COLUMN]] for _, rec in rows]
    else:
        ids = [str(k) for k in range(1, len(rows) + 1)]
    return ids, Z


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([cell if isinstance(cell, str) else fmt(cell) for cell in row])


def write_dataset(path, data: Dataset):
    header = [*REQUIRED_COLUMNS, *data.feature_names]
    rows = ([data.u[i], data.v[i], int(data.delta1[i]), int(data.delta2[i]), *data.Z[i]]
            for i in range(data.n))
    write_csv(path, header, rows)


def write_json(path, doc: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")


def read_json(path, kind: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot open {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    if not isinstance(doc, dict) or doc.get("kind") != kind:
        raise SchemaError(f"{path} is not a {kind} document")
    if doc.get("format_version") != FORMAT_VERSION:
        raise SchemaError(f"{path}: unsupported format_version {doc.get('format_version')!r}")
    return doc


def model_to_dict(model: FittedModel, fit_config: dict | None = None) -> dict:
    return {
        "kind": "model",
        "format_version": FORMAT_VERSION,
        "feature_names": list(model.feature_names),
        "standardization": model.standardization.to_dict(),
        "network": model.net.to_dict(),
        "risk_offset": model.risk_offset,
        "baseline": model.baseline.to_dict(),
        "penalty_lambda": model.penalty_lambda,
        "hierarchy_M": model.hierarchy_M,
        "final_loglik": model.final_loglik,
        "boundary": model.boundary,
        "selected_features": [model.feature_names[j] for j in model.selected_features],
        "fit_config": fit_config,
    }


def model_from_dict(doc: dict) -> FittedModel:
    try:
        net = ResidualRiskNet.from_dict(doc["network"])
        model = FittedModel(
            net=net,
            baseline=StepCumulativeHazard.from_dict(doc["baseline"]),
            standardization=Standardizer.from_dict(doc["standardization"]),
            risk_offset=float(doc["risk_offset"]),
            final_loglik=float(doc["final_loglik"]),
            penalty_lambda=float(doc["penalty_lambda"]),
            hierarchy_M=float(doc["hierarchy_M"]),
            feature_names=list(doc["feature_names"]),
            boundary=bool(doc.get("boundary", False)),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"model document is incomplete: {exc}") from None
    if len(model.feature_names) != net.d or model.standardization.mean.size != net.d:
        raise SchemaError("model document has inconsistent dimensions")
    if not hierarchy_feasible(net, model.hierarchy_M):
        raise SchemaError("model violates the hierarchy constraint")
    return model


def save_model(path, model: FittedModel, fit_config: dict | None = None):
    write_json(path, model_to_dict(model, fit_config))


def load_model(path) -> FittedModel:
    return model_from_dict(read_json(path, "model"))


PATH_COLUMNS = ("lambda", "n_active", "train_loglik", "val_ibs")
METRIC_COLUMNS = ("run_id", "lambda", "metric", "value")


def write_path_csv(path, result):
    write_csv(path, PATH_COLUMNS, ([r[c] for c in PATH_COLUMNS] for r in result.rows()))


def write_metrics_csv(path, run_id: str, lam: float, metrics: dict):
    write_csv(path, METRIC_COLUMNS, ([run_id, lam, name, value] for name, value in metrics.items()))


def read_rows(path) -> list:
    """Plain dict rows of any CSV written by this package."""
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
