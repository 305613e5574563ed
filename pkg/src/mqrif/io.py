"""CSV ingestion, design-matrix encoding, run configuration and result writers."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DataError

log = logging.getLogger(__name__)

DIRECTION_PRESETS = ("equal-weights",)


@dataclass
class DatasetSchema:
    """Column roles. Categorical covariates map to their baseline level (``None``
    picks the lexicographically first level); categoricals not listed in
    ``covariate_columns`` are appended after them in mapping order."""

    response_columns: list
    covariate_columns: list = field(default_factory=list)
    categorical_columns: dict = field(default_factory=dict)
    log_transform: list = field(default_factory=list)
    add_intercept: bool = True

    def __post_init__(self):
        self.response_columns = list(self.response_columns)
        self.covariate_columns = list(self.covariate_columns)
        self.categorical_columns = dict(self.categorical_columns)
        self.log_transform = list(self.log_transform)
        if not self.response_columns:
            raise DataError("at least one response column is required")
        overlap = set(self.response_columns) & set(self.covariates)
        if overlap:
            raise DataError(f"columns used as both response and covariate: {sorted(overlap)}")

    @property
    def covariates(self) -> list:
        extra = [c for c in self.categorical_columns if c not in self.covariate_columns]
        return self.covariate_columns + extra

    @property
    def used_columns(self) -> list:
        return self.response_columns + self.covariates


@dataclass
class Dataset:
    Y: np.ndarray
    covariates: pd.DataFrame
    response_names: list
    n_dropped: int = 0
    source: str = ""

    @property
    def n(self) -> int:
        return self.Y.shape[0]


def load_csv(path, schema: DatasetSchema) -> Dataset:
    """Read a header-row CSV into responses and a covariate table.

    Rows with a missing value in any used column are dropped (count kept on
    the result). Log transforms need strictly positive values; the error
    names the offending file line.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {path}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    missing = [c for c in schema.used_columns if c not in frame.columns]
    if missing:
        raise DataError(f"{path.name}: missing column(s) {', '.join(missing)}")
    # file line of each record: header is line 1
    frame = frame[schema.used_columns].assign(_line=np.arange(len(frame)) + 2)
    before = len(frame)
    frame = frame.dropna(subset=schema.used_columns)
    dropped = before - len(frame)
    if dropped:
        log.info("dropped %d row(s) with missing values", dropped)

    numeric = [c for c in schema.used_columns if c not in schema.categorical_columns]
    for col in numeric:
        conv = pd.to_numeric(frame[col], errors="coerce")
        bad = conv.isna()
        if bad.any():
            line = int(frame.loc[bad, "_line"].iloc[0])
            raise DataError(f"column {col!r} is not numeric (line {line}: {frame.loc[bad, col].iloc[0]!r})")
        frame[col] = conv.astype(float)
    for col in schema.log_transform:
        if col not in numeric:
            raise DataError(f"cannot log-transform non-numeric column {col!r}")
        bad = frame[col] <= 0
        if bad.any():
            line = int(frame.loc[bad, "_line"].iloc[0])
            raise DataError(f"log transform of {col!r} needs positive values; line {line} has "
                            f"{frame.loc[bad, col].iloc[0]!r}")
        frame[col] = np.log(frame[col])
    for col in schema.categorical_columns:
        frame[col] = frame[col].astype(str)

    Y = frame[schema.response_columns].to_numpy(dtype=float)
    cov = frame[schema.covariates].reset_index(drop=True)
    return Dataset(Y=np.ascontiguousarray(Y), covariates=cov,
                   response_names=list(schema.response_columns), n_dropped=dropped,
                   source=path.name)


def encode_design(dataset: Dataset, schema: DatasetSchema):
    """Numeric design matrix and its column names.

    Intercept first (when enabled), then covariates in declaration order; a
    categorical with L levels becomes L - 1 indicators in lexicographic level
    order with the baseline left out.
    """
    n = dataset.n
    cols, names = [], []
    if schema.add_intercept:
        cols.append(np.ones(n))
        names.append("(Intercept)")
    for col in schema.covariates:
        values = dataset.covariates[col]
        if col not in schema.categorical_columns:
            cols.append(values.to_numpy(dtype=float))
            names.append(col)
            continue
        levels = sorted(values.unique())
        if len(levels) < 2:
            raise DataError(f"categorical {col!r} has a single level")
        base = schema.categorical_columns[col]
        base = levels[0] if base is None else str(base)
        if base not in levels:
            raise DataError(f"baseline {base!r} not among the levels of {col!r}")
        for lev in levels:
            if lev != base:
                cols.append((values == lev).to_numpy(dtype=float))
                names.append(f"{col}[{lev}]")
    X = np.column_stack(cols) if cols else np.empty((n, 0))
    return X, names


def resolve_direction(direction, p: int) -> np.ndarray:
    """A named preset or explicit numbers; returned normalised."""
    if isinstance(direction, str):
        if direction == "equal-weights":
            return np.full(p, 1.0 / np.sqrt(p))
        try:
            direction = [float(v) for v in direction.split(",")]
        except ValueError as exc:
            raise DataError(f"unknown direction {direction!r}") from exc
    u = np.asarray(direction, dtype=float).ravel()
    if u.size != p:
        raise DataError(f"direction has {u.size} entries for {p} responses")
    nrm = np.linalg.norm(u)
    if not nrm > 0:
        raise DataError("direction must be nonzero")
    return u / nrm


@dataclass
class RunConfig:
    """Every knob a CLI run depends on. ``c`` is a number or ``"cv"``."""

    schema: DatasetSchema | None = None
    taus: list = field(default_factory=lambda: [0.5])
    direction: object = "equal-weights"
    c: object = "cv"
    delta: float = 1.0
    K: int = 5
    n_grid: int = 200
    B: int = 1000
    level: float = 0.95
    seed: int = 0
    cv_per_tau: bool = True
    method: str = "linear"
    spline_columns: list = field(default_factory=list)
    degree: int = 3
    interior_knots: int = 5
    m: int = 360
    threads: int = 1

    def __post_init__(self):
        if isinstance(self.schema, dict):
            self.schema = DatasetSchema(**self.schema)
        self.taus = [float(t) for t in self.taus]
        for t in self.taus:
            if not 0.0 < t < 1.0:
                raise DataError(f"tau must lie in (0, 1), got {t}")
        if self.c != "cv":
            try:
                self.c = float(self.c)
            except (TypeError, ValueError) as exc:
                raise DataError(f"c must be a number or 'cv', got {self.c!r}") from exc
            if self.c < 0:
                raise DataError("c must be >= 0")
        if self.K < 2:
            raise DataError("K must be >= 2")
        if self.n_grid < 1:
            raise DataError("grid size must be >= 1")
        if self.method not in ("linear", "spline"):
            raise DataError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        out = asdict(self)
        if isinstance(out.get("direction"), np.ndarray):
            out["direction"] = out["direction"].tolist()
        return out


def load_config(path) -> dict:
    """Read a JSON key-value config file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"no such config file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError("config file must hold a JSON object")
    return data


def fmt(x) -> str:
    """17 significant digits: parses back to the identical double."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_table(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_matrix(path, M, columns, row_labels=None, label_header="row") -> None:
    """Matrix with a header row; optional first column of row labels."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if row_labels is None:
        write_table(path, list(columns), M.tolist())
    else:
        write_table(path, [label_header] + list(columns),
                    [[lab] + list(r) for lab, r in zip(row_labels, M.tolist())])


def write_manifest(path, payload: dict) -> None:
    """Deterministic JSON (sorted keys, no timestamps)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
