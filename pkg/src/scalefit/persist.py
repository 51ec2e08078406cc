"""CSV datasets and the ``SCALEFIT-MODEL v1`` text format.

Model files are line oriented. Floats are written with ``repr`` (shortest
round-trip decimal), so coefficients reload bit for bit. The last line
carries a SHA-256 digest of everything above it; a truncated or edited
file fails that check. Layout::

    SCALEFIT-MODEL v1
    kind mad
    epsilon 0.1
    provenance seed=7
    parts 2
    begin quantile median
    kernel gaussian_rbf gamma=1.0 degree=2 coef0=0.0
    loss pinball tau=0.5 epsilon=none
    lambda 0.05
    objective 0.1234
    report method=dual_coordinate_ascent iterations=12 residual=3e-09 converged=1
    shape 221 1
    row <coefficient> <x_1> ... <x_d>
    ...
    end quantile
    ...
    sha256 <hex digest>
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .dataset import Dataset
from .errors import CSVParseError, InputError, ModelFormatError, ModelIntegrityError, ModelVersionError
from .estimators import CombinationModel, MadModel
from .kernels import KernelSpec
from .losses import LossSpec
from .solver import QuantileModel, SolverReport

MAGIC = "SCALEFIT-MODEL"
FORMAT_VERSION = 1

AnyModel = Union[QuantileModel, CombinationModel, MadModel]


@dataclass(frozen=True)
class DatasetFile:
    path: Union[str, Path]
    delimiter: str = ","
    header: bool = True
    x_columns: Sequence[int] | None = None
    y_column: int = -1


def _parse_float(text: str, line: int, column: int) -> float:
    text = text.strip()
    if not text:
        raise CSVParseError(f"empty field in column {column}", line)
    try:
        value = float(text)
    except ValueError:
        raise CSVParseError(f"non-numeric field {text!r} in column {column}", line) from None
    if math.isnan(value):
        raise CSVParseError(f"NaN in column {column}", line)
    return value


def read_csv(source: DatasetFile) -> Dataset:
    path = Path(source.path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter=source.delimiter))
    start = 1 if source.header else 0
    body = [(i + 1, r) for i, r in enumerate(rows) if i >= start and any(c.strip() for c in r)]
    if not body:
        raise CSVParseError(f"{path}: no data rows")
    width = len(body[0][1])
    y_col = source.y_column % width if -width <= source.y_column < width else None
    if y_col is None:
        raise InputError(f"y column {source.y_column} does not exist (file has {width} columns)")
    x_cols = list(source.x_columns) if source.x_columns is not None else [c for c in range(width) if c != y_col]
    if not x_cols:
        raise InputError("no input columns selected")
    for c in x_cols:
        if not 0 <= c < width:
            raise InputError(f"x column {c} does not exist (file has {width} columns)")
    if y_col in x_cols:
        raise InputError(f"y column {y_col} is also listed as an input column")
    X = np.empty((len(body), len(x_cols)))
    y = np.empty(len(body))
    for k, (line, row) in enumerate(body):
        if len(row) != width:
            raise CSVParseError(f"expected {width} fields, found {len(row)}", line)
        X[k] = [_parse_float(row[c], line, c) for c in x_cols]
        y[k] = _parse_float(row[y_col], line, y_col)
    return Dataset(X, y)


def load_csv(path, delimiter: str = ",", header: bool = True, x_columns=None, y_column: int = -1) -> Dataset:
    return read_csv(DatasetFile(path, delimiter, header, x_columns, y_column))


def write_csv(dataset: Dataset, path, delimiter: str = ",") -> None:
    names = [f"x{j + 1}" for j in range(dataset.dim)] if dataset.dim > 1 else ["x"]
    write_table(path, names + ["y"], np.column_stack([dataset.X, dataset.y]), delimiter)


def write_table(path_or_file, header: Sequence[str], rows, delimiter: str = ",",
                comments: Sequence[str] = ()) -> None:
    """Write a numeric table; ``path_or_file`` may be a path or an open text stream."""
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    if hasattr(path_or_file, "write"):
        path_or_file.write(buf.getvalue())
    else:
        Path(path_or_file).write_text(buf.getvalue(), encoding="utf-8")


# -- model files -------------------------------------------------------------

def _f(v: float | None) -> str:
    return "none" if v is None else repr(float(v))


def _quantile_lines(model: QuantileModel, role: str) -> list[str]:
    k, L, r = model.kernel, model.loss, model.report
    lines = [
        f"begin quantile {role}",
        f"kernel {k.family} gamma={_f(k.gamma)} degree={int(k.degree)} coef0={_f(k.coef0)}",
        f"loss {L.family} tau={_f(L.tau)} epsilon={_f(L.epsilon)}",
        f"lambda {_f(model.lam)}",
        f"objective {_f(model.objective_value)}",
    ]
    if r is not None:
        lines.append(f"report method={r.method} iterations={r.iterations} "
                     f"residual={_f(r.residual)} converged={int(r.converged)}")
    n, d = model.train_inputs.shape
    lines.append(f"shape {n} {d}")
    for b, x in zip(model.coefficients, model.train_inputs):
        lines.append("row " + " ".join(_f(v) for v in (b, *x)))
    lines.append("end quantile")
    return lines


def serialize(model: AnyModel, provenance: dict | None = None) -> str:
    lines = [f"{MAGIC} v{FORMAT_VERSION}"]
    if isinstance(model, QuantileModel):
        lines.append("kind quantile")
        parts = [(model, "model")]
    elif isinstance(model, CombinationModel):
        lines.append("kind combination")
        lines.append("taus " + " ".join(_f(t) for t in model.taus))
        lines.append("weights " + " ".join(_f(c) for c in model.weights))
        parts = [(p, f"part{j}") for j, p in enumerate(model.parts)]
    elif isinstance(model, MadModel):
        lines.append("kind mad")
        lines.append(f"epsilon {_f(model.epsilon)}")
        lines.append(f"clip {int(model.clip_at_zero)}")
        parts = [(model.median_model, "median"), (model.residual_model, "residual")]
    else:
        raise InputError(f"cannot serialize {type(model).__name__}")
    prov = " ".join(f"{k}={str(v).replace(' ', '_')}" for k, v in sorted((provenance or {}).items()))
    lines.append(f"provenance {prov}".rstrip())
    lines.append(f"parts {len(parts)}")
    for p, role in parts:
        lines.extend(_quantile_lines(p, role))
    body = "\n".join(lines) + "\n"
    return body + f"sha256 {hashlib.sha256(body.encode()).hexdigest()}\n"


def save_model(model: AnyModel, path, provenance: dict | None = None) -> None:
    Path(path).write_text(serialize(model, provenance), encoding="utf-8")


class _Reader:
    def __init__(self, lines: list[str]):
        self.lines = lines
        self.pos = 0

    def next(self, keyword: str) -> list[str]:
        if self.pos >= len(self.lines):
            raise ModelIntegrityError(f"unexpected end of file, expected {keyword!r}")
        fields = self.lines[self.pos].split()
        self.pos += 1
        if not fields or fields[0] != keyword:
            raise ModelFormatError(f"line {self.pos}: expected {keyword!r}, found {self.lines[self.pos - 1]!r}")
        return fields[1:]

    def peek(self) -> str:
        return self.lines[self.pos].split()[0] if self.pos < len(self.lines) else ""


def _kv(fields: list[str]) -> dict[str, str]:
    return dict(f.split("=", 1) for f in fields)


def _num(text: str) -> float | None:
    return None if text == "none" else float(text)


def _read_quantile(rd: _Reader) -> tuple[str, QuantileModel]:
    role = rd.next("begin")[1]
    kfields = rd.next("kernel")
    kv = _kv(kfields[1:])
    kernel = KernelSpec(kfields[0], float(kv["gamma"]), int(kv["degree"]), float(kv["coef0"]))
    lfields = rd.next("loss")
    lv = _kv(lfields[1:])
    loss = LossSpec(lfields[0], float(lv["tau"]), _num(lv["epsilon"]))
    lam = float(rd.next("lambda")[0])
    value = float(rd.next("objective")[0])
    report = None
    if rd.peek() == "report":
        rv = _kv(rd.next("report"))
        report = SolverReport(rv["method"], int(rv["iterations"]), float(rv["residual"]), rv["converged"] == "1")
    n, d = (int(v) for v in rd.next("shape"))
    beta = np.empty(n)
    X = np.empty((n, d))
    for i in range(n):
        row = [float(v) for v in rd.next("row")]
        if len(row) != d + 1:
            raise ModelFormatError(f"row {i} has {len(row)} values, expected {d + 1}")
        beta[i] = row[0]
        X[i] = row[1:]
    rd.next("end")
    return role, QuantileModel(kernel, loss, lam, X, beta, value, report)


def deserialize(text: str, part: str | int | None = None) -> AnyModel:
    """Parse a model file; ``part`` selects one stored quantile fit by role or index."""
    lines = text.split("\n")
    if not lines or not lines[0].startswith(MAGIC):
        raise ModelFormatError("not a scalefit model file")
    header = lines[0].split()
    if len(header) != 2 or header[1] != f"v{FORMAT_VERSION}":
        raise ModelVersionError(f"unsupported model format {lines[0]!r}; this build reads v{FORMAT_VERSION}")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[-1].startswith("sha256 "):
        raise ModelIntegrityError("missing checksum line (file truncated?)")
    body = "\n".join(lines[:-1]) + "\n"
    if hashlib.sha256(body.encode()).hexdigest() != lines[-1].split()[1]:
        raise ModelIntegrityError("checksum mismatch (file truncated or modified)")

    rd = _Reader(lines[1:-1])
    kind = rd.next("kind")[0]
    taus = weights = None
    epsilon, clip = None, True
    if kind == "combination":
        taus = tuple(float(v) for v in rd.next("taus"))
        weights = tuple(float(v) for v in rd.next("weights"))
    elif kind == "mad":
        epsilon = float(rd.next("epsilon")[0])
        clip = rd.next("clip")[0] == "1"
    elif kind != "quantile":
        raise ModelFormatError(f"unknown model kind {kind!r}")
    rd.next("provenance")
    count = int(rd.next("parts")[0])
    parts = [_read_quantile(rd) for _ in range(count)]

    if part is not None:
        if isinstance(part, int):
            return parts[part][1]
        for role, m in parts:
            if role == part:
                return m
        raise InputError(f"model file has no part {part!r}; available: {[r for r, _ in parts]}")
    if kind == "quantile":
        return parts[0][1]
    if kind == "combination":
        return CombinationModel(taus, weights, tuple(m for _, m in parts))
    roles = dict(parts)
    return MadModel(roles["median"], roles["residual"], epsilon, clip)


def load_model(path, part: str | int | None = None) -> AnyModel:
    return deserialize(Path(path).read_text(encoding="utf-8"), part)


def read_provenance(path) -> dict[str, str]:
    for line in Path(path).read_text(encoding="utf-8").split("\n"):
        if line.startswith("provenance"):
            return _kv(line.split()[1:])
    return {}
