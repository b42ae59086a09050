"""In-memory datasets read from CSV, keeping the raw cell text.

Ties between observations are decided on the raw text, so every column keeps
the exact strings that were read alongside the parsed values.
"""

from __future__ import annotations

import ast
import csv
import hashlib
import io
import json
import logging
import math
import operator
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Dataset:
    names: tuple[str, ...]
    raw: dict[str, tuple[str, ...]]
    kinds: dict[str, str]
    source: str = "<memory>"
    dropped_rows: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate column names")
        lengths = {len(self.raw[c]) for c in self.names}
        if len(lengths) > 1:
            raise ValueError("columns have different lengths")

    @property
    def n_rows(self) -> int:
        return len(self.raw[self.names[0]]) if self.names else 0

    def __len__(self) -> int:
        return self.n_rows

    def __contains__(self, name: str) -> bool:
        return name in self.raw

    def column(self, name: str) -> np.ndarray:
        """Parsed values: float array for numeric columns, str array otherwise."""
        if name not in self.raw:
            raise KeyError(f"unknown column {name!r}")
        if name not in self._cache:
            if self.kinds[name] == NUMERIC:
                arr = np.array([float(v) for v in self.raw[name]], dtype=float)
            else:
                arr = np.array(self.raw[name], dtype=object)
            self._cache[name] = arr
        return self._cache[name]

    def levels(self, name: str) -> list[str]:
        """Distinct raw values in first-appearance order."""
        return list(dict.fromkeys(self.raw[name]))

    def records(self, columns) -> list[tuple[str, ...]]:
        cols = [self.raw[c] for c in columns]
        return list(zip(*cols))

    @classmethod
    def from_columns(cls, columns: dict, kinds: dict | None = None, source: str = "<memory>"):
        """Build from python sequences; numbers are stored with ``repr`` text."""
        raw = {}
        inferred = {}
        for name, values in columns.items():
            values = list(values)
            if kinds and name in kinds:
                kind = kinds[name]
            else:
                kind = NUMERIC if all(_is_number(v) for v in values) else CATEGORICAL
            inferred[name] = kind
            raw[name] = tuple(_to_text(v) for v in values)
        return cls(names=tuple(columns), raw=raw, kinds=inferred, source=source)

    def with_column(self, name: str, values, kind: str = NUMERIC) -> Dataset:
        if name in self.raw:
            raise ValueError(f"column {name!r} already exists")
        texts = tuple(_to_text(v) for v in values)
        if len(texts) != self.n_rows:
            raise ValueError("new column has the wrong length")
        raw = dict(self.raw)
        raw[name] = texts
        kinds = dict(self.kinds)
        kinds[name] = kind
        return Dataset(names=self.names + (name,), raw=raw, kinds=kinds,
                       source=self.source, dropped_rows=self.dropped_rows)

    def derive(self, name: str, expression: str) -> Dataset:
        """Add a numeric column computed from an arithmetic expression.

        Supports + - * / ** on column names and numbers, and the functions
        log, exp, sqrt, log10, abs.
        """
        values = evaluate(expression, self)
        return self.with_column(name, np.broadcast_to(values, (self.n_rows,)))

    def subset(self, rows) -> Dataset:
        rows = list(rows)
        raw = {c: tuple(self.raw[c][i] for i in rows) for c in self.names}
        return Dataset(names=self.names, raw=raw, kinds=dict(self.kinds),
                       source=self.source, dropped_rows=self.dropped_rows)


def _is_number(v) -> bool:
    if isinstance(v, (bool, np.bool_)):
        return False
    if isinstance(v, (int, float, np.integer, np.floating)):
        return True
    return _parses(str(v))


def _parses(text: str) -> bool:
    try:
        x = float(text)
    except ValueError:
        return False
    return math.isfinite(x)


def _to_text(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def read_csv(path, kinds: dict | None = None) -> Dataset:
    """Read a comma-separated UTF-8 file with a header row.

    A column is numeric when every non-empty cell parses as a finite number;
    ``kinds`` overrides the inference per column.  Rows with an empty cell in
    a numeric column are dropped and counted.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        return _parse(fh.read(), source=str(path), kinds=kinds)


def read_csv_text(text: str, kinds: dict | None = None, source: str = "<text>") -> Dataset:
    return _parse(text, source=source, kinds=kinds)


def _parse(text: str, source: str, kinds: dict | None) -> Dataset:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows:
        raise ValueError(f"{source}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise ValueError(f"{source}: duplicate header names")
    body = rows[1:]
    for k, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ValueError(f"{source}: ragged row at line {k}")
    inferred = {}
    for j, name in enumerate(header):
        if kinds and name in kinds:
            inferred[name] = kinds[name]
            continue
        cells = [r[j] for r in body if r[j].strip() != ""]
        inferred[name] = NUMERIC if cells and all(_parses(c) for c in cells) else CATEGORICAL
    if not body:
        inferred = {name: (kinds or {}).get(name, NUMERIC) for name in header}
    numeric_idx = [j for j, h in enumerate(header) if inferred[h] == NUMERIC]
    kept = [r for r in body if all(r[j].strip() != "" for j in numeric_idx)]
    dropped = len(body) - len(kept)
    if dropped:
        log.warning("%s: dropped %d row(s) with missing numeric cells", source, dropped)
    for j in numeric_idx:
        for r in kept:
            if not _parses(r[j]):
                raise ValueError(f"{source}: non-numeric cell {r[j]!r} in column {header[j]!r}")
    raw = {h: tuple(r[j] for r in kept) for j, h in enumerate(header)}
    return Dataset(names=tuple(header), raw=raw, kinds=inferred, source=source,
                   dropped_rows=dropped)


def write_csv(dataset: Dataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dataset.names)
        w.writerows(dataset.records(dataset.names))


BUNDLED = ("income", "vaso", "absence")


def bundled_manifest() -> dict:
    text = resources.files("bbglm").joinpath("data").joinpath("MANIFEST.json").read_text(encoding="utf-8")
    return json.loads(text)


def load_bundled(name: str) -> Dataset:
    """Load one of the bundled example datasets, verifying its checksum."""
    manifest = bundled_manifest()
    if name not in manifest:
        raise ValueError(f"unknown bundled dataset {name!r}; choose from {sorted(manifest)}")
    entry = manifest[name]
    blob = resources.files("bbglm").joinpath("data").joinpath(entry["file"]).read_bytes()
    digest = hashlib.sha256(blob).hexdigest()
    if digest != entry["sha256"]:
        raise ValueError(f"checksum mismatch for bundled dataset {name!r}")
    return _parse(blob.decode("utf-8"), source=f"bundled:{name}", kinds=None)


def load(spec: str, kinds: dict | None = None) -> Dataset:
    """``bundled:NAME`` or ``@NAME`` loads a bundled dataset, anything else is a path."""
    for prefix in ("bundled:", "@"):
        if spec.startswith(prefix):
            return load_bundled(spec[len(prefix):])
    return read_csv(spec, kinds=kinds)


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_FUNCS = {"log": np.log, "exp": np.exp, "sqrt": np.sqrt, "log10": np.log10, "abs": np.abs}


def evaluate(expression: str, dataset: Dataset) -> np.ndarray:
    """Evaluate a small arithmetic expression over numeric columns."""
    tree = ast.parse(expression, mode="eval")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in dataset or dataset.kinds[node.id] != NUMERIC:
                raise ValueError(f"unknown numeric column {node.id!r} in {expression!r}")
            return dataset.column(node.id)
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported expression {expression!r}")

    with np.errstate(all="raise"):
        try:
            out = np.asarray(ev(tree), dtype=float)
        except FloatingPointError as exc:
            raise ValueError(f"{expression!r}: {exc}") from None
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{expression!r} produced non-finite values")
    return out
