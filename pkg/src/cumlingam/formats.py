"""CSV ingestion, canonical JSON and DOT export."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from .cumulants import Dataset
from .errors import InputShapeError
from .graph import CausalGraph
from .mixing import LatentConfounder, MixingMatrix, ObservedNoise


class FormatError(InputShapeError):
    """A file does not parse; the message names the file and line."""


# ---------------------------------------------------------------------------
# CSV


def read_csv(path) -> Dataset:
    """Comma separated, header row required, '.' decimal point."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read: {exc.strerror}") from exc
    rows = csv.reader(io.StringIO(text))
    try:
        header = next(rows)
    except StopIteration:
        raise FormatError(f"{path}: empty file") from None
    header = [h.strip() for h in header]
    if not header or any(h == "" for h in header):
        raise FormatError(f"{path}: line 1: header has an empty column name")
    try:
        float(header[0])
        raise FormatError(f"{path}: line 1: header row required, found numbers")
    except ValueError:
        pass
    values = []
    for lineno, row in enumerate(rows, start=2):
        if not row or all(c.strip() == "" for c in row):
            continue
        if len(row) != len(header):
            raise FormatError(f"{path}: line {lineno}: expected {len(header)} fields, "
                              f"got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise FormatError(f"{path}: line {lineno}: non-finite value")
        values.append(vals)
    if not values:
        raise FormatError(f"{path}: no data rows")
    try:
        return Dataset(np.array(values), tuple(header))
    except InputShapeError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_csv(path, data: Dataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.labels)
        for row in data.values:
            w.writerow([format(float(v), ".17g") for v in row])


# ---------------------------------------------------------------------------
# canonical JSON


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            # JSON has no infinities; failed cells and the like become null
            return "null"
        s = format(x, ".17g")
        # keep floats recognisable as floats after a round trip
        if all(ch in "-0123456789" for ch in s):
            s += ".0"
        return s
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def loads(text: str, source: str = "<string>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{source}: line {exc.lineno}: {exc.msg}") from None


def read_json(path):
    path = Path(path)
    try:
        return loads(path.read_text(), str(path))
    except OSError as exc:
        raise FormatError(f"{path}: cannot read: {exc.strerror}") from exc


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def graph_dumps(graph: CausalGraph) -> str:
    return dumps(graph.to_dict())


def graph_loads(text: str, source: str = "<string>") -> CausalGraph:
    g = CausalGraph.from_dict(loads(text, source))
    # integers written by other tools are still coefficients
    for k, v in g.directed.items():
        g.directed[k] = None if v is None else float(v)
    for k, v in g.latent.items():
        g.latent[k] = None if v is None else float(v)
    return g


def mixing_to_dict(m: MixingMatrix) -> dict:
    return {
        "rows": list(m.rows),
        "columns": [c.key() for c in m.columns],
        "entries": [[float(v) for v in row] for row in m.entries],
        "estimated": [[bool(v) for v in row] for row in m.estimated_mask],
    }


def mixing_from_dict(d: dict) -> MixingMatrix:
    cols = []
    try:
        for key in d["columns"]:
            kind, _, name = key.partition(":")
            if kind == "latent":
                cols.append(LatentConfounder(name))
            elif kind == "noise":
                cols.append(ObservedNoise(name))
            else:
                raise InputShapeError(f"unknown column kind {key!r}")
        return MixingMatrix(d["rows"], cols, d["entries"], d.get("estimated"))
    except (KeyError, TypeError) as exc:
        raise InputShapeError(f"malformed mixing document: {exc}") from exc


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# DOT


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _coef_label(c) -> str:
    return "" if c is None else f' [label="{c:.3g}"]'


def graph_to_dot(graph: CausalGraph) -> str:
    """Solid arrows for directed edges, dashed lines for undirected ones,
    double circles for latent nodes."""
    lines = ["digraph G {", "  node [shape=circle];"]
    for v in graph.observed:
        lines.append(f"  {_q(v)};")
    for l in graph.latents:
        lines.append(f"  {_q(l)} [shape=doublecircle];")
    for (l, c), coef in sorted(graph.latent.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        lines.append(f"  {_q(l)} -> {_q(c)}{_coef_label(coef)};")
    for (a, b) in sorted(graph.directed):
        lines.append(f"  {_q(a)} -> {_q(b)}{_coef_label(graph.directed[(a, b)])};")
    for a, b in sorted(graph.undirected):
        lines.append(f"  {_q(a)} -> {_q(b)} [dir=none, style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"
