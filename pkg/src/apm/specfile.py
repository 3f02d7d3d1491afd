"""Strict JSON manifold description files.

Chart files::

    {"name": ..., "dim": 4, "backend": "chart",
     "metric": [["1", "0", ...], ...],        # upper triangle is enough
     "structure": [["1", "0", ...], ...],
     "sample_box": [[-1, 1], ...]}            # optional

Lie group files::

    {"name": ..., "dim": 4, "backend": "lie_group",
     "structure_constants": [{"k": 3, "i": 1, "j": 2, "value": 1.0}, ...],
     "metric": [[1, 0, ...], ...], "structure": [[1, 0, ...], ...]}

Indices ``k, i, j`` are 1-based with ``i < j``; the antisymmetric partner is
implied. Both kinds accept an optional ``tolerances`` object. Unknown keys,
duplicate keys and duplicate ``(k, i, j)`` records are rejected, and every
error carries the line and column of the offending value.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import fields

import numpy as np

from .backend import ChartSpec, LieGroupSpec, SpecError, Tolerances
from .expr import ExprSyntaxError, parse_expr, to_source

COMMON_KEYS = {"name", "dim", "backend", "tolerances"}
CHART_KEYS = COMMON_KEYS | {"metric", "structure", "sample_box"}
LIE_KEYS = COMMON_KEYS | {"structure_constants", "metric", "structure"}
CONSTANT_KEYS = {"k", "i", "j", "value"}
TOLERANCE_KEYS = {f.name for f in fields(Tolerances)}


class SpecFileError(SpecError):
    """Parse or schema error with a source location (1-based line and column)."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None, path: str = ""):
        self.line, self.column, self.path = line, column, path
        where = f"line {line}, column {column}: " if line is not None else ""
        at = f" (at {path})" if path else ""
        super().__init__(f"{where}{message}{at}")


# --------------------------------------------------------------------------
# location index: JSON path -> offset of the value
# --------------------------------------------------------------------------

_WS = " \t\r\n"


def _skip(src: str, pos: int) -> int:
    while pos < len(src) and src[pos] in _WS:
        pos += 1
    return pos


def _index_value(src: str, pos: int, path: tuple, out: dict, decoder: json.JSONDecoder) -> int:
    pos = _skip(src, pos)
    out[path] = pos
    ch = src[pos] if pos < len(src) else ""
    if ch == "{":
        pos = _skip(src, pos + 1)
        if src[pos] == "}":
            return pos + 1
        while True:
            pos = _skip(src, pos)
            key, pos = json.decoder.scanstring(src, pos + 1)
            pos = _skip(src, pos) + 1  # ':'
            pos = _index_value(src, pos, path + (key,), out, decoder)
            pos = _skip(src, pos)
            if src[pos] == ",":
                pos += 1
                continue
            return pos + 1
    if ch == "[":
        pos = _skip(src, pos + 1)
        if src[pos] == "]":
            return pos + 1
        n = 0
        while True:
            pos = _index_value(src, pos, path + (n,), out, decoder)
            n += 1
            pos = _skip(src, pos)
            if src[pos] == ",":
                pos += 1
                continue
            return pos + 1
    _, end = decoder.raw_decode(src, pos)
    return end


def _line_col(src: str, offset: int) -> tuple[int, int]:
    line = src.count("\n", 0, offset) + 1
    col = offset - (src.rfind("\n", 0, offset) + 1) + 1
    return line, col


def _path_str(path: tuple) -> str:
    s = ""
    for p in path:
        s += f"[{p}]" if isinstance(p, int) else (f".{p}" if s else p)
    return s


class _Ctx:
    def __init__(self, src: str):
        self.src = src
        self._index: dict | None = None

    def error(self, message: str, path: tuple, extra_offset: int = 0) -> SpecFileError:
        if self._index is None:
            self._index = {}
            try:
                _index_value(self.src, 0, (), self._index, json.JSONDecoder())
            except (ValueError, IndexError):
                pass
        off = None
        p = path
        while p and p not in self._index:
            p = p[:-1]
        off = self._index.get(p)
        if off is None:
            return SpecFileError(message, path=_path_str(path))
        line, col = _line_col(self.src, off + extra_offset)
        return SpecFileError(message, line, col, _path_str(path))


def _no_duplicates(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise ValueError(f"duplicate key {k!r}")
        seen[k] = v
    return seen


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------


def _require_keys(ctx, obj, allowed, required, path):
    if not isinstance(obj, dict):
        raise ctx.error("expected an object", path)
    for k in obj:
        if k not in allowed:
            raise ctx.error(f"unknown key {k!r}; allowed: {', '.join(sorted(allowed))}", path + (k,))
    for k in required:
        if k not in obj:
            raise ctx.error(f"missing required key {k!r}", path)


def _int(ctx, v, path):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ctx.error(f"expected an integer, got {json.dumps(v)}", path)
    return v


def _number(ctx, v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ctx.error(f"expected a finite number, got {json.dumps(v)}", path)
    return float(v)


def _square(ctx, v, d, path):
    if not isinstance(v, list) or len(v) != d:
        raise ctx.error(f"expected a {d}x{d} array", path)
    for i, row in enumerate(v):
        if not isinstance(row, list) or len(row) != d:
            raise ctx.error(f"expected a row of length {d}", path + (i,))
    return v


def _expr(ctx, v, d, path):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = repr(float(v))
    if not isinstance(v, str):
        raise ctx.error(f"expected an expression string, got {json.dumps(v)}", path)
    try:
        return parse_expr(v, d)
    except ExprSyntaxError as exc:
        # +1 for the opening quote; exact when the string has no escapes
        raise ctx.error(f"expression error: {exc}", path, extra_offset=1 + (exc.offset or 0)) from exc


def _tolerances(ctx, obj, path) -> Tolerances:
    if obj is None:
        return Tolerances()
    _require_keys(ctx, obj, TOLERANCE_KEYS, (), path)
    vals = {}
    for k, v in obj.items():
        x = _number(ctx, v, path + (k,))
        if x <= 0:
            raise ctx.error("tolerances must be positive", path + (k,))
        vals[k] = x
    return Tolerances(**vals)


def _parse_chart(ctx, doc, d, name, tol):
    _require_keys(ctx, doc, CHART_KEYS, ("metric", "structure"), ())
    metric_raw = _square(ctx, doc["metric"], d, ("metric",))
    structure_raw = _square(ctx, doc["structure"], d, ("structure",))
    metric = [[None] * d for _ in range(d)]
    for i in range(d):
        for j in range(i, d):
            metric[i][j] = _expr(ctx, metric_raw[i][j], d, ("metric", i, j))
    for i in range(d):
        for j in range(i):
            raw = metric_raw[i][j]
            if raw is None:
                metric[i][j] = metric[j][i]
                continue
            e = _expr(ctx, raw, d, ("metric", i, j))
            if e != metric[j][i]:
                raise ctx.error(
                    f"metric is not symmetric: entry ({i + 1},{j + 1}) is {to_source(e)} "
                    f"but ({j + 1},{i + 1}) is {to_source(metric[j][i])}; use null below the diagonal to mirror",
                    ("metric", i, j),
                )
            metric[i][j] = e
    structure = [[_expr(ctx, structure_raw[i][j], d, ("structure", i, j)) for j in range(d)] for i in range(d)]
    box = None
    if "sample_box" in doc:
        raw = doc["sample_box"]
        if not isinstance(raw, list) or len(raw) != d:
            raise ctx.error(f"sample_box needs {d} intervals", ("sample_box",))
        box = []
        for i, iv in enumerate(raw):
            if not isinstance(iv, list) or len(iv) != 2:
                raise ctx.error("interval must be [lo, hi]", ("sample_box", i))
            lo, hi = (_number(ctx, iv[k], ("sample_box", i, k)) for k in range(2))
            if not lo < hi:
                raise ctx.error("interval needs lo < hi", ("sample_box", i))
            box.append((lo, hi))
        box = tuple(box)
    return ChartSpec(
        dim=d,
        metric=tuple(map(tuple, metric)),
        structure=tuple(map(tuple, structure)),
        sample_box=box,
        name=name,
        tolerances=tol,
    )


def _parse_lie(ctx, doc, d, name, tol):
    _require_keys(ctx, doc, LIE_KEYS, ("structure_constants", "metric", "structure"), ())
    C = np.zeros((d, d, d))
    recs = doc["structure_constants"]
    if not isinstance(recs, list):
        raise ctx.error("expected a list of {k, i, j, value} records", ("structure_constants",))
    seen: dict[tuple[int, int, int], int] = {}
    for n, rec in enumerate(recs):
        path = ("structure_constants", n)
        _require_keys(ctx, rec, CONSTANT_KEYS, tuple(sorted(CONSTANT_KEYS)), path)
        k, i, j = (_int(ctx, rec[key], path + (key,)) for key in ("k", "i", "j"))
        for key, v in (("k", k), ("i", i), ("j", j)):
            if not 1 <= v <= d:
                raise ctx.error(f"index {key}={v} out of range 1..{d}", path + (key,))
        if not i < j:
            raise ctx.error(f"need i < j (antisymmetric partner is implied), got i={i}, j={j}", path)
        if (k, i, j) in seen:
            raise ctx.error(f"duplicate structure constant (k,i,j)=({k},{i},{j}); first given as record {seen[(k, i, j)]}", path)
        seen[(k, i, j)] = n
        v = _number(ctx, rec["value"], path + ("value",))
        C[k - 1, i - 1, j - 1] = v
        C[k - 1, j - 1, i - 1] = -v
    mats = {}
    for key in ("metric", "structure"):
        raw = _square(ctx, doc[key], d, (key,))
        mats[key] = np.array([[_number(ctx, raw[i][j], (key, i, j)) for j in range(d)] for i in range(d)])
    if not np.array_equal(mats["metric"], mats["metric"].T):
        raise ctx.error("metric is not symmetric", ("metric",))
    return LieGroupSpec(d, C, mats["metric"], mats["structure"], name=name, tolerances=tol)


def parse_spec(source: str):
    """Parse a manifold description; raises :class:`SpecFileError` or :class:`SpecError`."""
    ctx = _Ctx(source)
    try:
        doc = json.loads(source, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise SpecFileError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    except ValueError as exc:  # duplicate key
        raise SpecFileError(str(exc)) from exc
    if not isinstance(doc, dict):
        raise ctx.error("top level must be an object", ())
    for key in ("dim", "backend"):
        if key not in doc:
            raise ctx.error(f"missing required key {key!r}", ())
    d = _int(ctx, doc["dim"], ("dim",))
    if d < 2 or d % 2:
        raise ctx.error(
            f"dimension must be even and >= 2 (tr P = 0 with P^2 = id forces even dimension), got {d}", ("dim",)
        )
    name = doc.get("name", "unnamed")
    if not isinstance(name, str):
        raise ctx.error("name must be a string", ("name",))
    tol = _tolerances(ctx, doc.get("tolerances"), ("tolerances",))
    backend = doc["backend"]
    if backend == "chart":
        return _parse_chart(ctx, doc, d, name, tol)
    if backend == "lie_group":
        return _parse_lie(ctx, doc, d, name, tol)
    raise ctx.error(f"backend must be 'chart' or 'lie_group', got {json.dumps(backend)}", ("backend",))


def load_spec(path):
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


def _tolerance_overrides(tol: Tolerances) -> dict:
    default = Tolerances()
    return {f.name: getattr(tol, f.name) for f in fields(Tolerances) if getattr(tol, f.name) != getattr(default, f.name)}


def spec_to_dict(spec) -> dict:
    out: dict = {"name": spec.name, "dim": spec.dim, "backend": spec.backend}
    d = spec.dim
    if spec.backend == "chart":
        out["metric"] = [[to_source(spec.metric[i][j]) if j >= i else None for j in range(d)] for i in range(d)]
        out["structure"] = [[to_source(e) for e in row] for row in spec.structure]
        if spec.sample_box is not None:
            out["sample_box"] = [list(iv) for iv in spec.sample_box]
    else:
        C = spec.structure_constants
        out["structure_constants"] = [
            {"k": k + 1, "i": i + 1, "j": j + 1, "value": float(C[k, i, j])}
            for k in range(d)
            for i in range(d)
            for j in range(i + 1, d)
            if C[k, i, j] != 0.0
        ]
        out["metric"] = [[float(v) for v in row] for row in spec.metric]
        out["structure"] = [[float(v) for v in row] for row in spec.structure]
    over = _tolerance_overrides(spec.tolerances)
    if over:
        out["tolerances"] = over
    return out


def dump_spec(spec) -> str:
    """Deterministic text form; ``parse_spec(dump_spec(s))`` reproduces ``s``."""
    return _compact_rows(json.dumps(spec_to_dict(spec), indent=2)) + "\n"


def _compact_rows(text: str) -> str:
    """Put innermost arrays and records on one line for readability."""

    def join(m):
        body = re.sub(r"\s*\n\s*", " ", m.group(0)[1:-1]).strip()
        return m.group(0)[0] + body + m.group(0)[-1]

    return re.sub(r"[\[{][^\[\]{}\"]*(?:\"(?:[^\"\\]|\\.)*\"[^\[\]{}\"]*)*[\]}]", join, text)
