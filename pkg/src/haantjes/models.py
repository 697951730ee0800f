"""Model files and builtin models.

A model file is line oriented. Blank lines and ``#`` comments are ignored;
every other line is ``key = value``::

    n = 2
    param k = 0.5
    box = [-1, 1]
    margin = 0.1
    stackel_row 1 = [q1^2, 1]
    stackel_row 2 = [q2^2, -1]
    f 1 = p1^2/2 + k*q1^4
    f 2 = p2^2/2 + q2^2

Sections: ``stackel_row i`` with ``f i`` (generalized Stäckel system),
``lambda i`` with ``f i`` (quasi-bi-Hamiltonian system), ``operator NAME``
with optional ``chain i`` (explicit operators, K0 = I first), or a single
``builtin = ID key=value ...`` line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ExpressionError, ModelFileError, ParseError
from .expression import parse_expression

BUILTINS = ("calogero3", "goldfish", "stackel_random")
BUILTIN_DEFAULTS: dict[str, dict[str, float]] = {
    "calogero3": {"a": 1.0},
    "goldfish": {"n": 3.0, "a": 1.0, "b": 0.5},
    "stackel_random": {"n": 3.0, "degree": 3.0, "seed": 0.0},
}


@dataclass
class ModelSpec:
    """A parsed model: ``kind`` is one of calogero, goldfish, stackel, qbh, operators."""

    kind: str
    n: int
    params: dict[str, float] = field(default_factory=dict)
    box: tuple[float, float] = (-1.0, 1.0)
    margin: float = 0.1
    system: Any = None
    operators: dict[str, Any] = field(default_factory=dict)
    chain: list[Any] = field(default_factory=list)
    name: str = ""


_LINE = re.compile(r"^\s*([A-Za-z_]+)(?:\s+([A-Za-z_][A-Za-z0-9_]*|\d+))?\s*=\s*(.*?)\s*$")


def split_top_level(text: str, offset: int = 0) -> list[tuple[str, int]]:
    """Split ``[a, b, ...]`` at depth-one commas; returns (item, column offset) pairs."""
    stripped = text.strip()
    start = offset + text.index(stripped[0]) if stripped else offset
    if not (stripped.startswith("[") and stripped.endswith("]")):
        raise ModelFileError("expected a bracketed list", 0, start + 1)
    body = stripped[1:-1]
    items, depth, last = [], 0, 0
    for i, ch in enumerate(body + ","):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
            if depth < 0:
                raise ModelFileError("unbalanced brackets", 0, start + 2 + i)
        elif ch == "," and depth == 0:
            raw = body[last:i]
            lead = len(raw) - len(raw.lstrip())
            items.append((raw.strip(), start + 1 + last + lead))
            last = i + 1
    if depth != 0:
        raise ModelFileError("unbalanced brackets", 0, start + 1)
    if items == [("", start + 1)]:
        return []
    return items


def parse_builtin(text: str, overrides: dict[str, float] | None = None) -> ModelSpec:
    """``calogero3 a=1.0`` / ``goldfish n=3 a=1 b=0.5`` / ``stackel_random n=3 seed=1``."""
    parts = text.split()
    if not parts or parts[0] not in BUILTINS:
        raise ModelFileError(f"unknown builtin model {parts[0] if parts else ''!r}; known: {', '.join(BUILTINS)}")
    ident = parts[0]
    values = dict(BUILTIN_DEFAULTS[ident])
    for tok in parts[1:]:
        if "=" not in tok:
            raise ModelFileError(f"builtin parameter {tok!r} is not of the form name=value")
        k, v = tok.split("=", 1)
        values[k] = _number(v, k)
    values.update(overrides or {})
    unknown = set(values) - set(BUILTIN_DEFAULTS[ident])
    if unknown:
        raise ModelFileError(f"unknown parameter(s) {', '.join(sorted(unknown))} for builtin {ident}")
    return build_builtin(ident, values)


def _number(v: str, what: str) -> float:
    try:
        return float(v)
    except ValueError:
        raise ModelFileError(f"value {v!r} of {what} is not a number") from None


def build_builtin(ident: str, values: dict[str, float]) -> ModelSpec:
    if ident == "calogero3":
        from .calogero import BOX, MARGIN, model

        return ModelSpec("calogero", 3, {"a": values["a"]}, (-BOX, BOX), MARGIN, system=model(values["a"]), name=ident)
    if ident == "goldfish":
        from .qbh import GoldfishModel

        m = GoldfishModel(int(values["n"]), values["a"], values["b"])
        return ModelSpec("goldfish", m.n, dict(m.params), (-1.0, 1.0), 0.1, system=m, name=ident)
    from .stackel import random_stackel_system

    n = int(values["n"])
    sys = random_stackel_system(np.random.default_rng(int(values["seed"])), n, int(values["degree"]))
    return ModelSpec("stackel", n, {}, (-0.5, 0.5), 0.0, system=sys, name=ident)


def load_model(path: str | Path, overrides: dict[str, float] | None = None) -> ModelSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc.strerror}") from None
    return parse_model(text, overrides)


def parse_model(text: str, overrides: dict[str, float] | None = None) -> ModelSpec:
    header: dict[str, tuple[str, int]] = {}
    params: dict[str, float] = {}
    sections: dict[str, dict[str, tuple[str, int, int]]] = {"stackel_row": {}, "f": {}, "lambda": {}, "operator": {}, "chain": {}}
    builtin = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            raise ModelFileError("expected 'key = value'", lineno, len(line) - len(line.lstrip()) + 1)
        key, label, value = m.group(1), m.group(2), m.group(3)
        col = m.start(3)
        if key == "param":
            if label is None:
                raise ModelFileError("param needs a name", lineno, m.start(1) + 1)
            try:
                params[label] = float(value)
            except ValueError:
                raise ModelFileError(f"parameter value {value!r} is not a number", lineno, col + 1) from None
        elif key in ("n", "box", "margin"):
            header[key] = (value, lineno)
        elif key == "builtin":
            builtin = (value, lineno)
        elif key in sections:
            if label is None:
                raise ModelFileError(f"{key} needs an index or name", lineno, m.start(1) + 1)
            if label in sections[key]:
                raise ModelFileError(f"duplicate {key} {label}", lineno, m.start(1) + 1)
            sections[key][label] = (value, lineno, col)
        else:
            raise ModelFileError(f"unknown key {key!r}", lineno, m.start(1) + 1)
    params.update(overrides or {})

    if builtin is not None:
        bparams = {k: v for k, v in params.items()}
        try:
            return parse_builtin(builtin[0], bparams)
        except ModelFileError as exc:
            raise ModelFileError(str(exc), builtin[1]) from None

    if "n" not in header:
        raise ModelFileError("missing header 'n = ...'", 1)
    n_text, n_line = header["n"]
    try:
        n = int(n_text)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ModelFileError(f"n must be a positive integer, not {n_text!r}", n_line) from None
    box = (-1.0, 1.0)
    if "box" in header:
        items = _list(header["box"][0], header["box"][1], 0)
        if len(items) != 2:
            raise ModelFileError("box must be [lo, hi]", header["box"][1])
        box = (_number(items[0][0], "box"), _number(items[1][0], "box"))
        if not box[0] < box[1]:
            raise ModelFileError("box must satisfy lo < hi", header["box"][1])
    margin = _number(header["margin"][0], "margin") if "margin" in header else 0.1

    def expr(value, lineno, col):
        try:
            return parse_expression(value, n, params)
        except ParseError as exc:
            raise ModelFileError(str(exc), lineno, col + exc.position + 1) from None
        except ExpressionError as exc:
            raise ModelFileError(str(exc), lineno, col + 1) from None

    def indexed(key):
        sec = sections[key]
        out = []
        for i in range(1, n + 1):
            if str(i) not in sec:
                raise ModelFileError(f"missing '{key} {i}'")
            out.append(sec[str(i)])
        extra = set(sec) - {str(i) for i in range(1, n + 1)}
        if extra:
            bad = sorted(extra)[0]
            raise ModelFileError(f"{key} index {bad} out of range for n={n}", sec[bad][1])
        return out

    spec = ModelSpec("", n, params, box, margin)
    if sections["stackel_row"]:
        from .stackel import StackelMatrix, StackelSystem

        rows = []
        for value, lineno, col in indexed("stackel_row"):
            items = _list(value, lineno, col)
            if len(items) != n:
                raise ModelFileError(f"Stäckel row has {len(items)} entries, expected {n}", lineno, col + 1)
            rows.append([expr(t, lineno, c) for t, c in items])
        f = [expr(*item) for item in indexed("f")]
        spec.kind = "stackel"
        spec.system = StackelSystem(StackelMatrix(rows, n), f)
    elif sections["lambda"]:
        from .qbh import QbhSystem

        lambdas = [expr(*item) for item in indexed("lambda")]
        f = [expr(*item) for item in indexed("f")]
        spec.kind = "qbh"
        spec.system = QbhSystem(lambdas, f, n, params)
    elif sections["operator"]:
        from .fields import OperatorField

        for name, (value, lineno, col) in sections["operator"].items():
            rows = _list(value, lineno, col)
            entries = []
            for rtext, rcol in rows:
                items = _list(rtext, lineno, rcol)
                if len(items) != 2 * n:
                    raise ModelFileError(f"operator {name} row has {len(items)} entries, expected {2 * n}", lineno, rcol + 1)
                entries.append([expr(t, lineno, c) for t, c in items])
            if len(entries) != 2 * n:
                raise ModelFileError(f"operator {name} has {len(entries)} rows, expected {2 * n}", lineno, col + 1)
            spec.operators[name] = OperatorField.from_expressions(entries, n, params, name=name)
        if sections["chain"]:
            from .fields import ScalarField

            spec.chain = [ScalarField.from_expression(expr(*item), name=f"H{i + 1}")
                          for i, item in enumerate(indexed("chain"))]
        spec.kind = "operators"
    else:
        raise ModelFileError("model defines no builtin, stackel_row, lambda or operator section")
    return spec


def _list(value: str, lineno: int, col: int) -> list[tuple[str, int]]:
    try:
        return split_top_level(value, col)
    except ModelFileError as exc:
        raise ModelFileError(str(exc).split(": ", 1)[-1], lineno, exc.column) from None


def resolve_model(target: str, overrides: dict[str, float] | None = None) -> ModelSpec:
    """``builtin:ID`` or a path to a model file."""
    if target.startswith("builtin:"):
        return parse_builtin(target[len("builtin:"):], overrides)
    return load_model(target, overrides)
