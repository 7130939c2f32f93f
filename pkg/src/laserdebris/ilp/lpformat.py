"""CPLEX LP text export and a small reader for round trips."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .model import IlpModel

_TERMS_PER_LINE = 8


def _num(v: float) -> str:
    return repr(float(v)) if v != int(v) else str(int(v))


def _expr(terms: list[tuple[float, str]]) -> list[str]:
    parts = []
    for k, (c, name) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        coef = "" if mag == 1 else f"{_num(mag)} "
        if k == 0 and sign == "+":
            parts.append(f"{coef}{name}")
        else:
            parts.append(f"{sign} {coef}{name}")
    lines = []
    for k in range(0, len(parts), _TERMS_PER_LINE):
        lines.append(" ".join(parts[k:k + _TERMS_PER_LINE]))
    return lines


def export_model(model: IlpModel) -> str:
    """Model as CPLEX LP text (maximise, named rows, binary section)."""
    names = [model.name(i) for i in range(model.n_vars)]
    out = ["\\ laserdebris window model", "Maximize"]
    obj_terms = [(c, names[i]) for i, c in enumerate(model.objective) if c != 0]
    body = _expr(obj_terms) if obj_terms else [f"0 {names[0]}" if names else "0"]
    out.append(" obj: " + body[0])
    out.extend("   " + line for line in body[1:])
    out.append("Subject To")
    for r, row in enumerate(model.rows):
        terms = [(c, names[i]) for i, c in sorted(row.coefs.items())]
        lines = _expr(terms)
        sense = {"<=": "<=", ">=": ">=", "=": "="}[row.sense]
        lines[-1] = f"{lines[-1]} {sense} {_num(row.rhs)}"
        out.append(f" {row.family}_{r}: {lines[0]}")
        out.extend("   " + line for line in lines[1:])
    out.append("Binaries")
    for k in range(0, len(names), _TERMS_PER_LINE):
        out.append(" " + " ".join(names[k:k + _TERMS_PER_LINE]))
    out.append("End")
    return "\n".join(out) + "\n"


@dataclass
class ParsedLp:
    sense: str
    objective: dict[str, float] = field(default_factory=dict)
    rows: list[tuple[str, dict[str, float], str, float]] = field(default_factory=list)
    binaries: list[str] = field(default_factory=list)

    @property
    def variables(self) -> list[str]:
        seen = dict.fromkeys(self.binaries)
        for name in self.objective:
            seen.setdefault(name)
        for _, coefs, _, _ in self.rows:
            for name in coefs:
                seen.setdefault(name)
        return list(seen)


def _parse_terms(text: str) -> dict[str, float]:
    out: dict[str, float] = {}
    tokens = text.split()
    sign = 1.0
    coef = None
    for tok in tokens:
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
            continue
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        value = sign * (1.0 if coef is None else coef)
        out[tok] = out.get(tok, 0.0) + value
        sign, coef = 1.0, None
    return out


def parse_lp(text: str) -> ParsedLp:
    section = None
    sense = "max"
    chunks: dict[str, list[str]] = {"obj": [], "st": [], "bin": []}
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        low = line.lower()
        if low in ("maximize", "maximise", "max"):
            section, sense = "obj", "max"
            continue
        if low in ("minimize", "minimise", "min"):
            section, sense = "obj", "min"
            continue
        if low in ("subject to", "st", "s.t."):
            section = "st"
            continue
        if low in ("binaries", "binary", "bin"):
            section = "bin"
            continue
        if low == "end":
            break
        chunks[section].append(line)

    lp = ParsedLp(sense)
    obj = " ".join(chunks["obj"])
    if ":" in obj:
        obj = obj.split(":", 1)[1]
    lp.objective = _parse_terms(obj)

    # rows may continue over several lines; a new row starts with "name:"
    current: list[str] = []
    rows_text = []
    for line in chunks["st"]:
        if re.match(r"^[A-Za-z_][\w.]*\s*:", line) and current:
            rows_text.append(" ".join(current))
            current = []
        current.append(line)
    if current:
        rows_text.append(" ".join(current))
    for text_row in rows_text:
        name, body = text_row.split(":", 1)
        m = re.search(r"(<=|>=|=<|=>|=)\s*([-+0-9.eE]+)\s*$", body)
        if not m:
            raise ValueError(f"cannot parse row {name}")
        op = {"=<": "<=", "=>": ">="}.get(m.group(1), m.group(1))
        lp.rows.append((name.strip(), _parse_terms(body[:m.start()]), op, float(m.group(2))))
    for line in chunks["bin"]:
        lp.binaries.extend(line.split())
    return lp


def solve_parsed_milp(lp: ParsedLp) -> tuple[float, dict[str, int]]:
    """Solve a parsed binary LP with HiGHS' MILP (independent cross-check)."""
    from scipy.optimize import Bounds, LinearConstraint, milp

    names = lp.variables
    col = {n: k for k, n in enumerate(names)}
    c = np.zeros(len(names))
    for n, v in lp.objective.items():
        c[col[n]] = v
    if lp.sense == "max":
        c = -c
    cons = []
    if lp.rows:
        a = np.zeros((len(lp.rows), len(names)))
        lo = np.full(len(lp.rows), -np.inf)
        hi = np.full(len(lp.rows), np.inf)
        for r, (_, coefs, op, rhs) in enumerate(lp.rows):
            for n, v in coefs.items():
                a[r, col[n]] = v
            if op in ("<=", "="):
                hi[r] = rhs
            if op in (">=", "="):
                lo[r] = rhs
        cons.append(LinearConstraint(a, lo, hi))
    res = milp(c, constraints=cons, integrality=np.ones(len(names)),
               bounds=Bounds(0, 1))
    if res.status != 0:
        raise RuntimeError(f"MILP failed: {res.message}")
    obj = -res.fun if lp.sense == "max" else res.fun
    return float(obj), {n: int(round(res.x[col[n]])) for n in names}
