"""Free-format MPS reading and writing.

Sections understood: NAME, OBJSENSE, ROWS, COLUMNS (with INTORG/INTEND
markers), RHS, RANGES, BOUNDS, ENDATA. Fixed-format files parse as long as
names contain no blanks.

A ranged row ``lo <= a x <= hi`` is stored as two rows: the original row with
one side, plus a companion row ``<name>__range`` appended after all declared
rows, so row positions of the ROWS section are preserved.
"""

from __future__ import annotations

import io
import logging
from pathlib import Path

from .model import (
    BINARY,
    CONTINUOUS,
    EQ,
    GE,
    INF,
    INTEGER,
    LE,
    MAXIMIZE,
    MINIMIZE,
    Constraint,
    MipInstance,
    Variable,
)

log = logging.getLogger(__name__)

RANGE_SUFFIX = "__range"

_SECTIONS = {"NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA", "OBJSENSE", "OBJSENS"}
_ROW_TYPES = {"N": None, "L": LE, "G": GE, "E": EQ}
_REL_TO_TYPE = {LE: "L", GE: "G", EQ: "E"}


class MpsError(ValueError):
    """Malformed MPS text; carries the 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MpsSemanticError(MpsError):
    """Well-formed text referring to undeclared or duplicated entities."""


def _number(tok, lineno):
    try:
        return float(tok)
    except ValueError:
        raise MpsError(f"expected a number, got {tok!r}", lineno) from None


def parse_mps(text, name: str | None = None) -> MipInstance:
    """Parse MPS text (``str`` or ``bytes``) into a :class:`MipInstance`."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")

    prob_name = name or ""
    sense = MINIMIZE
    obj_row = None
    row_order: list[str] = []
    row_type: dict[str, str | None] = {}
    col_order: list[str] = []
    col_index: dict[str, int] = {}
    col_integer: list[bool] = []
    obj: dict[int, float] = {}
    entries: dict[str, dict[int, float]] = {}
    rhs: dict[str, float] = {}
    obj_constant = 0.0
    ranges: dict[str, float] = {}
    lower: dict[int, float] = {}
    upper: dict[int, float] = {}
    kind_override: dict[int, str] = {}
    bounded: set[int] = set()

    section = None
    in_marker = False
    seen_end = False

    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        tokens = line.split()
        if not line[0].isspace():
            head = tokens[0].upper()
            if head not in _SECTIONS:
                raise MpsError(f"unknown section header {tokens[0]!r}", lineno)
            if seen_end:
                raise MpsError("content after ENDATA", lineno)
            section = "OBJSENSE" if head == "OBJSENS" else head
            if section == "NAME":
                if len(tokens) > 1 and not name:
                    prob_name = tokens[1]
            elif section == "OBJSENSE" and len(tokens) > 1:
                sense = _parse_sense(tokens[1], lineno)
            elif section == "ENDATA":
                seen_end = True
            continue

        if section is None or section in ("NAME", "ENDATA"):
            raise MpsError("data line outside of a section", lineno)

        if section == "OBJSENSE":
            sense = _parse_sense(tokens[0], lineno)

        elif section == "ROWS":
            if len(tokens) != 2:
                raise MpsError("ROWS entries need a type and a name", lineno)
            rtype, rname = tokens[0].upper(), tokens[1]
            if rtype not in _ROW_TYPES:
                raise MpsError(f"unknown row type {tokens[0]!r}", lineno)
            if rname in row_type:
                raise MpsSemanticError(f"row {rname!r} declared twice", lineno)
            row_type[rname] = _ROW_TYPES[rtype]
            if rtype == "N":
                if obj_row is None:
                    obj_row = rname
                else:
                    log.info("ignoring extra objective row %s", rname)
            else:
                row_order.append(rname)
                entries[rname] = {}

        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1].strip("'\"").upper() == "MARKER":
                flag = tokens[2].strip("'\"").upper()
                if flag == "INTORG":
                    in_marker = True
                elif flag == "INTEND":
                    in_marker = False
                else:
                    raise MpsError(f"unknown marker {tokens[2]!r}", lineno)
                continue
            if len(tokens) not in (3, 5):
                raise MpsError("COLUMNS entries need a column and 1 or 2 (row, value) pairs", lineno)
            cname = tokens[0]
            j = col_index.get(cname)
            if j is None:
                j = len(col_order)
                col_index[cname] = j
                col_order.append(cname)
                col_integer.append(in_marker)
            elif col_order[-1] != cname:
                log.debug("column %s is not contiguous in COLUMNS", cname)
            for rname, val in zip(tokens[1::2], tokens[2::2]):
                value = _number(val, lineno)
                if rname == obj_row:
                    if j in obj:
                        raise MpsSemanticError(f"duplicate objective entry for {cname!r}", lineno)
                    obj[j] = value
                elif rname in entries:
                    if j in entries[rname]:
                        raise MpsSemanticError(
                            f"duplicate entry for row {rname!r}, column {cname!r}", lineno
                        )
                    entries[rname][j] = value
                elif rname in row_type:
                    continue  # secondary objective row
                else:
                    raise MpsSemanticError(f"undeclared row {rname!r}", lineno)

        elif section in ("RHS", "RANGES"):
            pairs = tokens[1:] if len(tokens) % 2 == 1 else tokens
            if len(pairs) not in (2, 4):
                raise MpsError(f"{section} entries need 1 or 2 (row, value) pairs", lineno)
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                value = _number(val, lineno)
                if section == "RHS":
                    if rname == obj_row:
                        obj_constant = -value
                    elif rname in entries:
                        if rname in rhs:
                            raise MpsSemanticError(f"duplicate RHS for row {rname!r}", lineno)
                        rhs[rname] = value
                    elif rname not in row_type:
                        raise MpsSemanticError(f"undeclared row {rname!r}", lineno)
                else:
                    if rname not in entries:
                        raise MpsSemanticError(f"RANGES on unknown or objective row {rname!r}", lineno)
                    if rname in ranges:
                        raise MpsSemanticError(f"duplicate RANGES for row {rname!r}", lineno)
                    ranges[rname] = value

        elif section == "BOUNDS":
            btype = tokens[0].upper()
            needs_value = btype in ("UP", "LO", "FX", "LI", "UI")
            rest = tokens[1:]
            if btype in ("FR", "MI", "PL", "BV"):
                # set name optional; an optional trailing value is ignored
                if len(rest) >= 2 and rest[-1] not in col_index and rest[-2] in col_index:
                    rest = rest[:-1]
                cname = rest[-1] if rest else None
                value = None
            elif needs_value:
                if len(rest) not in (2, 3):
                    raise MpsError(f"{btype} bound needs a column and a value", lineno)
                cname, value = rest[-2], _number(rest[-1], lineno)
            else:
                raise MpsError(f"unknown bound type {tokens[0]!r}", lineno)
            if cname is None or cname not in col_index:
                raise MpsSemanticError(f"bound on undeclared column {cname!r}", lineno)
            j = col_index[cname]
            bounded.add(j)
            if btype == "UP":
                if value < 0 and j not in lower:
                    lower[j] = -INF
                upper[j] = value
            elif btype == "LO":
                lower[j] = value
            elif btype == "FX":
                lower[j] = upper[j] = value
            elif btype == "FR":
                lower[j], upper[j] = -INF, INF
            elif btype == "MI":
                lower[j] = -INF
            elif btype == "PL":
                upper[j] = INF
            elif btype == "BV":
                lower[j], upper[j] = 0.0, 1.0
                kind_override[j] = BINARY
            elif btype in ("LI", "UI"):
                kind_override.setdefault(j, INTEGER)
                if btype == "LI":
                    lower[j] = value
                else:
                    upper[j] = value

    if obj_row is None:
        raise MpsError("no objective (N) row declared")
    if section is None:
        raise MpsError("empty MPS input")

    variables = []
    for j, cname in enumerate(col_order):
        integral = col_integer[j] or j in kind_override
        if kind_override.get(j) == BINARY:
            kind = BINARY
        elif integral:
            kind = INTEGER if j in bounded else BINARY
        else:
            kind = CONTINUOUS
        if kind == BINARY:
            lo, hi = lower.get(j, 0.0), upper.get(j, 1.0)
        else:
            lo, hi = lower.get(j, 0.0), upper.get(j, INF)
        if lo > hi:
            raise MpsSemanticError(f"column {cname!r} has lower bound above upper bound")
        variables.append(Variable(cname, kind, float(lo), float(hi)))

    constraints = []
    companions = []
    for rname in row_order:
        row = entries[rname]
        idx = tuple(sorted(j for j, v in row.items() if v != 0.0))
        coefs = tuple(row[j] for j in idx)
        rel = row_type[rname]
        b = rhs.get(rname, 0.0)
        if rname in ranges and ranges[rname] != 0.0:
            r = ranges[rname]
            if rel == LE:
                lo_rel, lo_rhs = GE, b - abs(r)
                constraints.append(Constraint(rname, idx, coefs, LE, b))
                companions.append(Constraint(rname + RANGE_SUFFIX, idx, coefs, lo_rel, lo_rhs))
            elif rel == GE:
                constraints.append(Constraint(rname, idx, coefs, GE, b))
                companions.append(Constraint(rname + RANGE_SUFFIX, idx, coefs, LE, b + abs(r)))
            elif r > 0:
                constraints.append(Constraint(rname, idx, coefs, GE, b))
                companions.append(Constraint(rname + RANGE_SUFFIX, idx, coefs, LE, b + r))
            else:
                constraints.append(Constraint(rname, idx, coefs, LE, b))
                companions.append(Constraint(rname + RANGE_SUFFIX, idx, coefs, GE, b + r))
        else:
            constraints.append(Constraint(rname, idx, coefs, rel, b))

    return MipInstance(
        name=prob_name,
        sense=sense,
        objective=tuple(float(obj.get(j, 0.0)) for j in range(len(col_order))),
        constraints=tuple(constraints + companions),
        variables=tuple(variables),
        objective_constant=obj_constant,
    )


def _parse_sense(tok, lineno):
    t = tok.upper()
    if t in ("MAX", "MAXIMIZE", "MAXIMISE"):
        return MAXIMIZE
    if t in ("MIN", "MINIMIZE", "MINIMISE"):
        return MINIMIZE
    raise MpsError(f"unknown objective sense {tok!r}", lineno)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_mps(instance: MipInstance) -> bytes:
    """Serialize to free-format MPS; ``parse_mps`` reads it back unchanged."""
    names = {c.name for c in instance.constraints}
    obj_name = "OBJ"
    while obj_name in names:
        obj_name += "_"

    out = [f"NAME {instance.name or 'UNNAMED'}"]
    out.append("OBJSENSE")
    out.append("    MAX" if instance.sense == MAXIMIZE else "    MIN")
    out.append("ROWS")
    out.append(f" N  {obj_name}")
    for con in instance.constraints:
        out.append(f" {_REL_TO_TYPE[con.relation]}  {con.name}")

    col_entries: list[list[tuple[str, float]]] = [[] for _ in instance.variables]
    for con in instance.constraints:
        for j, v in zip(con.indices, con.coefs):
            col_entries[j].append((con.name, v))

    out.append("COLUMNS")
    in_marker = False
    marker_no = 0
    for j, var in enumerate(instance.variables):
        want = var.kind != CONTINUOUS
        if want != in_marker:
            tag = "INTORG" if want else "INTEND"
            out.append(f"    MARKER{marker_no} 'MARKER' '{tag}'")
            marker_no += 1
            in_marker = want
        out.append(f"    {var.name} {obj_name} {_fmt(instance.objective[j])}")
        for rname, v in col_entries[j]:
            out.append(f"    {var.name} {rname} {_fmt(v)}")
    if in_marker:
        out.append(f"    MARKER{marker_no} 'MARKER' 'INTEND'")

    out.append("RHS")
    if instance.objective_constant != 0.0:
        out.append(f"    RHS {obj_name} {_fmt(-instance.objective_constant)}")
    for con in instance.constraints:
        if con.rhs != 0.0:
            out.append(f"    RHS {con.name} {_fmt(con.rhs)}")

    bounds = []
    for var in instance.variables:
        bounds.extend(_bound_lines(var))
    if bounds:
        out.append("BOUNDS")
        out.extend(bounds)
    out.append("ENDATA")
    return ("\n".join(out) + "\n").encode("utf-8")


def _bound_lines(var: Variable) -> list[str]:
    lo, hi, n = var.lower, var.upper, var.name
    if var.kind == BINARY:
        if (lo, hi) == (0.0, 1.0):
            return []
        return [f" BV BND {n}", f" LO BND {n} {_fmt(lo)}", f" UP BND {n} {_fmt(hi)}"]
    if var.kind == CONTINUOUS and lo == 0.0 and hi == INF:
        return []
    if lo == hi:
        return [f" FX BND {n} {_fmt(lo)}"]
    if lo == -INF and hi == INF:
        return [f" FR BND {n}"]
    lines = []
    lines.append(f" MI BND {n}" if lo == -INF else f" LO BND {n} {_fmt(lo)}")
    lines.append(f" PL BND {n}" if hi == INF else f" UP BND {n} {_fmt(hi)}")
    return lines


def read_mps(path) -> MipInstance:
    """Read an MPS file; the instance is named after the file stem."""
    p = Path(path)
    data = p.read_bytes()
    stem = p.name
    for suffix in (".gz", ".mps"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
    if p.suffix == ".gz":
        import gzip

        data = gzip.decompress(data)
    return parse_mps(data, name=stem)


def save_mps(instance: MipInstance, path) -> None:
    Path(path).write_bytes(write_mps(instance))

