"""Text and CSV renderings of flattening tables, parameters and graph reports."""

from __future__ import annotations

import csv
import io
from typing import Mapping

from .bounds import BoundProfile
from .flattening import ChaosParameters, FlatteningTable
from .graph import GraphBoundReport, SigmaCheck


def _grid(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows)


def table_text(table: FlatteningTable, title: str = "") -> str:
    schema = table.schema
    q = schema.q
    order = schema.symbols()
    header = ["type"]
    header += [schema.coord_label(t) for t in range(q)]
    header += ["|", schema.coord_label(q), schema.coord_label(q + 1), "|"]
    header += list(schema.index_labels)
    header += ["|", "norm²", ""]
    rows = [header]
    hl = set(table.highlights)
    for i, row in enumerate(table.rows):
        pl = row.assignment.placement
        line = [row.cls.symbol] + list(pl[:q]) + ["|", pl[q], pl[q + 1], "|"] + list(row.split)
        if not schema.is_symbolic:
            norm = f"{row.norm_sq_numeric:g}"
        elif row.norm_sq_numeric is not None:
            norm = f"{row.norm_sq_symbolic.render(order)} = {row.norm_sq_numeric:g}"
        else:
            norm = row.norm_sq_symbolic.render(order)
        line += ["|", norm, "*" if i in hl else ""]
        rows.append(line)
    out = _grid(rows)
    if any(r.is_upper_bound for r in table.rows):
        out += "\nweighted schema: norm² column is an upper bound"
    if title:
        out = f"{title}\n{out}"
    return out + "\n"


def table_csv(table: FlatteningTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "placement", "exponents", "norm_sq"])
    order = table.schema.symbols()
    for row in table.rows:
        value = row.norm_sq_symbolic.render(order) if row.norm_sq_numeric is None else repr(row.norm_sq_numeric)
        w.writerow([row.cls.value, " ".join(row.assignment.placement), " ".join(map(str, row.exponents)), value])
    return buf.getvalue()


def parameters_text(cp: ChaosParameters, order=None, symbolic: bool = True) -> str:
    lines = []
    for name, sym in (("sigma", "σ"), ("v", "v"), ("r", "r")):
        pv = cp[name]
        parts = [pv.render(order)] if symbolic else []
        if pv.numeric is not None:
            parts.append(f"{pv.numeric:.6g}")
        lines.append(f"{sym} = " + " = ".join(parts))
    return "\n".join(lines) + "\n"


def profiles_text(profiles: Mapping[object, BoundProfile]) -> str:
    return "\n".join(prof.serialize() for prof in profiles.values()) + "\n"


def graph_text(rep: GraphBoundReport, check: SigmaCheck, deterministic_norm: float | None = None, n: int | None = None) -> str:
    shape = rep.shape
    sep = rep.separator
    fmt_set = lambda xs: "{" + ",".join(sorted(xs)) + "}"
    lines = [
        f"shape: V={fmt_set(shape.vertices)} U=({','.join(shape.left)}) V_right=({','.join(shape.right)}) "
        f"E={[a + b for a, b in shape.edges]}",
        f"matrix size: {rep.row_dim} x {rep.col_dim}",
        f"S_min={fmt_set(sep.separator)} (size {sep.size})",
        "certificate paths: " + ("; ".join("-".join(p) for p in sep.paths) if sep.paths else "none"),
        f"W_iso={fmt_set(rep.isolated)}",
        f"f = {rep.f}",
    ]
    if deterministic_norm is not None:
        lines.append(f"deterministic; norm {deterministic_norm:g} (n={n})")
    poly = _npow(rep.poly_exponent)
    log = rep.log_exponent
    lines.append(f"exponents: poly {poly}, log power 1/2·{rep.f}")
    lines.append(f"bound: poly {poly}, log power {log}, W_iso={fmt_set(rep.isolated)}")
    order = " ".join(a + b for a, b in rep.ordering.edges)
    lines.append(f"edge ordering: [{order}] (k1={rep.ordering.k1}, k2={rep.ordering.k2}, k={rep.k} <= f={rep.f})")
    if check.deterministic:
        lines.append("sigma check: no edges, nothing to enumerate")
    else:
        verdict = "equal" if check.ok else "MISMATCH"
        lines.append(
            f"sigma check: σ exponent {check.sigma_exponent} vs poly {rep.poly_exponent} ({verdict}); "
            f"R∩C at maximizer = {fmt_set(check.both_vertices)}"
            + (" realizes S_min" if check.separator_realized else "")
        )
    return "\n".join(lines) + "\n"


_SUP = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")


def _npow(e) -> str:
    if e == 0:
        return "n⁰"
    if e.denominator == 1:
        return "n" if e == 1 else "n" + str(e.numerator).translate(_SUP)
    return f"n^{{{e}}}"
