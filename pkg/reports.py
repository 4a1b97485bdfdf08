"""JSON, CSV and plain-table rendering of PolyaLab results.

Every result is first turned into a ``Document``: a JSON payload plus a flat
table. JSON output carries ``"schema": 1`` and a ``generated_at`` timestamp;
the timestamp is the only field that differs between identical runs.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from typing import Any, Sequence

import mpmath

from numerics_core import Scalar, is_exact, to_float
from pf_densities import EvalResult, KernelSpec
from preserver_lab import (
    FalsificationResult,
    PowerSweepReport,
    RecoveryResult,
    SweepRow,
    WitnessSearchResult,
)
from tp_check import GridSample, MinorCertificate, TnReport

SCHEMA_VERSION = 1
DIGITS = 30
SWEEP_CSV_COLUMNS = (
    "exponent",
    "classification",
    "shift_or_scale",
    "witness_rows",
    "witness_cols",
    "det_value",
)


def format_scalar(value: Scalar | None) -> str:
    """Decimal string with 30 significant digits; integers are printed in full."""
    if value is None:
        return ""
    if is_exact(value) and Fraction(value).denominator == 1:
        return str(int(value))
    return mpmath.nstr(to_float(value), DIGITS)


def _indices(values: Sequence[int]) -> str:
    return " ".join(str(i) for i in values)


@dataclass(frozen=True)
class Document:
    kind: str
    payload: dict[str, Any]
    headers: tuple[str, ...]
    rows: list[tuple[str, ...]] = field(default_factory=list)

    def to_json_dict(self, generated_at: str | None = None) -> dict[str, Any]:
        stamp = generated_at or datetime.now(timezone.utc).isoformat(timespec="seconds")
        return {"schema": SCHEMA_VERSION, "generated_at": stamp, "kind": self.kind, **self.payload}


def certificate_to_dict(certificate: MinorCertificate | None) -> dict[str, Any] | None:
    if certificate is None:
        return None
    return {
        "row_indices": list(certificate.row_indices),
        "col_indices": list(certificate.col_indices),
        "det_value": format_scalar(certificate.det_value),
        "sign": certificate.sign.label,
        "error_bound": format_scalar(certificate.error_bound),
        "principal": certificate.principal,
    }


def tn_report_to_dict(report: TnReport | None) -> dict[str, Any] | None:
    if report is None:
        return None
    return {
        "order_tested": report.order_tested,
        "verdict": report.verdict.value,
        "failure": report.failure,
        "minors_evaluated": report.minors_evaluated,
        "witness": certificate_to_dict(report.witness),
    }


def eval_result_to_dict(result: EvalResult) -> dict[str, Any]:
    return {
        "value": format_scalar(result.value),
        "abs_error_bound": format_scalar(result.abs_error_bound),
        "unbounded": result.unbounded,
    }


def _grids(xs: Sequence[Scalar], ys: Sequence[Scalar]) -> dict[str, Any]:
    return {"xs": [format_scalar(x) for x in xs], "ys": [format_scalar(y) for y in ys]}


def eval_document(spec: KernelSpec, points: Sequence[tuple[Scalar, EvalResult]]) -> Document:
    rows = [
        (format_scalar(x), format_scalar(r.value), format_scalar(r.abs_error_bound))
        for x, r in points
    ]
    payload = {
        "kernel": spec.to_json(),
        "values": [{"x": format_scalar(x), **eval_result_to_dict(r)} for x, r in points],
    }
    return Document("eval", payload, ("x", "value", "error_bound"), rows)


def sample_document(g: GridSample) -> Document:
    matrix = [[format_scalar(v) for v in g.matrix.row(i)] for i in range(g.matrix.rows)]
    payload = {
        "kernel": g.spec.to_json() if g.spec is not None else None,
        **_grids(g.xs, g.ys),
        "matrix": matrix,
    }
    headers = ("x \\ y",) + tuple(format_scalar(y) for y in g.ys)
    rows = [(format_scalar(x),) + tuple(matrix[i]) for i, x in enumerate(g.xs)]
    return Document("sample", payload, headers, rows)


def tn_document(report: TnReport, g: GridSample | None = None) -> Document:
    payload = {"report": tn_report_to_dict(report)}
    if g is not None:
        payload.update(_grids(g.xs, g.ys))
        payload["kernel"] = g.spec.to_json() if g.spec is not None else None
    witness = report.witness
    row = (
        report.verdict.value,
        str(report.order_tested),
        str(report.minors_evaluated),
        report.failure or "",
        _indices(witness.row_indices) if witness else "",
        _indices(witness.col_indices) if witness else "",
        format_scalar(witness.det_value) if witness else "",
    )
    headers = (
        "verdict", "order", "minors", "failure", "witness_rows", "witness_cols", "det_value"
    )
    return Document("tncheck", payload, headers, [row])


def sweep_row_to_dict(row: SweepRow) -> dict[str, Any]:
    return {
        "exponent": format_scalar(row.exponent),
        "classification": row.classification.value,
        "predicted_nonnegative": row.predicted_nonnegative,
        "transform": row.transform,
        "shift_or_scale": format_scalar(row.shift_or_scale) or None,
        **_grids(row.xs, row.ys),
        "kernel": row.kernel.to_json(),
        "precision_bits": row.precision_bits,
        "witness": certificate_to_dict(row.witness),
        "note": row.note,
    }


def sweep_document(report: PowerSweepReport) -> Document:
    payload = {
        "sweep": report.kind,
        "p": report.p,
        "base": report.base.to_json() if report.base is not None else None,
        "rows": [sweep_row_to_dict(row) for row in report.rows],
    }
    rows = []
    for row in report.rows:
        witness = row.witness if not row.classification.non_negative else None
        rows.append(
            (
                format_scalar(row.exponent),
                row.classification.value,
                format_scalar(row.shift_or_scale),
                _indices(witness.row_indices) if witness else "",
                _indices(witness.col_indices) if witness else "",
                format_scalar(witness.det_value) if witness else "",
            )
        )
    return Document("sweep", payload, SWEEP_CSV_COLUMNS, rows)


def recovery_document(result: RecoveryResult, mode: str) -> Document:
    payload = {
        "mode": mode,
        "alpha": [format_scalar(v) for v in result.recovered.alpha],
        "residual": format_scalar(result.residual),
    }
    rows = [(str(i + 1), format_scalar(v)) for i, v in enumerate(result.recovered.alpha)]
    rows.append(("residual", format_scalar(result.residual)))
    return Document("recover", payload, ("index", "alpha"), rows)


def witness_document(result: WitnessSearchResult, kind: str) -> Document:
    payload = {
        "search": kind,
        "status": result.status,
        "kernel": result.kernel.to_json(),
        **_grids(result.xs, result.ys),
        "grids_tested": result.grids_tested,
        "precision_bits": result.precision_bits,
        "report": tn_report_to_dict(result.report),
        "base_report": tn_report_to_dict(result.base_report),
    }
    witness = result.report.witness if result.status == "NegativeMinor" else None
    row = (
        result.status,
        str(result.grids_tested),
        _indices(witness.row_indices) if witness else "",
        _indices(witness.col_indices) if witness else "",
        format_scalar(witness.det_value) if witness else "",
    )
    headers = ("status", "grids_tested", "witness_rows", "witness_cols", "det_value")
    return Document(kind, payload, headers, [row])


def falsification_document(result: FalsificationResult) -> Document:
    payload = {
        "status": result.status,
        "family": {
            "kind": result.family.kind,
            "params": [format_scalar(v) for v in result.family.params],
        },
        "grid_class": result.grid_class,
        "order": result.order,
        "predicted_preserver": result.predicted_preserver,
        "grids_tested": result.grids_tested,
        "kernel": result.kernel.to_json() if result.kernel is not None else None,
        **_grids(result.xs, result.ys),
        "report": tn_report_to_dict(result.report),
        "note": result.note,
    }
    witness = result.report.witness if result.report is not None else None
    row = (
        result.status,
        result.family.describe(),
        result.grid_class,
        str(result.grids_tested),
        format_scalar(witness.det_value) if witness else "",
    )
    headers = ("status", "family", "grid_class", "grids_tested", "det_value")
    return Document("falsify", payload, headers, [row])


def hciz_document(label: str, results: Sequence[tuple[str, EvalResult]]) -> Document:
    payload = {"mode": label, "values": {name: eval_result_to_dict(r) for name, r in results}}
    rows = [
        (name, format_scalar(r.value), format_scalar(r.abs_error_bound)) for name, r in results
    ]
    return Document("hciz", payload, ("quantity", "value", "error_bound"), rows)


def settings_document(data: dict[str, Any], path: str) -> Document:
    payload = {"settings_file": path, "settings": dict(data)}
    rows = [
        (key, ",".join(value) if isinstance(value, list) else str(value))
        for key, value in sorted(data.items())
    ]
    return Document("config", payload, ("key", "value"), rows)


def render_json(document: Document, generated_at: str | None = None) -> str:
    return json.dumps(document.to_json_dict(generated_at), indent=2, ensure_ascii=False) + "\n"


def render_csv(document: Document) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(document.headers)
    writer.writerows(document.rows)
    return buffer.getvalue()


def render_table(document: Document) -> str:
    widths = [len(h) for h in document.headers]
    for row in document.rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(document.headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in document.rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render(document: Document, output_format: str) -> str:
    if output_format == "json":
        return render_json(document)
    if output_format == "csv":
        return render_csv(document)
    return render_table(document)

