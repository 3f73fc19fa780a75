"""Plain-text tables and deterministic CSV/JSON artifacts for CLI results."""

import csv
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from leontief_mech.dist import ValidationReport
from leontief_mech.verify import REPORT_CSV_HEADER, VerificationReport
from leontief_mech.virtual import ConditionVerdict

SIGNIFICANT_DIGITS = 12
RULE_WIDTH = 60


def _numeric_cell(cell: Any) -> bool:
    return cell is None or isinstance(cell, (float, np.floating))


class ReportFormatter:
    """Format numbers, verdicts and reports the same way for screen and files."""

    @staticmethod
    def number(value: float | None) -> str:
        """Fixed 12-significant-digit rendering; empty string for missing values."""
        if value is None:
            return ""
        return f"{float(value):.{SIGNIFICANT_DIGITS}g}"

    @staticmethod
    def normalize(data: Any) -> Any:
        """Round every float to the printed precision so screen and file agree."""
        if isinstance(data, dict):
            return {str(key): ReportFormatter.normalize(value) for key, value in data.items()}
        if isinstance(data, (list, tuple)):
            return [ReportFormatter.normalize(value) for value in data]
        if isinstance(data, np.ndarray):
            return ReportFormatter.normalize(data.tolist())
        if isinstance(data, (bool, np.bool_)):
            return bool(data)
        if isinstance(data, (int, np.integer)):
            return int(data)
        if isinstance(data, (float, np.floating)):
            if not math.isfinite(float(data)):
                return str(float(data))
            return float(ReportFormatter.number(float(data)))
        return data

    @staticmethod
    def to_json(data: Any) -> str:
        return json.dumps(ReportFormatter.normalize(data), indent=2, sort_keys=True) + "\n"

    @staticmethod
    def write_json(path: Path, data: Any) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(ReportFormatter.to_json(data))
        return path

    @staticmethod
    def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """Write rows with floats at the printed precision; None becomes an empty cell."""
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([ReportFormatter.number(cell) if _numeric_cell(cell) else cell for cell in row])
        return path

    @staticmethod
    def title(text: str) -> list[str]:
        return ["=" * RULE_WIDTH, text, "=" * RULE_WIDTH]

    @staticmethod
    def verdict_lines(verdicts: Iterable[ConditionVerdict]) -> list[str]:
        lines = [f"{'condition':<12} {'holds':<6} {'margin':>20}  witness"]
        for verdict in verdicts:
            witness = ""
            if verdict.witnesses:
                first = verdict.witnesses[0]
                location = ", ".join(ReportFormatter.number(x) for x in first.location)
                witness = f"({location}) by {ReportFormatter.number(first.magnitude)}"
            holds = "yes" if verdict.holds else "no"
            lines.append(f"{verdict.condition:<12} {holds:<6} {ReportFormatter.number(verdict.margin):>20}  {witness}")
        return lines

    @staticmethod
    def verification_rows(report: VerificationReport) -> list[list[float | str | None]]:
        return [result.row() for result in report.results]

    @staticmethod
    def verification_lines(report: VerificationReport) -> list[str]:
        lines = [f"{'family':<18} {'max_violation':>20}  witness"]
        for result in report.results:
            witness = ""
            if result.witness is not None:
                coords = [ReportFormatter.number(x) for x in result.witness]
                witness = f"({', '.join(coords[:2])})"
                if len(coords) == len(REPORT_CSV_HEADER) - 2:
                    witness += f" -> ({', '.join(coords[2:])})"
            lines.append(f"{result.family:<18} {ReportFormatter.number(result.max_violation):>20}  {witness}")
        verdict = "passed" if report.passed else "FAILED"
        lines.append(f"{report.mode} checks {verdict} (tol {ReportFormatter.number(report.tol)})")
        return lines

    @staticmethod
    def validation_lines(report: ValidationReport) -> list[str]:
        n = ReportFormatter.number
        lines = [
            f"family                          {report.family}",
            f"positivity failures             {report.positivity_failure_count}",
            f"joint normalization error       {n(report.joint_normalization_error)}",
            f"conditional normalization error {n(report.conditional_normalization_error)} (k={n(report.conditional_worst_k)})",
            f"marginal k error                {n(report.marginal_k_error)}",
            f"marginal v error                {n(report.marginal_v_error)}",
        ]
        lines.extend(f"note: {note}" for note in report.mesh_notes)
        lines.extend(f"non-positive density at v={n(v)}, k={n(k)}: {n(g)}" for v, k, g in report.positivity_failures)
        lines.append(f"Validation {'passed' if report.passed else 'FAILED'}")
        return lines

    @staticmethod
    def key_value_lines(values: dict[str, Any]) -> list[str]:
        width = max((len(key) for key in values), default=0)
        lines = []
        for key, value in values.items():
            text = ReportFormatter.number(value) if isinstance(value, (float, np.floating)) else str(value)
            lines.append(f"{key:<{width}}  {text}")
        return lines
