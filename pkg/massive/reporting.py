"""
Report lines, text rendering and CSV emission shared by every command.

CSV files are comma-separated with a header row; floats are written in
scientific notation at the configured precision so repeated runs with the
same seed produce byte-identical files.
"""
import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

DEFAULT_PRECISION = 16
REPORT_FIELDS = ["module", "name", "value", "unit", "status", "note"]


@dataclass(frozen=True)
class ReportLine:
    """One budget or campaign figure with its owning module and gate verdict."""
    module: str
    name: str
    value: Any
    unit: str = ""
    ok: Optional[bool] = None
    note: str = ""

    @property
    def status(self) -> str:
        if self.ok is None:
            return "info"
        return "pass" if self.ok else "FAIL"


def format_value(value: Any, precision: int = DEFAULT_PRECISION) -> str:
    """Render a cell: floats as %.{p}e, bools as true/false, everything else as str."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, np.integer):
        value = int(value)
    elif isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.{precision}e}"
    return "" if value is None else str(value)


def _display_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.4g}"
    return format_value(value)


def render_text(title: str, lines: Sequence[ReportLine], notes: Iterable[str] = ()) -> str:
    """Fixed-width, human-readable report."""
    width = max([len(line.name) for line in lines] + [10])
    out = [title, "=" * len(title)]
    for line in lines:
        value = f"{_display_value(line.value)} {line.unit}".rstrip()
        row = f"{line.module:<16} {line.name:<{width}}  {value:<24} [{line.status}]"
        if line.note:
            row += f"  {line.note}"
        out.append(row.rstrip())
    notes = list(notes)
    if notes:
        out.append("")
        out.extend(f"note: {n}" for n in notes)
    return "\n".join(out) + "\n"


def report_rows(lines: Sequence[ReportLine]) -> List[Dict[str, Any]]:
    return [
        {
            "module": line.module,
            "name": line.name,
            "value": line.value,
            "unit": line.unit,
            "status": line.status,
            "note": line.note,
        }
        for line in lines
    ]


def csv_text(fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]], precision: int = DEFAULT_PRECISION) -> str:
    """Serialise rows to CSV text with every value passed through format_value."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(fieldnames), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: format_value(row.get(key), precision) for key in fieldnames})
    return buffer.getvalue()


def write_csv(
    path: Union[str, Path],
    fieldnames: Sequence[str],
    rows: Iterable[Dict[str, Any]],
    precision: int = DEFAULT_PRECISION,
) -> Path:
    """Write rows to ``path`` as CSV, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as csvfile:
        csvfile.write(csv_text(fieldnames, rows, precision))
    return path


def read_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(path, "r", newline="", encoding="utf-8") as csvfile:
        return list(csv.DictReader(csvfile))
