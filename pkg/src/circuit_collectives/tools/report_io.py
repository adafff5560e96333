"""
Versioned report tables and JSON input files.

Every report names a schema with a fixed column order. Floats are written with 9
significant digits so that the same inputs always produce byte-identical files.
"""

import csv
from dataclasses import dataclass, field
import io
import json
import math
from pathlib import Path
from typing import Any

from src.circuit_collectives.config.logging_config import get_logger
from src.circuit_collectives.config.sim_constants import (
    FLOAT_SIGNIFICANT_DIGITS,
    REPORT_SCHEMA_VERSION,
)
from src.circuit_collectives.error_management.exceptions import (
    ReportIOError,
    SchemaVersionError,
    ValidationError,
)
from src.circuit_collectives.error_management.validator import Validator

logger = get_logger("tools.report_io")

FORMAT_CSV = "csv"
FORMAT_JSON = "json"

SCHEMAS: dict[str, tuple[str, ...]] = {
    "benchmark": (
        "topology",
        "dims",
        "algorithm",
        "backend",
        "primitive",
        "n_ranks",
        "buffer_bytes",
        "reconf_delay_s",
        "total_s",
        "alpha_s",
        "beta_s",
        "reconf_s",
        "n_reconfigs",
    ),
    "endtoend": (
        "topology",
        "dims",
        "n_ranks",
        "backend",
        "reconf_delay_s",
        "makespan_s",
        "throughput",
        "n_reconfigs",
    ),
    "cost_breakdown": (
        "scenario",
        "round",
        "dilation",
        "congestion",
        "alpha_term_s",
        "beta_term_s",
        "reconf_s",
        "transfers",
        "size_bytes",
        "connected",
        "time_s",
    ),
    "plan": (
        "round",
        "choice",
        "kind",
        "reconfigured",
        "reconf_s",
        "dilation",
        "congestion",
        "comm_s",
    ),
    "fibers": ("request", "src", "dst", "hops", "path"),
    "routes": ("request", "src", "dst", "wavelength", "valid", "trials", "path"),
    "simulation": (
        "node",
        "kind",
        "tag",
        "algorithm",
        "start_s",
        "finish_s",
        "n_reconfigs",
    ),
}

# Trailing CSV column carrying the report version on every row
VERSION_COLUMN = "schema_version"

# JSON documents that name their row list differently and lift meta keys to the top level
ROWS_KEY: dict[str, str] = {"plan": "per_round"}
LIFTED_META: dict[str, tuple[str, ...]] = {"plan": ("choices", "reconfig_rounds", "total_s")}


@dataclass(frozen=True)
class Report:
    """Rows of one schema plus free-form run metadata."""

    schema: str
    rows: tuple[dict[str, Any], ...]
    meta: dict[str, Any] = field(default_factory=dict)
    version: int = REPORT_SCHEMA_VERSION

    def __post_init__(self) -> None:
        check_schema(self.schema, self.version)
        columns = SCHEMAS[self.schema]
        for index, row in enumerate(self.rows):
            missing = [column for column in columns if column not in row]
            extra = [key for key in row if key not in columns]
            if missing or extra:
                raise ValidationError(
                    f"row {index} does not match the {self.schema} columns",
                    field=f"rows[{index}]",
                    value=sorted(row),
                    context={"validation_type": "columns", "missing": missing, "extra": extra},
                )
        lifted = [key for key in LIFTED_META.get(self.schema, ()) if key not in self.meta]
        if lifted:
            raise ValidationError(
                f"{self.schema} report meta needs {', '.join(lifted)}",
                field="meta",
                value=sorted(self.meta),
                context={"validation_type": "missing_keys", "missing_keys": lifted},
            )

    @property
    def columns(self) -> tuple[str, ...]:
        return SCHEMAS[self.schema]


def csv_header(schema: str) -> tuple[str, ...]:
    return (*SCHEMAS[schema], VERSION_COLUMN)


def check_schema(schema: Any, version: Any) -> None:
    if schema not in SCHEMAS:
        raise SchemaVersionError(
            f"Unknown report schema: {schema}", schema=schema, version=version
        )
    if version != REPORT_SCHEMA_VERSION:
        raise SchemaVersionError(
            f"Unsupported {schema} report version: {version}", schema=schema, version=version
        )


def format_float(value: float) -> float:
    """Round to the report precision; non-finite values pass through."""
    if not math.isfinite(value):
        return value
    return float(f"{value:.{FLOAT_SIGNIFICANT_DIGITS}g}")


def _normalize(value: Any) -> Any:
    match value:
        case bool() | int() | str() | None:
            return value
        case float():
            return format_float(value)
        case dict():
            return {str(key): _normalize(item) for key, item in value.items()}
        case list() | tuple():
            return [_normalize(item) for item in value]
        case _:
            return str(value)


def _csv_cell(value: Any) -> str:
    match value:
        case bool():
            return "true" if value else "false"
        case None:
            return ""
        case float():
            return f"{value:.{FLOAT_SIGNIFICANT_DIGITS}g}"
        case list() | dict():
            return json.dumps(value, separators=(",", ":"))
        case _:
            return str(value)


def to_json(report: Report) -> str:
    meta = _normalize(report.meta)
    document: dict[str, Any] = {"schema": report.schema, "version": report.version}
    for key in LIFTED_META.get(report.schema, ()):
        document[key] = meta.pop(key)
    document["meta"] = meta
    document[ROWS_KEY.get(report.schema, "rows")] = [
        {column: _normalize(row[column]) for column in report.columns} for row in report.rows
    ]
    return json.dumps(document, indent=2) + "\n"


def to_csv(report: Report) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(csv_header(report.schema))
    for row in report.rows:
        cells = [_csv_cell(_normalize(row[column])) for column in report.columns]
        writer.writerow([*cells, report.version])
    return buffer.getvalue()


def render(report: Report, fmt: str = FORMAT_JSON) -> str:
    fmt = Validator.validate_choice(fmt, "format", [FORMAT_CSV, FORMAT_JSON])
    return to_csv(report) if fmt == FORMAT_CSV else to_json(report)


def emit(report: Report, fmt: str, path: str | Path) -> Path:
    """
    Write report to path in the requested format.

    Raises:
        ReportIOError: If the file cannot be written
    """
    text = render(report, fmt)
    target = Path(path)
    try:
        target.write_text(text, encoding="utf-8")
    except OSError as e:
        raise ReportIOError(
            f"Could not write {report.schema} report: {e.strerror or e}",
            path=str(target),
            operation="write",
        ) from e
    logger.info(
        "Report written",
        extra={"schema": report.schema, "path": str(target), "rows": len(report.rows)},
    )
    return target


def read_json(path: str | Path) -> Any:
    """
    Load a JSON input file.

    Raises:
        ReportIOError: If the file is unreadable or not valid JSON (with line and column)
    """
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as e:
        raise ReportIOError(
            f"Could not read {source}: {e.strerror or e}", path=str(source), operation="read"
        ) from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ReportIOError(
            f"Invalid JSON in {source} at line {e.lineno}, column {e.colno}: {e.msg}",
            path=str(source),
            operation="parse",
            context={"line": e.lineno, "column": e.colno},
        ) from e


def report_from_dict(data: Any) -> Report:
    data = Validator.validate_dict(data, "report", required_keys=["schema", "version"])
    check_schema(data["schema"], data["version"])
    rows_key = ROWS_KEY.get(data["schema"], "rows")
    lifted = LIFTED_META.get(data["schema"], ())
    data = Validator.validate_dict(data, "report", required_keys=[rows_key, *lifted])
    rows = tuple(
        Validator.validate_dict(row, f"{rows_key}[{index}]")
        for index, row in enumerate(Validator.validate_sequence(data[rows_key], rows_key))
    )
    meta = dict(Validator.validate_dict(data.get("meta", {}), "meta"))
    meta.update({key: data[key] for key in lifted})
    return Report(schema=data["schema"], rows=rows, meta=meta, version=data["version"])


def load_report(path: str | Path) -> Report:
    """
    Load a JSON report written by emit.

    Raises:
        ReportIOError: On unreadable or malformed files
        SchemaVersionError: On an unknown schema or version
    """
    return report_from_dict(read_json(path))


def load_csv_rows(path: str | Path, schema: str) -> list[dict[str, str]]:
    """
    Read a CSV report, checking its header and the version on every row.

    Returns the rows without the version column.

    Raises:
        ReportIOError: If the file is unreadable
        SchemaVersionError: If the header does not match the schema or a row carries
            another version
    """
    check_schema(schema, REPORT_SCHEMA_VERSION)
    source = Path(path)
    try:
        with source.open(encoding="utf-8", newline="") as handle:
            reader = csv.DictReader(handle)
            rows = list(reader)
            header = tuple(reader.fieldnames or ())
    except OSError as e:
        raise ReportIOError(
            f"Could not read {source}: {e.strerror or e}", path=str(source), operation="read"
        ) from e
    if header != csv_header(schema):
        raise SchemaVersionError(
            f"CSV header of {source} does not match the {schema} schema",
            schema=schema,
            version=REPORT_SCHEMA_VERSION,
            context={"header": list(header)},
        )
    for index, row in enumerate(rows):
        version = row.pop(VERSION_COLUMN)
        if version != str(REPORT_SCHEMA_VERSION):
            raise SchemaVersionError(
                f"Unsupported {schema} report version in {source}: {version}",
                schema=schema,
                version=version,
                context={"row": index},
            )
    return rows
