"""Run export, reporting, and per-plugin archives.

The canonical export is JSON with sorted object keys, two-space indentation,
LF line endings, UTF-8, and a trailing newline; array orders are fixed by
the producing modules (findings by position, plugins by manifest order).
Exports embed the active signature table so findings can be re-checked
without the original database files.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any

from .aggregate import (
    SCHEMA_VERSION,
    AggregateReport,
    DiffReport,
    DimensionRow,
    ExportVersionError,
    ResourceCounts,
    build_aggregates,
)
from .corpus import ARCHIVE_DIR_NAME, PluginRecord
from .detect import Finding, PluginScanResult, ScanStatus
from .lexscan import ScanMode
from .sigdb import (
    CATEGORY_ORDER,
    ResourceCategory,
    Signature,
    SignatureDb,
    SignatureKind,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunExport:
    schema_version: int
    run_id: str
    timestamp: str
    manifest_digest: str
    db_provenance: tuple[tuple[str, int], ...]
    signatures: tuple[Signature, ...]
    duplicates_dropped: int
    plugins: tuple[PluginScanResult, ...]
    aggregates: AggregateReport


def utc_now_rfc3339() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def validate_rfc3339(value: str) -> str:
    """Return the value unchanged if it parses as an RFC 3339 timestamp."""
    candidate = value[:-1] + "+00:00" if value.endswith("Z") else value
    try:
        datetime.fromisoformat(candidate)
    except ValueError:
        raise ValueError(f"not an RFC 3339 timestamp: {value!r}") from None
    return value


def _run_id(manifest_digest: str, timestamp: str, db: SignatureDb) -> str:
    material = "|".join((manifest_digest, timestamp, ",".join(db.ids())))
    return hashlib.sha256(material.encode("utf-8")).hexdigest()[:16]


def make_run(
    results: list[PluginScanResult],
    records: list[PluginRecord],
    db: SignatureDb,
    manifest_digest: str,
    timestamp: str | None = None,
    duplicates_dropped: int = 0,
) -> RunExport:
    """Assemble a run export; a pinned timestamp makes the run id reproducible."""
    ts = validate_rfc3339(timestamp) if timestamp else utc_now_rfc3339()
    return RunExport(
        schema_version=SCHEMA_VERSION,
        run_id=_run_id(manifest_digest, ts, db),
        timestamp=ts,
        manifest_digest=manifest_digest,
        db_provenance=db.provenance,
        signatures=db.signatures,
        duplicates_dropped=duplicates_dropped,
        plugins=tuple(results),
        aggregates=build_aggregates(results, records),
    )


# ---------------------------------------------------------------------------
# JSON export and parse
# ---------------------------------------------------------------------------


def _row_to_doc(row: DimensionRow) -> dict[str, Any]:
    return {
        "label": row.label,
        "file": row.counts.file,
        "memory": row.counts.memory,
        "network": row.counts.network,
        "system": row.counts.system,
        "total": row.counts.total,
    }


def _run_to_doc(run: RunExport) -> dict[str, Any]:
    return {
        "schema_version": run.schema_version,
        "run_id": run.run_id,
        "timestamp": run.timestamp,
        "manifest_digest": run.manifest_digest,
        "db_provenance": [{"source": s, "count": c} for s, c in run.db_provenance],
        "signatures": [
            {
                "id": sig.id,
                "category": sig.category.value,
                "pattern": sig.pattern,
                "kind": sig.kind.value,
                "languages": list(sig.languages),
                "risk": sig.risk,
            }
            for sig in run.signatures
        ],
        "duplicates_dropped": run.duplicates_dropped,
        "plugins": [
            {
                "plugin_id": result.plugin_id,
                "status": result.status.value,
                "files_scanned": result.files_scanned,
                "files_skipped": result.files_skipped,
                "lexer_fallbacks": result.lexer_fallbacks,
                "findings": [
                    {
                        "plugin_id": f.plugin_id,
                        "file": f.file,
                        "line": f.line,
                        "column": f.column,
                        "signature_id": f.signature_id,
                        "category": f.category.value,
                        "matched_text": f.matched_text,
                        "mode": f.mode.value,
                    }
                    for f in result.findings
                ],
            }
            for result in run.plugins
        ],
        "aggregates": {
            "servers_affected": {
                category.value: run.aggregates.servers_affected.get(category, 0)
                for category in CATEGORY_ORDER
            },
            "calls_by_category": [_row_to_doc(r) for r in run.aggregates.calls_by_category],
            "calls_by_stars": [_row_to_doc(r) for r in run.aggregates.calls_by_stars],
            "corpus_size": run.aggregates.corpus_size,
            "unacquired": run.aggregates.unacquired,
        },
    }


def export_json(run: RunExport, pinned_timestamp: str | None = None) -> bytes:
    """Serialize a run to canonical JSON bytes.

    A pinned timestamp overrides the run's own and re-derives the run id, so
    repeated exports with the same pin are byte-identical.
    """
    if pinned_timestamp is not None:
        ts = validate_rfc3339(pinned_timestamp)
        run = replace(
            run,
            timestamp=ts,
            run_id=_run_id(
                run.manifest_digest,
                ts,
                SignatureDb(version=1, signatures=run.signatures),
            ),
        )
    doc = _run_to_doc(run)
    text = json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def _row_from_doc(obj: dict[str, Any]) -> DimensionRow:
    return DimensionRow(
        label=obj["label"],
        counts=ResourceCounts(
            file=obj["file"],
            memory=obj["memory"],
            network=obj["network"],
            system=obj["system"],
        ),
    )


def parse_export(data: bytes | str) -> RunExport:
    """Parse canonical export JSON back into a RunExport, full fidelity.

    Raises ExportVersionError for any schema version this code does not
    write, and ValueError for structurally broken documents.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    doc = json.loads(data)
    if not isinstance(doc, dict):
        raise ValueError("export document must be a JSON object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ExportVersionError(
            f"unsupported schema_version {doc.get('schema_version')!r}, "
            f"expected {SCHEMA_VERSION}"
        )
    signatures = tuple(
        Signature(
            id=obj["id"],
            category=ResourceCategory(obj["category"]),
            pattern=obj["pattern"],
            kind=SignatureKind(obj["kind"]),
            languages=tuple(obj["languages"]),
            risk=obj["risk"],
        )
        for obj in doc["signatures"]
    )
    plugins = tuple(
        PluginScanResult(
            plugin_id=obj["plugin_id"],
            status=ScanStatus(obj["status"]),
            findings=tuple(
                Finding(
                    plugin_id=f["plugin_id"],
                    file=f["file"],
                    line=f["line"],
                    column=f["column"],
                    signature_id=f["signature_id"],
                    category=ResourceCategory(f["category"]),
                    matched_text=f["matched_text"],
                    mode=ScanMode(f["mode"]),
                )
                for f in obj["findings"]
            ),
            files_scanned=obj["files_scanned"],
            files_skipped=obj["files_skipped"],
            lexer_fallbacks=obj["lexer_fallbacks"],
        )
        for obj in doc["plugins"]
    )
    agg = doc["aggregates"]
    aggregates = AggregateReport(
        servers_affected={
            ResourceCategory(k): v for k, v in agg["servers_affected"].items()
        },
        calls_by_category=tuple(_row_from_doc(r) for r in agg["calls_by_category"]),
        calls_by_stars=tuple(_row_from_doc(r) for r in agg["calls_by_stars"]),
        corpus_size=agg["corpus_size"],
        unacquired=agg["unacquired"],
    )
    return RunExport(
        schema_version=doc["schema_version"],
        run_id=doc["run_id"],
        timestamp=doc["timestamp"],
        manifest_digest=doc["manifest_digest"],
        db_provenance=tuple((p["source"], p["count"]) for p in doc["db_provenance"]),
        signatures=signatures,
        duplicates_dropped=doc["duplicates_dropped"],
        plugins=plugins,
        aggregates=aggregates,
    )


# ---------------------------------------------------------------------------
# Markdown
# ---------------------------------------------------------------------------


def _dimension_table(title_column: str, rows: tuple[DimensionRow, ...]) -> list[str]:
    lines = [
        f"| {title_column} | FILE | MEMORY | NETWORK | SYSTEM | Total |",
        "| --- | ---: | ---: | ---: | ---: | ---: |",
    ]
    for row in rows:
        c = row.counts
        lines.append(
            f"| {row.label} | {c.file} | {c.memory} | {c.network} | {c.system} | {c.total} |"
        )
    return lines


def render_markdown(run: RunExport) -> str:
    """Render the full Markdown report; sections in fixed order."""
    low_specificity = {sig.id for sig in run.signatures if sig.low_specificity}
    total_findings = sum(len(p.findings) for p in run.plugins)

    lines: list[str] = []
    lines.append("# Audit Report")
    lines.append("")
    lines.append("## Run Summary")
    lines.append("")
    lines.append(f"- Run id: `{run.run_id}`")
    lines.append(f"- Timestamp: {run.timestamp}")
    lines.append(f"- Manifest digest: `{run.manifest_digest}`")
    lines.append(f"- Corpus size: {run.aggregates.corpus_size}")
    lines.append(f"- Unacquired: {run.aggregates.unacquired}")
    lines.append(f"- Duplicates dropped: {run.duplicates_dropped}")
    lines.append(f"- Total findings: {total_findings}")
    db_sources = ", ".join(f"{source} ({count})" for source, count in run.db_provenance)
    lines.append(f"- Signature sources: {db_sources}")
    lines.append("")

    lines.append("## Threat Type Distribution")
    lines.append("")
    lines.append("| Category | Servers Affected |")
    lines.append("| --- | ---: |")
    for category in CATEGORY_ORDER:
        lines.append(
            f"| {category.value} | {run.aggregates.servers_affected.get(category, 0)} |"
        )
    lines.append("")

    lines.append("## API Calls by Application Category")
    lines.append("")
    lines.extend(_dimension_table("Application Category", run.aggregates.calls_by_category))
    lines.append("")

    lines.append("## API Calls by Star Range")
    lines.append("")
    lines.extend(_dimension_table("Star Range", run.aggregates.calls_by_stars))
    lines.append("")

    lines.append("## Per-Plugin Findings")
    lines.append("")
    for result in run.plugins:
        lines.append(f"### {result.plugin_id}")
        lines.append("")
        if result.status is ScanStatus.UNACQUIRED:
            lines.append("Unacquired; not scanned.")
            lines.append("")
            continue
        lines.append(
            f"Files scanned: {result.files_scanned}, skipped: {result.files_skipped}, "
            f"lexer fallbacks: {result.lexer_fallbacks}"
        )
        lines.append("")
        if not result.findings:
            lines.append("No findings.")
            lines.append("")
            continue
        lines.append("| Location | Signature | Category | Matched | Mode |")
        lines.append("| --- | --- | --- | --- | --- |")
        for f in result.findings:
            sig_cell = f.signature_id
            if f.signature_id in low_specificity:
                sig_cell += " (low-specificity)"
            lines.append(
                f"| {f.file}:{f.line}:{f.column} | {sig_cell} | {f.category.value} "
                f"| `{f.matched_text}` | {f.mode.value} |"
            )
        lines.append("")

    return "\n".join(lines).rstrip("\n") + "\n"


# ---------------------------------------------------------------------------
# CSV charts
# ---------------------------------------------------------------------------


class ChartView(str, Enum):
    FIG2 = "fig2"
    TABLE2 = "table2"
    TABLE3 = "table3"


def emit_chart_csv(run: RunExport, view: ChartView) -> str:
    """Emit one chart dataset as CSV text with LF endings.

    Labels in the closed sets contain no commas or quotes, so no CSV
    escaping is applied.
    """
    if view is ChartView.FIG2:
        lines = ["category,servers_affected"]
        for category in CATEGORY_ORDER:
            lines.append(f"{category.value},{run.aggregates.servers_affected.get(category, 0)}")
    elif view is ChartView.TABLE2:
        lines = ["app_category,file,memory,network,system,total"]
        for row in run.aggregates.calls_by_category:
            c = row.counts
            lines.append(f"{row.label},{c.file},{c.memory},{c.network},{c.system},{c.total}")
    else:
        lines = ["star_range,file,memory,network,system,total"]
        for row in run.aggregates.calls_by_stars:
            c = row.counts
            lines.append(f"{row.label},{c.file},{c.memory},{c.network},{c.system},{c.total}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Archives
# ---------------------------------------------------------------------------


def archive_run(
    run: RunExport,
    plugin_root: str | Path,
    plugin_id: str | None = None,
    dir_name: str = ARCHIVE_DIR_NAME,
) -> Path | None:
    """Write one plugin's slice of the export into its working tree.

    The slice keeps run-level metadata and aggregates but restricts
    ``plugins`` to the one entry, and lands at
    ``<plugin_root>/<dir_name>/run-<run_id>.json``. Prior archives are left
    in place. An unwritable tree logs a warning and returns None.
    """
    root = Path(plugin_root)
    if plugin_id is None:
        plugin_id = root.name
    slice_plugins = tuple(p for p in run.plugins if p.plugin_id == plugin_id)
    if not slice_plugins:
        raise ValueError(f"run contains no plugin {plugin_id!r}")
    slice_run = replace(run, plugins=slice_plugins)
    archive_dir = root / dir_name
    try:
        archive_dir.mkdir(parents=True, exist_ok=True)
        path = archive_dir / f"run-{run.run_id}.json"
        path.write_bytes(export_json(slice_run))
    except OSError as exc:
        logger.warning("cannot archive run for %s: %s", plugin_id, exc)
        return None
    return path


# ---------------------------------------------------------------------------
# Diff rendering
# ---------------------------------------------------------------------------


def render_diff(diff: DiffReport) -> str:
    """Render a DiffReport as human-readable Markdown."""
    lines: list[str] = ["# Run Diff", ""]
    if diff.is_empty:
        lines.append("No changes.")
        return "\n".join(lines) + "\n"

    lines.append("## Category Deltas")
    lines.append("")
    for category in CATEGORY_ORDER:
        delta = diff.category_deltas.get(category, 0)
        lines.append(f"- {category.value}: {delta:+d}")
    lines.append("")
    for plugin in diff.plugins:
        lines.append(f"## {plugin.plugin_id}")
        lines.append("")
        for label, deltas in (("Added", plugin.added), ("Removed", plugin.removed)):
            if not deltas:
                continue
            lines.append(f"{label}:")
            for d in deltas:
                lines.append(
                    f"- {d.file}: {d.signature_id} ({d.category.value}) "
                    f"`{d.matched_text}` x{d.count}"
                )
            lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"
