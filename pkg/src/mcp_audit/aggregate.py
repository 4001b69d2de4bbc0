"""Aggregation of scan results and run-over-run diffing.

Three views over a finished run: servers affected per resource category
(distinct plugins with at least one finding), call counts broken down by
application category, and call counts broken down by repository star range.
Tables always carry every label of their dimension, zeros included, in a
fixed order. Table totals are row sums of the four category cells.
"""
from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable

from .corpus import ApplicationCategory, PluginRecord
from .detect import PluginScanResult, ScanStatus
from .sigdb import CATEGORY_ORDER, ResourceCategory

SCHEMA_VERSION = 1


class StarBucket(str, Enum):
    """Inclusive star ranges; 50000 still lands in '10001-50000'."""

    B0_10 = "0-10"
    B11_100 = "11-100"
    B101_1000 = "101-1000"
    B1001_10000 = "1001-10000"
    B10001_50000 = "10001-50000"
    B50000_PLUS = "50000+"


_BUCKET_UPPER_BOUNDS: tuple[tuple[StarBucket, int | None], ...] = (
    (StarBucket.B0_10, 10),
    (StarBucket.B11_100, 100),
    (StarBucket.B101_1000, 1000),
    (StarBucket.B1001_10000, 10000),
    (StarBucket.B10001_50000, 50000),
    (StarBucket.B50000_PLUS, None),
)


def bucket_for_stars(stars: int) -> StarBucket:
    if stars < 0:
        raise ValueError(f"stars must be non-negative, got {stars}")
    for bucket, upper in _BUCKET_UPPER_BOUNDS:
        if upper is None or stars <= upper:
            return bucket
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class ResourceCounts:
    file: int = 0
    memory: int = 0
    network: int = 0
    system: int = 0

    def get(self, category: ResourceCategory) -> int:
        return getattr(self, category.value.lower())

    @property
    def total(self) -> int:
        return self.file + self.memory + self.network + self.system


@dataclass(frozen=True)
class DimensionRow:
    label: str
    counts: ResourceCounts


class Dimension(str, Enum):
    CATEGORY = "category"
    STARS = "stars"


def servers_affected(results: Iterable[PluginScanResult]) -> dict[ResourceCategory, int]:
    """Distinct plugins with at least one finding, per resource category."""
    counts = {category: 0 for category in CATEGORY_ORDER}
    for result in results:
        for category in {finding.category for finding in result.findings}:
            counts[category] += 1
    return counts


def _counts_from(counter: Counter) -> ResourceCounts:
    return ResourceCounts(
        file=counter[ResourceCategory.FILE],
        memory=counter[ResourceCategory.MEMORY],
        network=counter[ResourceCategory.NETWORK],
        system=counter[ResourceCategory.SYSTEM],
    )


def calls_by_dimension(
    results: Iterable[PluginScanResult],
    records: Iterable[PluginRecord],
    dimension: Dimension,
) -> list[DimensionRow]:
    """Tally finding multiplicity per dimension label and resource category.

    Every label of the dimension appears exactly once, in enum order, even
    at zero. A result whose plugin_id has no manifest record is a
    consistency error.
    """
    by_id = {record.id: record for record in records}
    tallies: dict[str, Counter] = {}
    for result in results:
        record = by_id.get(result.plugin_id)
        if record is None:
            raise ValueError(f"scan result for unknown plugin {result.plugin_id!r}")
        if dimension is Dimension.CATEGORY:
            label = record.category.value
        else:
            label = bucket_for_stars(record.stars).value
        counter = tallies.setdefault(label, Counter())
        for finding in result.findings:
            counter[finding.category] += 1

    labels: Iterable[str]
    if dimension is Dimension.CATEGORY:
        labels = (category.value for category in ApplicationCategory)
    else:
        labels = (bucket.value for bucket in StarBucket)
    return [
        DimensionRow(label=label, counts=_counts_from(tallies.get(label, Counter())))
        for label in labels
    ]


@dataclass(frozen=True)
class AggregateReport:
    servers_affected: dict[ResourceCategory, int]
    calls_by_category: tuple[DimensionRow, ...]
    calls_by_stars: tuple[DimensionRow, ...]
    corpus_size: int
    unacquired: int


def build_aggregates(
    results: list[PluginScanResult], records: list[PluginRecord]
) -> AggregateReport:
    return AggregateReport(
        servers_affected=servers_affected(results),
        calls_by_category=tuple(calls_by_dimension(results, records, Dimension.CATEGORY)),
        calls_by_stars=tuple(calls_by_dimension(results, records, Dimension.STARS)),
        corpus_size=len(results),
        unacquired=sum(1 for r in results if r.status is ScanStatus.UNACQUIRED),
    )


# ---------------------------------------------------------------------------
# Run-over-run diff
# ---------------------------------------------------------------------------


class ExportVersionError(ValueError):
    """Export documents have an unsupported or mismatched schema version."""


@dataclass(frozen=True)
class FindingDelta:
    """One (file, signature, content) finding key with its occurrence delta."""

    file: str
    signature_id: str
    category: ResourceCategory
    matched_text: str
    count: int


@dataclass(frozen=True)
class PluginDiff:
    plugin_id: str
    added: tuple[FindingDelta, ...]
    removed: tuple[FindingDelta, ...]


@dataclass(frozen=True)
class DiffReport:
    plugins: tuple[PluginDiff, ...]
    category_deltas: dict[ResourceCategory, int]

    @property
    def is_empty(self) -> bool:
        return not self.plugins and not any(self.category_deltas.values())


def _finding_key(finding: dict[str, Any]) -> tuple[str, str, str]:
    # Line numbers are deliberately absent so pure line shifts do not churn.
    digest = hashlib.sha256(finding["matched_text"].encode("utf-8")).hexdigest()
    return (finding["file"], finding["signature_id"], digest)


def _plugin_finding_counters(doc: dict[str, Any]) -> dict[str, Counter]:
    per_plugin: dict[str, Counter] = {}
    for plugin in doc.get("plugins", []):
        counter = per_plugin.setdefault(plugin["plugin_id"], Counter())
        for finding in plugin.get("findings", []):
            counter[_finding_key(finding)] += 1
    return per_plugin


def _category_totals(doc: dict[str, Any]) -> Counter:
    totals: Counter = Counter()
    for plugin in doc.get("plugins", []):
        for finding in plugin.get("findings", []):
            totals[ResourceCategory(finding["category"])] += 1
    return totals


def _representatives(doc: dict[str, Any]) -> dict[tuple[str, str, str], dict[str, Any]]:
    reps: dict[tuple[str, str, str], dict[str, Any]] = {}
    for plugin in doc.get("plugins", []):
        for finding in plugin.get("findings", []):
            reps.setdefault(_finding_key(finding), finding)
    return reps


def diff_runs(previous: dict[str, Any], current: dict[str, Any]) -> DiffReport:
    """Diff two parsed export documents.

    Finding keys are (file, signature_id, sha256 of matched_text), counted
    as multisets per plugin. Raises ExportVersionError unless both documents
    carry the supported schema version.
    """
    for doc in (previous, current):
        if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
            raise ExportVersionError(
                f"unsupported schema_version {doc.get('schema_version')!r}, "
                f"expected {SCHEMA_VERSION}"
            )

    prev_counts = _plugin_finding_counters(previous)
    cur_counts = _plugin_finding_counters(current)
    reps = _representatives(previous)
    reps.update(_representatives(current))

    plugin_diffs: list[PluginDiff] = []
    for plugin_id in sorted(set(prev_counts) | set(cur_counts)):
        before = prev_counts.get(plugin_id, Counter())
        after = cur_counts.get(plugin_id, Counter())
        added = after - before
        removed = before - after
        if not added and not removed:
            continue

        def deltas(counter: Counter) -> tuple[FindingDelta, ...]:
            out = []
            for key in sorted(counter):
                rep = reps[key]
                out.append(
                    FindingDelta(
                        file=rep["file"],
                        signature_id=rep["signature_id"],
                        category=ResourceCategory(rep["category"]),
                        matched_text=rep["matched_text"],
                        count=counter[key],
                    )
                )
            return tuple(out)

        plugin_diffs.append(
            PluginDiff(plugin_id=plugin_id, added=deltas(added), removed=deltas(removed))
        )

    prev_totals = _category_totals(previous)
    cur_totals = _category_totals(current)
    category_deltas = {
        category: cur_totals[category] - prev_totals[category]
        for category in CATEGORY_ORDER
    }
    return DiffReport(plugins=tuple(plugin_diffs), category_deltas=category_deltas)
