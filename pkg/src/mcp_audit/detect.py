"""Matching call sites against signatures and scanning plugins end to end.

Matching is by whole trailing segments: a pattern matches a site when the
pattern's segments equal the site's last k segments. ``socket.bind`` thus
matches ``socket.bind(...)`` and ``server.socket.bind(...)`` but never
``mysocket.bind(...)``; the bare pattern ``open`` matches ``io.open(...)``.
No import resolution, aliasing, or dataflow is attempted.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .corpus import (
    AcquisitionError,
    NormalizedTree,
    PluginRecord,
    PruneConfig,
    acquire,
    normalize_tree,
)
from .lexscan import (
    CallSite,
    LanguageFamily,
    LexError,
    ScanMode,
    SiteKind,
    identify_language,
    lex_call_sites,
    raw_scan,
)
from .sigdb import ResourceCategory, Signature, SignatureDb, SignatureKind


class RawFallback(str, Enum):
    OFF = "off"
    ON_ERROR = "on-error"
    ALL = "all"


class ScanStatus(str, Enum):
    SCANNED = "SCANNED"
    UNACQUIRED = "UNACQUIRED"


@dataclass(frozen=True)
class ScanPolicy:
    jobs: int = 1
    raw_fallback: RawFallback = RawFallback.ON_ERROR


@dataclass(frozen=True)
class Finding:
    plugin_id: str
    file: str
    line: int
    column: int
    signature_id: str
    category: ResourceCategory
    matched_text: str
    mode: ScanMode


@dataclass(frozen=True)
class PluginScanResult:
    plugin_id: str
    status: ScanStatus
    findings: tuple[Finding, ...]
    files_scanned: int
    files_skipped: int
    lexer_fallbacks: int


_FAMILY_LANG = {
    LanguageFamily.PYTHON: "python",
    LanguageFamily.C_FAMILY: "c-family",
}

_KIND_FOR_SITE = {
    SiteKind.CALL: SignatureKind.CALL,
    SiteKind.IMPORT: SignatureKind.IMPORT,
}


def _applies_to(sig: Signature, family: LanguageFamily) -> bool:
    if "*" in sig.languages:
        return True
    lang = _FAMILY_LANG.get(family)
    return lang is not None and lang in sig.languages


def match_site(site: CallSite, db: SignatureDb, family: LanguageFamily) -> list[Signature]:
    """Return the signatures matching one site, sorted by signature id."""
    wanted_kind = _KIND_FOR_SITE[site.kind]
    matches = []
    for sig in db.signatures:
        if sig.kind is not wanted_kind or not _applies_to(sig, family):
            continue
        pattern_segments = sig.segments
        k = len(pattern_segments)
        if k <= len(site.segments) and site.segments[-k:] == pattern_segments:
            matches.append(sig)
    matches.sort(key=lambda s: s.id)
    return matches


def _raw_patterns(db: SignatureDb, family: LanguageFamily) -> list[str]:
    # RAW mode can only look for call parens, so import signatures drop out.
    return [
        sig.pattern
        for sig in db.signatures
        if sig.kind is SignatureKind.CALL and _applies_to(sig, family)
    ]


def scan_plugin(
    record: PluginRecord,
    tree: NormalizedTree,
    db: SignatureDb,
    policy: ScanPolicy,
) -> PluginScanResult:
    """Scan one normalized working tree and return its deduplicated findings.

    Files already skipped by normalization count as skipped here too, as do
    UNKNOWN-language files (unless raw fallback is ``all``) and files whose
    lexer failed with fallback ``off``.
    """
    root = Path(tree.root)
    findings: dict[tuple[str, int, int, str], Finding] = {}
    files_scanned = 0
    files_skipped = len(tree.skipped)
    lexer_fallbacks = 0

    for entry in tree.files:
        family = identify_language(entry.path)
        if family is LanguageFamily.UNKNOWN and policy.raw_fallback is not RawFallback.ALL:
            files_skipped += 1
            continue
        try:
            with open(root / entry.path, "r", encoding="utf-8", newline="") as fh:
                content = fh.read()
        except (OSError, UnicodeDecodeError):
            files_skipped += 1
            continue

        if family is LanguageFamily.UNKNOWN:
            sites = raw_scan(content, _raw_patterns(db, family))
            mode = ScanMode.RAW
        else:
            try:
                sites = lex_call_sites(content, family)
                mode = ScanMode.LEXICAL
            except LexError:
                if policy.raw_fallback is RawFallback.OFF:
                    files_skipped += 1
                    continue
                lexer_fallbacks += 1
                sites = raw_scan(content, _raw_patterns(db, family))
                mode = ScanMode.RAW

        files_scanned += 1
        for site in sites:
            for sig in match_site(site, db, family):
                key = (entry.path, site.line, site.column, sig.id)
                if key not in findings:
                    findings[key] = Finding(
                        plugin_id=record.id,
                        file=entry.path,
                        line=site.line,
                        column=site.column,
                        signature_id=sig.id,
                        category=sig.category,
                        matched_text=site.raw_text,
                        mode=mode,
                    )

    ordered = sorted(
        findings.values(), key=lambda f: (f.file, f.line, f.column, f.signature_id)
    )
    return PluginScanResult(
        plugin_id=record.id,
        status=ScanStatus.SCANNED,
        findings=tuple(ordered),
        files_scanned=files_scanned,
        files_skipped=files_skipped,
        lexer_fallbacks=lexer_fallbacks,
    )


def scan_corpus(
    records: list[PluginRecord],
    db: SignatureDb,
    policy: ScanPolicy,
    *,
    workdir: str | Path,
    prune: PruneConfig | None = None,
    base_dir: str | Path | None = None,
) -> list[PluginScanResult]:
    """Acquire, normalize, and scan every record; results in manifest order.

    Acquisition failures produce UNACQUIRED results and the run continues.
    With ``jobs > 1`` plugins are scanned concurrently; results are identical
    to a sequential run.
    """

    def scan_one(record: PluginRecord) -> PluginScanResult:
        try:
            root = acquire(record, workdir, base_dir=base_dir)
        except AcquisitionError:
            return PluginScanResult(
                plugin_id=record.id,
                status=ScanStatus.UNACQUIRED,
                findings=(),
                files_scanned=0,
                files_skipped=0,
                lexer_fallbacks=0,
            )
        tree = normalize_tree(root, prune)
        return scan_plugin(record, tree, db, policy)

    if policy.jobs <= 1:
        return [scan_one(record) for record in records]
    with ThreadPoolExecutor(max_workers=policy.jobs) as pool:
        return list(pool.map(scan_one, records))
