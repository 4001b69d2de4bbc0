"""mcp-audit command line interface.

Exit codes are fixed: 0 success, 1 fatal input error, 2 differences found
by ``diff``. Acquisition failures during a scan are warnings, not errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .aggregate import ExportVersionError, diff_runs
from .corpus import (
    DEFAULT_MAX_FILE_BYTES,
    DEFAULT_PRUNE_DIRS,
    ARCHIVE_DIR_NAME,
    ManifestError,
    PruneConfig,
    dedup_manifest,
    manifest_digest,
    parse_manifest,
)
from .detect import RawFallback, ScanPolicy, ScanStatus, scan_corpus
from .report import (
    ChartView,
    archive_run,
    emit_chart_csv,
    export_json,
    make_run,
    render_diff,
    render_markdown,
)
from .sigdb import SigDbError, builtin_db, dump_db, load_db, merge

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_DIFF_FOUND = 2


class _Parser(argparse.ArgumentParser):
    # Usage problems are fatal input errors; keep exit code 2 reserved for
    # "diff found differences".
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_FATAL)


@dataclass(frozen=True)
class RunConfig:
    manifest: Path
    workdir: Path | None = None
    db_paths: tuple[Path, ...] = ()
    out: Path = Path("mcp-audit-out")
    jobs: int = 0  # 0 means one per CPU
    prune: frozenset[str] | None = None
    max_file_bytes: int = DEFAULT_MAX_FILE_BYTES
    raw_fallback: RawFallback = RawFallback.ON_ERROR
    archive: bool = False
    archive_dir: str = ARCHIVE_DIR_NAME
    timestamp: str | None = None
    lenient: bool = False


def _fatal(message: str) -> int:
    sys.stderr.write(f"mcp-audit: error: {message}\n")
    return EXIT_FATAL


def cmd_scan(config: RunConfig) -> int:
    try:
        manifest_bytes = config.manifest.read_bytes()
    except OSError as exc:
        return _fatal(f"cannot read manifest: {exc}")
    try:
        records = parse_manifest(manifest_bytes, strict=not config.lenient)
    except ManifestError as exc:
        return _fatal(f"manifest: {exc}")

    kept, dropped = dedup_manifest(records)
    for record in dropped:
        sys.stderr.write(
            f"mcp-audit: note: dropping {record.id!r}, duplicate source {record.source!r}\n"
        )

    db = builtin_db()
    for path in config.db_paths:
        try:
            with open(path, "rb") as fh:
                overlay = load_db(fh, source=str(path))
        except OSError as exc:
            return _fatal(f"cannot read signature db: {exc}")
        except SigDbError as exc:
            return _fatal(f"signature db {path}: {exc}")
        db = merge(db, overlay)

    out = config.out
    workdir = config.workdir if config.workdir is not None else out / "work"
    jobs = config.jobs if config.jobs > 0 else (os.cpu_count() or 1)
    policy = ScanPolicy(jobs=jobs, raw_fallback=config.raw_fallback)
    prune = PruneConfig(
        prune_dirs=config.prune if config.prune is not None else DEFAULT_PRUNE_DIRS,
        max_file_bytes=config.max_file_bytes,
    )

    results = scan_corpus(
        kept,
        db,
        policy,
        workdir=workdir,
        prune=prune,
        base_dir=config.manifest.parent,
    )
    by_id = {record.id: record for record in kept}
    for result in results:
        if result.status is ScanStatus.UNACQUIRED:
            source = by_id[result.plugin_id].source
            sys.stderr.write(
                f"mcp-audit: warning: could not acquire {result.plugin_id!r} from {source!r}\n"
            )

    try:
        run = make_run(
            results,
            kept,
            db,
            manifest_digest(manifest_bytes),
            timestamp=config.timestamp,
            duplicates_dropped=len(dropped),
        )
    except ValueError as exc:
        return _fatal(str(exc))

    out.mkdir(parents=True, exist_ok=True)
    (out / "run.json").write_bytes(export_json(run))
    (out / "report.md").write_bytes(render_markdown(run).encode("utf-8"))
    (out / "fig2.csv").write_bytes(emit_chart_csv(run, ChartView.FIG2).encode("utf-8"))
    (out / "table2.csv").write_bytes(emit_chart_csv(run, ChartView.TABLE2).encode("utf-8"))
    (out / "table3.csv").write_bytes(emit_chart_csv(run, ChartView.TABLE3).encode("utf-8"))

    if config.archive:
        for result in results:
            if result.status is ScanStatus.SCANNED:
                archive_run(
                    run,
                    workdir / result.plugin_id,
                    result.plugin_id,
                    dir_name=config.archive_dir,
                )

    total = sum(len(r.findings) for r in results)
    print(f"scanned {len(results)} plugins, {total} findings, outputs in {out}")
    return EXIT_OK


def cmd_db(args: argparse.Namespace) -> int:
    if args.db_command == "print-builtin":
        sys.stdout.write(dump_db(builtin_db()))
        return EXIT_OK
    try:
        with open(args.file, "rb") as fh:
            db = load_db(fh, source=str(args.file))
    except OSError as exc:
        return _fatal(f"cannot read signature db: {exc}")
    except SigDbError as exc:
        return _fatal(f"signature db {args.file}: {exc}")
    print(f"{args.file}: ok ({len(db.signatures)} signatures, version {db.version})")
    return EXIT_OK


def cmd_diff(old_path: Path, new_path: Path) -> int:
    docs = []
    for path in (old_path, new_path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                docs.append(json.load(fh))
        except OSError as exc:
            return _fatal(f"cannot read export: {exc}")
        except json.JSONDecodeError as exc:
            return _fatal(f"export {path} is not valid JSON: {exc}")
    try:
        diff = diff_runs(docs[0], docs[1])
    except ExportVersionError as exc:
        return _fatal(str(exc))
    sys.stdout.write(render_diff(diff))
    return EXIT_OK if diff.is_empty else EXIT_DIFF_FOUND


def build_parser() -> _Parser:
    parser = _Parser(prog="mcp-audit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    scan = sub.add_parser("scan", help="scan a corpus manifest")
    scan.add_argument("--manifest", required=True, type=Path)
    scan.add_argument("--workdir", type=Path, default=None)
    scan.add_argument("--db", action="append", type=Path, default=[])
    scan.add_argument("--out", type=Path, default=Path("mcp-audit-out"))
    scan.add_argument("--jobs", type=int, default=0)
    scan.add_argument("--prune", type=str, default=None,
                      help="comma-separated directory names; replaces the default set")
    scan.add_argument("--max-file-bytes", type=int, default=DEFAULT_MAX_FILE_BYTES)
    scan.add_argument("--raw-fallback", choices=[m.value for m in RawFallback],
                      default=RawFallback.ON_ERROR.value)
    scan.add_argument("--archive", action="store_true")
    scan.add_argument("--archive-dir", type=str, default=ARCHIVE_DIR_NAME)
    scan.add_argument("--timestamp", type=str, default=None,
                      help="pin the run timestamp (RFC 3339) for reproducible output")
    scan.add_argument("--lenient", action="store_true",
                      help="ignore unknown manifest fields")

    db = sub.add_parser("db", help="signature database utilities")
    db_sub = db.add_subparsers(dest="db_command", required=True, parser_class=_Parser)
    validate = db_sub.add_parser("validate", help="validate a signature db file")
    validate.add_argument("file", type=Path)
    db_sub.add_parser("print-builtin", help="print the built-in db as JSON")

    diff = sub.add_parser("diff", help="diff two run exports")
    diff.add_argument("old", type=Path)
    diff.add_argument("new", type=Path)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "scan":
        prune = None
        if args.prune is not None:
            prune = frozenset(name for name in args.prune.split(",") if name)
        config = RunConfig(
            manifest=args.manifest,
            workdir=args.workdir,
            db_paths=tuple(args.db),
            out=args.out,
            jobs=args.jobs,
            prune=prune,
            max_file_bytes=args.max_file_bytes,
            raw_fallback=RawFallback(args.raw_fallback),
            archive=args.archive,
            archive_dir=args.archive_dir,
            timestamp=args.timestamp,
            lenient=args.lenient,
        )
        return cmd_scan(config)
    if args.command == "db":
        return cmd_db(args)
    return cmd_diff(args.old, args.new)


if __name__ == "__main__":
    sys.exit(main())
