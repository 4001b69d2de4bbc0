"""Shared test utilities: seeded program generators and independent oracles.

The generators build programs line by line and record, while composing each
line, every call or import site the lexer is expected to report (kind,
segments, line, column). Positions come from prefix lengths at construction
time, never from searching the finished text, so the expectation is exact.
"""
from __future__ import annotations

import json
import random
from pathlib import Path

from mcp_audit.detect import Finding, PluginScanResult, ScanStatus
from mcp_audit.corpus import ApplicationCategory, PluginRecord
from mcp_audit.lexscan import ScanMode, SiteKind, lex_call_sites
from mcp_audit.sigdb import ResourceCategory

Expected = tuple[SiteKind, tuple[str, ...], int, int]

PATTERN_POOL = [
    "os.system",
    "subprocess.call",
    "socket.bind",
    "dns.resolver.query",
    "open",
    "strcpy",
    "shutil.copy",
    "requests.post",
]
JUNK_CALLS = ["helper", "build_index", "merge_rows", "compute_totals"]
VARS = ["v0", "v1", "cfg", "result", "payload"]
ARGS = ["x", "cfg", "42", "name"]
COMMENT_WORDS = ["todo", "note", "legacy", "cleanup"]


def _segments(callee: str) -> tuple[str, ...]:
    return tuple(callee.split("."))


# ---------------------------------------------------------------------------
# Python program generator
# ---------------------------------------------------------------------------


def gen_python_program(rng: random.Random, n_elements: int = 12) -> tuple[str, list[Expected]]:
    lines: list[str] = []
    expected: list[Expected] = []

    def line_no() -> int:
        return len(lines) + 1

    def emit_code_call() -> None:
        indent = rng.choice(["", "    "])
        callee = rng.choice(PATTERN_POOL + JUNK_CALLS)
        prefix = f"{indent}{rng.choice(VARS)} = "
        expected.append((SiteKind.CALL, _segments(callee), line_no(), len(prefix) + 1))
        lines.append(f"{prefix}{callee}({rng.choice(ARGS)})")

    def emit_bare_call() -> None:
        indent = rng.choice(["", "    "])
        callee = rng.choice(PATTERN_POOL + JUNK_CALLS)
        gap = rng.choice(["", " "])
        expected.append((SiteKind.CALL, _segments(callee), line_no(), len(indent) + 1))
        lines.append(f"{indent}{callee}{gap}({rng.choice(ARGS)})")

    def emit_comment_call() -> None:
        callee = rng.choice(PATTERN_POOL)
        lines.append(f"# {rng.choice(COMMENT_WORDS)} {callee}({rng.choice(ARGS)})")

    def emit_trailing_comment_call() -> None:
        callee = rng.choice(PATTERN_POOL)
        lines.append(f"{rng.choice(VARS)} = 7  # {callee}({rng.choice(ARGS)})")

    def emit_string_call() -> None:
        callee = rng.choice(PATTERN_POOL)
        quote = rng.choice(["'", '"'])
        lines.append(f"{rng.choice(VARS)} = {quote}{callee}({rng.choice(ARGS)}){quote}")

    def emit_fstring_call() -> None:
        callee = rng.choice(PATTERN_POOL)
        lines.append(f'{rng.choice(VARS)} = f"run {{{callee}({rng.choice(ARGS)})}}"')

    def emit_triple_block() -> None:
        callee = rng.choice(PATTERN_POOL)
        lines.append(f'{rng.choice(VARS)} = """')
        lines.append(f"{callee}({rng.choice(ARGS)})")
        lines.append('"""')

    def emit_raw_string_call() -> None:
        callee = rng.choice(PATTERN_POOL)
        prefix = rng.choice(["r", "rb", "f", "b"])
        lines.append(f"{rng.choice(VARS)} = {prefix}'{callee}({rng.choice(ARGS)})'")

    def emit_import() -> None:
        module = rng.choice(["os.path", "json", "socket", "hashlib"])
        expected.append((SiteKind.IMPORT, _segments(module), line_no(), 8))
        lines.append(f"import {module}")

    def emit_from_import() -> None:
        module, names = rng.choice(
            [("os.path", "join"), ("dns.resolver", "query"), ("collections", "Counter")]
        )
        expected.append((SiteKind.IMPORT, _segments(module), line_no(), 6))
        lines.append(f"from {module} import {names}")

    def emit_junk() -> None:
        lines.append(f"{rng.choice(VARS)} = {rng.randint(0, 99)} + {rng.randint(0, 99)}")

    emitters = [
        emit_code_call,
        emit_code_call,
        emit_bare_call,
        emit_comment_call,
        emit_trailing_comment_call,
        emit_string_call,
        emit_fstring_call,
        emit_triple_block,
        emit_raw_string_call,
        emit_import,
        emit_from_import,
        emit_junk,
    ]
    for _ in range(n_elements):
        rng.choice(emitters)()
    return "\n".join(lines) + "\n", expected


# ---------------------------------------------------------------------------
# C-family program generator
# ---------------------------------------------------------------------------


def gen_c_program(rng: random.Random, n_elements: int = 12) -> tuple[str, list[Expected]]:
    lines: list[str] = []
    expected: list[Expected] = []

    def line_no() -> int:
        return len(lines) + 1

    def emit_stmt_call() -> None:
        callee = rng.choice(PATTERN_POOL + JUNK_CALLS)
        prefix = f"    int {rng.choice(VARS)} = "
        expected.append((SiteKind.CALL, _segments(callee), line_no(), len(prefix) + 1))
        lines.append(f"{prefix}{callee}({rng.choice(ARGS)});")

    def emit_bare_call() -> None:
        callee = rng.choice(PATTERN_POOL + JUNK_CALLS)
        expected.append((SiteKind.CALL, _segments(callee), line_no(), 5))
        lines.append(f"    {callee}({rng.choice(ARGS)});")

    def emit_method_call() -> None:
        receiver = rng.choice(VARS)
        callee = rng.choice(["connect", "bind", "send_all"])
        prefix = "    "
        expected.append(
            (SiteKind.CALL, (receiver, callee), line_no(), len(prefix) + 1)
        )
        lines.append(f"{prefix}{receiver}.{callee}({rng.choice(ARGS)});")

    def emit_arrow_call() -> None:
        receiver = rng.choice(VARS)
        callee = rng.choice(["connect", "post", "dispatch"])
        prefix = f"    {receiver}->"
        expected.append((SiteKind.CALL, (callee,), line_no(), len(prefix) + 1))
        lines.append(f"{prefix}{callee}({rng.choice(ARGS)});")

    def emit_line_comment_call() -> None:
        callee = rng.choice(PATTERN_POOL)
        lines.append(f"    // {rng.choice(COMMENT_WORDS)} {callee}({rng.choice(ARGS)})")

    def emit_inline_block_comment() -> None:
        callee = rng.choice(PATTERN_POOL)
        lines.append(f"    {rng.choice(VARS)} = 3; /* {callee}({rng.choice(ARGS)}) */")

    def emit_multiline_block_comment() -> None:
        callee = rng.choice(PATTERN_POOL)
        lines.append("    /*")
        lines.append(f"     * {callee}({rng.choice(ARGS)})")
        lines.append("     */")

    def emit_string_call() -> None:
        callee = rng.choice(PATTERN_POOL)
        lines.append(f'    const char *{rng.choice(VARS)} = "{callee}({rng.choice(ARGS)})";')

    def emit_template_call() -> None:
        callee = rng.choice(PATTERN_POOL)
        lines.append(f"    const {rng.choice(VARS)} = `{callee}(${{{rng.choice(ARGS)}}})`;")

    def emit_junk() -> None:
        lines.append(f"    {rng.choice(VARS)} = {rng.randint(0, 99)};")

    emitters = [
        emit_stmt_call,
        emit_stmt_call,
        emit_bare_call,
        emit_method_call,
        emit_arrow_call,
        emit_line_comment_call,
        emit_inline_block_comment,
        emit_multiline_block_comment,
        emit_string_call,
        emit_template_call,
        emit_junk,
    ]
    for _ in range(n_elements):
        rng.choice(emitters)()
    return "\n".join(lines) + "\n", expected


def assert_lex_matches(source: str, family, expected: list[Expected]) -> None:
    sites = lex_call_sites(source, family)
    got = [(s.kind, s.segments, s.line, s.column) for s in sites]
    assert got == expected
    text_lines = source.split("\n")
    for site in sites:
        row = text_lines[site.line - 1]
        assert row[site.column - 1 : site.column - 1 + len(site.raw_text)] == site.raw_text


# ---------------------------------------------------------------------------
# Benign one-liners for mode equivalence
# ---------------------------------------------------------------------------


def gen_benign_line(rng: random.Random) -> tuple[str, list[str]]:
    """One comment-free, string-free line; returns (line, planted chain texts)."""
    n_calls = rng.randint(1, 3)
    planted: list[str] = []
    pieces: list[str] = []
    for _ in range(n_calls):
        callee = rng.choice(PATTERN_POOL + JUNK_CALLS)
        gap = rng.choice(["", " ", "  "])
        pieces.append(f"{callee}{gap}({rng.choice(ARGS)})")
        planted.append(callee)
    line = f"{rng.choice(VARS)} = " + " + ".join(pieces)
    if rng.random() < 0.3:
        line += f" + {rng.randint(0, 9)}"
    return line, sorted(set(planted))


# ---------------------------------------------------------------------------
# Independent aggregation oracles
# ---------------------------------------------------------------------------


def brute_servers_affected(results) -> dict[ResourceCategory, int]:
    return {
        category: sum(
            1 for r in results if any(f.category is category for f in r.findings)
        )
        for category in ResourceCategory
    }


def brute_dimension_tally(results, records, label_of) -> dict[str, dict[ResourceCategory, int]]:
    by_id = {r.id: r for r in records}
    out: dict[str, dict[ResourceCategory, int]] = {}
    for result in results:
        label = label_of(by_id[result.plugin_id])
        cell = out.setdefault(label, {c: 0 for c in ResourceCategory})
        for finding in result.findings:
            cell[finding.category] += 1
    return out


# ---------------------------------------------------------------------------
# Factories
# ---------------------------------------------------------------------------


def make_record(
    plugin_id: str,
    category: ApplicationCategory = ApplicationCategory.DEVELOPER_TOOLS,
    stars: int = 1,
    source: str | None = None,
) -> PluginRecord:
    return PluginRecord(
        id=plugin_id,
        name=plugin_id,
        source=source if source is not None else f"./{plugin_id}",
        category=category,
        stars=stars,
    )


def make_finding(
    plugin_id: str,
    category: ResourceCategory,
    file: str = "a.py",
    line: int = 1,
    column: int = 1,
    signature_id: str = "sig.x",
    matched_text: str = "x",
) -> Finding:
    return Finding(
        plugin_id=plugin_id,
        file=file,
        line=line,
        column=column,
        signature_id=signature_id,
        category=category,
        matched_text=matched_text,
        mode=ScanMode.LEXICAL,
    )


def make_result(plugin_id: str, findings=(), status=ScanStatus.SCANNED) -> PluginScanResult:
    return PluginScanResult(
        plugin_id=plugin_id,
        status=status,
        findings=tuple(findings),
        files_scanned=1 if status is ScanStatus.SCANNED else 0,
        files_skipped=0,
        lexer_fallbacks=0,
    )


# ---------------------------------------------------------------------------
# Scale corpus
# ---------------------------------------------------------------------------


def build_scale_corpus(
    root: Path, n_plugins: int = 100, files_per_plugin: int = 20, seed: int = 7
) -> Path:
    """Generate a synthetic corpus on disk; returns the manifest path."""
    rng = random.Random(seed)
    categories = list(ApplicationCategory)
    manifest_lines = []
    for i in range(n_plugins):
        plugin_id = f"s{i:03d}"
        src_dir = root / "corpus" / plugin_id / "src"
        src_dir.mkdir(parents=True)
        for j in range(files_per_plugin):
            flavor = rng.choice(["py", "js", "c"])
            if flavor == "py":
                text, _ = gen_python_program(rng)
                name = f"mod{j}.py"
            elif flavor == "js":
                text, _ = gen_c_program(rng)
                name = f"mod{j}.js"
            else:
                text, _ = gen_c_program(rng)
                name = f"mod{j}.c"
            (src_dir / name).write_text(text, encoding="utf-8")
        manifest_lines.append(
            json.dumps(
                {
                    "id": plugin_id,
                    "name": f"Synthetic {i}",
                    "source": f"./corpus/{plugin_id}",
                    "category": rng.choice(categories).value,
                    "stars": rng.randint(0, 80000),
                }
            )
        )
    manifest = root / "manifest.jsonl"
    manifest.write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")
    return manifest
