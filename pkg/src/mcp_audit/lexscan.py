"""Call-site extraction from source text, comment- and string-aware.

Two scan modes:

* LEXICAL walks the file with a small per-family lexer that skips comments
  and string literals and collects dotted name chains followed by ``(``.
  Python files additionally yield IMPORT sites for import statements.
* RAW is a plain regex sweep used as a fallback. It does not skip comments
  or strings, so it can over-report; that imprecision is the documented
  cost of scanning files the lexer cannot handle.

Shared matching grammar: a chain is ``IDENT ('.' IDENT)*`` written without
internal whitespace, and it is a CALL site when the next non-whitespace
character is ``(``. A chain never starts right after one of
``[A-Za-z0-9_.]``; this mirrors RAW's lookbehind, so the two modes agree on
comment-free, string-free input. Consequences, accepted by design:
identifiers are ASCII-only, and method calls on expression results such as
``foo().bar(...)`` are not reported by either mode.

Known single-mode gaps: f-string and template-literal interiors are skipped
whole, so calls inside interpolations are missed in LEXICAL mode.
"""
from __future__ import annotations

import re
import string
from bisect import bisect_left
from dataclasses import dataclass
from enum import Enum
from pathlib import PurePath
from typing import Iterable


class LanguageFamily(str, Enum):
    PYTHON = "PYTHON"
    C_FAMILY = "C_FAMILY"
    UNKNOWN = "UNKNOWN"


class ScanMode(str, Enum):
    LEXICAL = "LEXICAL"
    RAW = "RAW"


class SiteKind(str, Enum):
    CALL = "CALL"
    IMPORT = "IMPORT"


_C_FAMILY_EXTS = frozenset(
    {".js", ".jsx", ".ts", ".tsx", ".java", ".c", ".h", ".cpp", ".cc", ".hpp", ".cs", ".go"}
)


def identify_language(path: str) -> LanguageFamily:
    """Map a file path to its language family by extension, case-insensitive."""
    ext = PurePath(path).suffix.lower()
    if ext == ".py":
        return LanguageFamily.PYTHON
    if ext in _C_FAMILY_EXTS:
        return LanguageFamily.C_FAMILY
    return LanguageFamily.UNKNOWN


class LexError(Exception):
    """Lexing cannot continue (unterminated string or block comment).

    Callers are expected to catch this and retry the file in RAW mode when
    the fallback policy allows it.
    """

    def __init__(self, reason: str, line: int) -> None:
        super().__init__(f"{reason} (line {line})")
        self.reason = reason
        self.line = line


@dataclass(frozen=True)
class CallSite:
    """One matched name chain.

    ``line`` and ``column`` are 1-based and point at the first character of
    the first segment; slicing the source there for ``len(raw_text)``
    characters reproduces ``raw_text``.
    """

    segments: tuple[str, ...]
    line: int
    column: int
    kind: SiteKind
    raw_text: str


# ---------------------------------------------------------------------------
# Lexical mode
# ---------------------------------------------------------------------------

_CHAIN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*")
_IDENT_START = frozenset(string.ascii_letters + "_")
# Characters that must not precede a chain start; identical to RAW's lookbehind.
_GUARD = frozenset(string.ascii_letters + string.digits + "_.")
_WS = frozenset(" \t\n\r\f\v")
_STRING_PREFIX_RE = re.compile(r"^[rRbBuUfF]{1,2}$")
_QUOTES = ("'", '"')


class _Lexer:
    def __init__(self, text: str, family: LanguageFamily) -> None:
        self.text = text
        self.n = len(text)
        self.family = family
        self.i = 0
        self.line = 1
        self.line_start = 0
        self.sites: list[CallSite] = []

    # -- position bookkeeping ------------------------------------------------

    def _advance_to(self, j: int) -> None:
        newlines = self.text.count("\n", self.i, j)
        if newlines:
            self.line += newlines
            self.line_start = self.text.rfind("\n", self.i, j) + 1
        self.i = j

    # -- literals --------------------------------------------------------

    def _skip_string(self, start: int, allow_triple: bool) -> None:
        """Consume a quoted literal beginning at ``start`` (the quote char)."""
        text, n = self.text, self.n
        quote = text[start]
        if allow_triple and text.startswith(quote * 3, start):
            terminator = quote * 3
            j = start + 3
        else:
            terminator = quote
            j = start + 1
        while j < n:
            ch = text[j]
            if ch == "\\":
                j += 2
                continue
            if text.startswith(terminator, j):
                self._advance_to(j + len(terminator))
                return
            j += 1
        raise LexError("unterminated string literal at end of file", self.line)

    def _skip_line_comment(self, start: int) -> None:
        j = self.text.find("\n", start)
        self._advance_to(self.n if j < 0 else j)

    # -- chains ------------------------------------------------------------

    def _emit_call_if_paren(self, chain_text: str, start: int, end: int) -> None:
        text, n = self.text, self.n
        j = end
        while j < n and text[j] in _WS:
            j += 1
        if j < n and text[j] == "(":
            self.sites.append(
                CallSite(
                    segments=tuple(chain_text.split(".")),
                    line=self.line,
                    column=start - self.line_start + 1,
                    kind=SiteKind.CALL,
                    raw_text=chain_text,
                )
            )

    def _emit_import(self, chain_text: str, start: int) -> None:
        self.sites.append(
            CallSite(
                segments=tuple(chain_text.split(".")),
                line=self.line,
                column=start - self.line_start + 1,
                kind=SiteKind.IMPORT,
                raw_text=chain_text,
            )
        )

    def _skip_blanks(self, j: int) -> int:
        text, n = self.text, self.n
        while j < n and text[j] in " \t":
            j += 1
        return j

    def _at_statement_start(self, idx: int) -> bool:
        # Import keywords count only at the start of a line or after ';',
        # so 'yield from x' does not read as an import clause.
        text = self.text
        j = idx - 1
        while j >= self.line_start and text[j] in " \t":
            j -= 1
        return j < self.line_start or text[j] == ";"

    def _lex_import_list(self) -> None:
        """Consume 'a.b as x, c.d' after an ``import`` keyword, emitting sites."""
        text, n = self.text, self.n
        while True:
            j = self._skip_blanks(self.i)
            m = _CHAIN_RE.match(text, j)
            if not m:
                self.i = j
                return
            self._emit_import(m.group(), j)
            j = m.end()
            k = self._skip_blanks(j)
            alias = _CHAIN_RE.match(text, k)
            if alias and alias.group() == "as":
                k = self._skip_blanks(alias.end())
                name = _CHAIN_RE.match(text, k)
                if not name:
                    self.i = k
                    return
                j = name.end()
            k = self._skip_blanks(j)
            if k < n and text[k] == ",":
                self.i = k + 1
                continue
            self.i = j
            return

    def _lex_from_module(self) -> None:
        """Consume the module chain after ``from``; relative dots carry no site."""
        text, n = self.text, self.n
        j = self._skip_blanks(self.i)
        while j < n and text[j] == ".":
            j += 1
        m = _CHAIN_RE.match(text, j)
        if m:
            self._emit_import(m.group(), j)
            j = m.end()
        self.i = j

    # -- drivers -----------------------------------------------------------

    def lex(self) -> list[CallSite]:
        if self.family is LanguageFamily.PYTHON:
            self._lex_python()
        else:
            self._lex_c_family()
        return self.sites

    def _lex_python(self) -> None:
        text, n = self.text, self.n
        suppress_import_line = -1
        while self.i < n:
            ch = text[self.i]
            if ch == "\n":
                self.i += 1
                self.line += 1
                self.line_start = self.i
            elif ch == "#":
                self._skip_line_comment(self.i)
            elif ch in _QUOTES:
                self._skip_string(self.i, allow_triple=True)
            elif ch in _IDENT_START:
                if self.i > 0 and text[self.i - 1] in _GUARD:
                    # Continuation of a non-chain token (e.g. '0x1f', '1.x'):
                    # consume without reporting, same as RAW's lookbehind.
                    self.i = _CHAIN_RE.match(text, self.i).end()
                    continue
                m = _CHAIN_RE.match(text, self.i)
                chain_text = m.group()
                start, end = self.i, m.end()
                if (
                    len(chain_text) <= 2
                    and end < n
                    and text[end] in _QUOTES
                    and _STRING_PREFIX_RE.match(chain_text)
                ):
                    self.i = end
                    self._skip_string(end, allow_triple=True)
                    continue
                if chain_text == "import":
                    self.i = end
                    if suppress_import_line == self.line:
                        suppress_import_line = -1
                    elif self._at_statement_start(start):
                        self._lex_import_list()
                    continue
                if chain_text == "from" and self._at_statement_start(start):
                    self.i = end
                    self._lex_from_module()
                    suppress_import_line = self.line
                    continue
                self._emit_call_if_paren(chain_text, start, end)
                self.i = end
            else:
                self.i += 1

    def _lex_c_family(self) -> None:
        text, n = self.text, self.n
        while self.i < n:
            ch = text[self.i]
            if ch == "\n":
                self.i += 1
                self.line += 1
                self.line_start = self.i
            elif ch == "/":
                nxt = text[self.i + 1] if self.i + 1 < n else ""
                if nxt == "/":
                    self._skip_line_comment(self.i)
                elif nxt == "*":
                    j = text.find("*/", self.i + 2)
                    if j < 0:
                        raise LexError("unterminated block comment at end of file", self.line)
                    self._advance_to(j + 2)
                else:
                    self.i += 1
            elif ch in _QUOTES or ch == "`":
                self._skip_string(self.i, allow_triple=False)
            elif ch in _IDENT_START:
                if self.i > 0 and text[self.i - 1] in _GUARD:
                    self.i = _CHAIN_RE.match(text, self.i).end()
                    continue
                m = _CHAIN_RE.match(text, self.i)
                self._emit_call_if_paren(m.group(), self.i, m.end())
                self.i = m.end()
            else:
                self.i += 1


def lex_call_sites(content: str, family: LanguageFamily) -> list[CallSite]:
    """Extract CALL (and, for Python, IMPORT) sites from source text.

    Raises LexError when scanning cannot continue; raises ValueError for the
    UNKNOWN family, which has no lexer.
    """
    if family is LanguageFamily.UNKNOWN:
        raise ValueError("no lexer for UNKNOWN language family")
    return _Lexer(content, family).lex()


# ---------------------------------------------------------------------------
# Raw mode
# ---------------------------------------------------------------------------


def raw_scan(content: str, patterns: Iterable[str]) -> list[CallSite]:
    """Regex sweep for literal pattern occurrences followed by ``(``.

    Comments and strings are not skipped; a pattern quoted in a string still
    matches. Results are ordered by (line, column, pattern text).
    """
    newline_positions: list[int] | None = None
    sites: list[CallSite] = []
    for pattern in dict.fromkeys(patterns):
        rx = re.compile(r"(?<![A-Za-z0-9_.])" + re.escape(pattern) + r"\s*\(")
        for m in rx.finditer(content):
            if newline_positions is None:
                newline_positions = [i for i, c in enumerate(content) if c == "\n"]
            pos = m.start()
            before = bisect_left(newline_positions, pos)
            line_start = newline_positions[before - 1] + 1 if before else 0
            sites.append(
                CallSite(
                    segments=tuple(pattern.split(".")),
                    line=before + 1,
                    column=pos - line_start + 1,
                    kind=SiteKind.CALL,
                    raw_text=pattern,
                )
            )
    sites.sort(key=lambda s: (s.line, s.column, s.raw_text))
    return sites
