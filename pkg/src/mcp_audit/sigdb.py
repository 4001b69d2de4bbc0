"""Signature database for security-sensitive API patterns.

A signature names one dangerous API (a dotted call path such as
``subprocess.call`` or a bare name such as ``strcpy``) and assigns it to
exactly one resource category.  The built-in database covers file, memory,
network, and system APIs; users can overlay their own JSON databases on top.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class ResourceCategory(str, Enum):
    """The four resource categories every signature and finding belongs to."""

    FILE = "FILE"
    MEMORY = "MEMORY"
    NETWORK = "NETWORK"
    SYSTEM = "SYSTEM"


# Fixed presentation order for charts and CSV rows.
CATEGORY_ORDER: tuple[ResourceCategory, ...] = (
    ResourceCategory.FILE,
    ResourceCategory.MEMORY,
    ResourceCategory.NETWORK,
    ResourceCategory.SYSTEM,
)


class SignatureKind(str, Enum):
    CALL = "call"
    IMPORT = "import"


class SigDbError(ValueError):
    """Raised when a signature or database fails validation."""


_ID_RE = re.compile(r"^[a-z0-9_.-]+$")
_SEGMENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
VALID_LANGUAGES = frozenset({"*", "python", "c-family"})


@dataclass(frozen=True)
class Signature:
    """One dangerous-API pattern.

    ``pattern`` is a dotted path; matching is by whole trailing segments, so
    ``socket.bind`` matches the call site ``socket.bind(...)`` but not
    ``mysocket.bind(...)``.  Single-segment patterns match any receiver and
    are labeled low-specificity in reports.
    """

    id: str
    category: ResourceCategory
    pattern: str
    kind: SignatureKind = SignatureKind.CALL
    languages: tuple[str, ...] = ("*",)
    risk: str = ""

    def __post_init__(self) -> None:
        if not _ID_RE.match(self.id):
            raise SigDbError(f"signature id {self.id!r}: must match [a-z0-9_.-]+")
        segments = self.pattern.split(".")
        for seg in segments:
            if not _SEGMENT_RE.match(seg):
                raise SigDbError(
                    f"signature {self.id}: pattern segment {seg!r} is not an identifier"
                )
        if not self.languages:
            raise SigDbError(f"signature {self.id}: languages must be non-empty")
        for lang in self.languages:
            if lang not in VALID_LANGUAGES:
                raise SigDbError(f"signature {self.id}: unknown language {lang!r}")

    @property
    def segments(self) -> tuple[str, ...]:
        return tuple(self.pattern.split("."))

    @property
    def low_specificity(self) -> bool:
        return len(self.segments) == 1


@dataclass(frozen=True)
class SignatureDb:
    """An immutable, id-unique collection of signatures.

    ``provenance`` records where the signatures came from as
    ``(source_name, count)`` pairs, in load/merge order.
    """

    version: int
    signatures: tuple[Signature, ...]
    provenance: tuple[tuple[str, int], ...] = field(default=())

    def __post_init__(self) -> None:
        if not isinstance(self.version, int) or self.version <= 0:
            raise SigDbError(f"db version must be a positive integer, got {self.version!r}")
        seen: dict[str, Signature] = {}
        for sig in self.signatures:
            if sig.id in seen:
                raise SigDbError(f"duplicate signature id {sig.id!r}")
            seen[sig.id] = sig

    def by_id(self, sig_id: str) -> Signature:
        for sig in self.signatures:
            if sig.id == sig_id:
                return sig
        raise KeyError(sig_id)

    def ids(self) -> tuple[str, ...]:
        return tuple(sig.id for sig in self.signatures)


# ---------------------------------------------------------------------------
# Built-in signatures
# ---------------------------------------------------------------------------

_F = ResourceCategory.FILE
_M = ResourceCategory.MEMORY
_N = ResourceCategory.NETWORK
_S = ResourceCategory.SYSTEM

_BUILTIN: tuple[tuple[str, ResourceCategory, str, str], ...] = (
    # FILE
    ("file.open", _F, "open", "unauthorized file access"),
    ("file.read", _F, "read", "unauthorized file read"),
    ("file.write", _F, "write", "unauthorized file write"),
    ("file.shutil_copy", _F, "shutil.copy", "unrestricted file copy"),
    ("file.image_open", _F, "Image.open", "parsing untrusted image data"),
    ("file.load_dotenv", _F, "load_dotenv", "credential and API key exposure"),
    # SYSTEM
    ("sys.os_system", _S, "os.system", "command injection (RCE)"),
    ("sys.subprocess_call", _S, "subprocess.call", "command injection (RCE)"),
    ("sys.subprocess_run", _S, "subprocess.run", "system-level command execution"),
    ("sys.fork", _S, "fork", "improper process management"),
    ("sys.exec", _S, "exec", "arbitrary code execution"),
    # NETWORK
    ("net.socket_bind", _N, "socket.bind", "opens listening ports"),
    ("net.connect", _N, "connect", "unencrypted outbound connection"),
    ("net.dns_resolver_query", _N, "dns.resolver.query", "DNS resolution tampering"),
    ("net.post", _N, "post", "data exfiltration over HTTP"),
    ("net.openai", _N, "OPENAI", "LLM service integration, query interception"),
    # MEMORY
    ("mem.strcpy", _M, "strcpy", "buffer overflow"),
    ("mem.malloc", _M, "malloc", "unmanaged allocation"),
    ("mem.ctypes_cdll", _M, "ctypes.CDLL", "native library injection"),
    ("mem.create_string_buffer", _M, "create_string_buffer", "fixed-size buffer overflow"),
)


def builtin_db() -> SignatureDb:
    """Return the built-in signature database, sorted by signature id."""
    sigs = tuple(
        sorted(
            (Signature(id=i, category=c, pattern=p, risk=r) for i, c, p, r in _BUILTIN),
            key=lambda s: s.id,
        )
    )
    return SignatureDb(version=1, signatures=sigs, provenance=(("builtin", len(sigs)),))


# ---------------------------------------------------------------------------
# Loading and merging
# ---------------------------------------------------------------------------

_SIG_FIELDS = {"id", "category", "pattern", "kind", "languages", "risk"}


def _signature_from_obj(obj: Any) -> Signature:
    if not isinstance(obj, dict):
        raise SigDbError(f"signature entry must be an object, got {type(obj).__name__}")
    sig_id = obj.get("id")
    if not isinstance(sig_id, str) or not sig_id:
        raise SigDbError("signature entry is missing a string 'id'")
    unknown = set(obj) - _SIG_FIELDS
    if unknown:
        raise SigDbError(f"signature {sig_id}: unknown field {sorted(unknown)[0]!r}")
    for key in ("category", "pattern"):
        if key not in obj:
            raise SigDbError(f"signature {sig_id}: missing field {key!r}")
    try:
        category = ResourceCategory(obj["category"])
    except ValueError:
        raise SigDbError(
            f"signature {sig_id}: unknown category {obj['category']!r}"
        ) from None
    kind_raw = obj.get("kind", "call")
    try:
        kind = SignatureKind(kind_raw)
    except ValueError:
        raise SigDbError(f"signature {sig_id}: unknown kind {kind_raw!r}") from None
    pattern = obj["pattern"]
    if not isinstance(pattern, str):
        raise SigDbError(f"signature {sig_id}: pattern must be a string")
    languages_raw = obj.get("languages", ["*"])
    if not isinstance(languages_raw, list) or not all(
        isinstance(x, str) for x in languages_raw
    ):
        raise SigDbError(f"signature {sig_id}: languages must be a list of strings")
    risk = obj.get("risk", "")
    if not isinstance(risk, str):
        raise SigDbError(f"signature {sig_id}: risk must be a string")
    return Signature(
        id=sig_id,
        category=category,
        pattern=pattern,
        kind=kind,
        languages=tuple(languages_raw),
        risk=risk,
    )


def load_db(stream: Any, source: str = "user") -> SignatureDb:
    """Parse and validate a signature database from a JSON stream.

    ``stream`` may be a file object (text or binary), or a str/bytes payload.
    Raises SigDbError naming the offending signature id and field.
    """
    data = stream.read() if hasattr(stream, "read") else stream
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SigDbError(f"database is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SigDbError("database document must be a JSON object")
    unknown = set(doc) - {"version", "signatures"}
    if unknown:
        raise SigDbError(f"unknown top-level field {sorted(unknown)[0]!r}")
    version = doc.get("version")
    if not isinstance(version, int) or isinstance(version, bool) or version <= 0:
        raise SigDbError(f"db version must be a positive integer, got {version!r}")
    entries = doc.get("signatures")
    if not isinstance(entries, list):
        raise SigDbError("'signatures' must be a list")
    sigs = tuple(_signature_from_obj(obj) for obj in entries)
    return SignatureDb(
        version=version, signatures=sigs, provenance=((source, len(sigs)),)
    )


def merge(base: SignatureDb, overlay: SignatureDb) -> SignatureDb:
    """Overlay one database on another.

    Signatures with matching ids are replaced by the overlay's version; new
    ids are appended.  The result is sorted by id and records both sides'
    provenance.
    """
    merged: dict[str, Signature] = {sig.id: sig for sig in base.signatures}
    merged.update({sig.id: sig for sig in overlay.signatures})
    return SignatureDb(
        version=max(base.version, overlay.version),
        signatures=tuple(sorted(merged.values(), key=lambda s: s.id)),
        provenance=base.provenance + overlay.provenance,
    )


def dump_db(db: SignatureDb) -> str:
    """Render a database to canonical JSON (sorted keys, trailing newline).

    The output is accepted by load_db unchanged.
    """
    doc = {
        "version": db.version,
        "signatures": [
            {
                "id": sig.id,
                "category": sig.category.value,
                "pattern": sig.pattern,
                "kind": sig.kind.value,
                "languages": list(sig.languages),
                "risk": sig.risk,
            }
            for sig in db.signatures
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
