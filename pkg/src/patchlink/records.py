"""Domain types and dataset file formats shared by every other module.

Datasets are JSON-Lines: ``changes.jsonl`` holds one change per line,
``links.jsonl`` holds one ground-truth linked pair per line. All types are
immutable after construction and safe to share across threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import IO, Any, Iterable, Iterator


class RecordError(ValueError):
    """Base class for dataset and path validation errors."""


class MalformedLineError(RecordError):
    def __init__(self, line_no: int, detail: str):
        super().__init__(f"line {line_no}: {detail}")
        self.line_no = line_no


class DuplicateKeyError(RecordError):
    def __init__(self, key: str):
        super().__init__(f"duplicate change_key {key!r}")
        self.key = key


class BadTimestampError(RecordError):
    def __init__(self, value: str, line_no: int | None = None):
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}bad timestamp {value!r}")
        self.value = value
        self.line_no = line_no


class SelfLinkError(RecordError):
    def __init__(self, key: str):
        super().__init__(f"self-link on {key!r}")
        self.key = key


class EmptyPathError(RecordError):
    def __init__(self) -> None:
        super().__init__("empty path")


class UnsafeSegmentError(RecordError):
    def __init__(self, segment: str):
        super().__init__(f"unsafe path segment {segment!r}")
        self.segment = segment


def normalize_path(raw: str) -> str:
    """Normalize a repository-relative file path.

    Backslashes become ``/``, repeated separators collapse, leading and
    trailing separators are stripped. ``.`` and ``..`` segments are
    rejected rather than resolved. Idempotent.
    """
    if not raw:
        raise EmptyPathError()
    segments = [seg for seg in raw.replace("\\", "/").split("/") if seg]
    if not segments:
        raise EmptyPathError()
    for seg in segments:
        if seg in (".", ".."):
            raise UnsafeSegmentError(seg)
    return "/".join(segments)


def normalize_files(paths: Iterable[str]) -> tuple[str, ...]:
    """Normalize each path and drop duplicates, keeping first-seen order."""
    seen: dict[str, None] = {}
    for raw in paths:
        seen.setdefault(normalize_path(raw), None)
    return tuple(seen)


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 UTC instant, truncating to whole seconds."""
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise BadTimestampError(value) from None
    if dt.tzinfo is None:
        raise BadTimestampError(value)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class ChangeRecord:
    """One code change: identity, metadata text, timing, and touched files."""

    change_key: str
    project: str
    subject: str
    description: str
    created_at: datetime
    files: tuple[str, ...]
    url: str | None = None

    def text(self) -> str:
        """The text handed to embedding providers."""
        return self.subject + "\n" + self.description


class WindowMode(str, Enum):
    SYMMETRIC = "symmetric"
    LOOKBACK = "lookback"


@dataclass(frozen=True)
class WindowConfig:
    """Temporal candidate window: half-width in days plus direction mode."""

    days: int = 14
    mode: WindowMode = WindowMode.SYMMETRIC

    def __post_init__(self) -> None:
        if not 1 <= self.days <= 365:
            raise ValueError(f"window days must be in 1..365, got {self.days}")

    @property
    def seconds(self) -> int:
        return self.days * 86400


@dataclass(frozen=True)
class CandidateSet:
    target: ChangeRecord
    candidates: tuple[ChangeRecord, ...]
    window: WindowConfig


@dataclass(frozen=True, order=True)
class LinkLabel:
    """Unordered ground-truth pair, stored with a < b to deduplicate."""

    a: str
    b: str

    @classmethod
    def of(cls, a: str, b: str) -> "LinkLabel":
        if a == b:
            raise SelfLinkError(a)
        return cls(a, b) if a < b else cls(b, a)


_CHANGE_FIELDS = ("change_key", "project", "subject", "description", "created_at", "files")


def change_from_dict(obj: dict[str, Any], line_no: int = 0) -> ChangeRecord:
    for name in _CHANGE_FIELDS:
        if name not in obj:
            raise MalformedLineError(line_no, f"missing field {name!r}")
    if not obj["change_key"]:
        raise MalformedLineError(line_no, "empty change_key")
    try:
        created = parse_timestamp(str(obj["created_at"]))
    except BadTimestampError:
        raise BadTimestampError(str(obj["created_at"]), line_no) from None
    files = obj["files"]
    if not isinstance(files, list):
        raise MalformedLineError(line_no, "files must be a list")
    return ChangeRecord(
        change_key=str(obj["change_key"]),
        project=str(obj["project"]),
        subject=str(obj["subject"]),
        description=str(obj["description"]),
        created_at=created,
        files=normalize_files(str(f) for f in files),
        url=str(obj["url"]) if obj.get("url") is not None else None,
    )


def change_to_dict(record: ChangeRecord) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "change_key": record.change_key,
        "project": record.project,
        "subject": record.subject,
        "description": record.description,
        "created_at": format_timestamp(record.created_at),
        "files": list(record.files),
    }
    if record.url is not None:
        obj["url"] = record.url
    return obj


def _iter_lines(stream: IO[bytes] | IO[str]) -> Iterator[tuple[int, str]]:
    for line_no, raw in enumerate(stream, start=1):
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        line = line.strip()
        if line:
            yield line_no, line


def parse_changes_file(stream: IO[bytes] | IO[str]) -> list[ChangeRecord]:
    """Parse a ``changes.jsonl`` stream, in file order.

    Raises MalformedLineError, BadTimestampError, or DuplicateKeyError.
    """
    records: list[ChangeRecord] = []
    seen: set[str] = set()
    for line_no, line in _iter_lines(stream):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLineError(line_no, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise MalformedLineError(line_no, "expected a JSON object")
        record = change_from_dict(obj, line_no)
        if record.change_key in seen:
            raise DuplicateKeyError(record.change_key)
        seen.add(record.change_key)
        records.append(record)
    return records


def dump_changes_file(records: Iterable[ChangeRecord], stream: IO[str]) -> None:
    for record in records:
        stream.write(json.dumps(change_to_dict(record), ensure_ascii=False) + "\n")


def parse_links_file(stream: IO[bytes] | IO[str]) -> list[LinkLabel]:
    """Parse a ``links.jsonl`` stream: canonical (a < b), deduplicated."""
    labels: dict[LinkLabel, None] = {}
    for line_no, line in _iter_lines(stream):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLineError(line_no, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict) or "a" not in obj or "b" not in obj:
            raise MalformedLineError(line_no, "expected an object with fields 'a' and 'b'")
        labels.setdefault(LinkLabel.of(str(obj["a"]), str(obj["b"])), None)
    return list(labels)


def dump_links_file(labels: Iterable[LinkLabel], stream: IO[str]) -> None:
    for label in labels:
        stream.write(json.dumps({"a": label.a, "b": label.b}) + "\n")
