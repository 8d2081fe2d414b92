"""Read-only Gerrit REST client.

Queries changes by project and time range, fetches single changes with
file lists, and normalizes Gerrit ChangeInfo documents into ChangeRecord.
Gerrit prepends the XSSI guard ``)]}'`` to every REST response; it is
stripped before decoding. Only GET requests are ever issued.
"""
from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any
from urllib.parse import quote

import requests

from .records import BadTimestampError, ChangeRecord, normalize_files

logger = logging.getLogger(__name__)

XSSI_PREFIX = b")]}'"

# Synthetic file entries Gerrit reports alongside real paths; including
# them would inflate file-overlap features for every pair.
PSEUDO_FILES = frozenset({"/COMMIT_MSG", "/MERGE_LIST", "/PATCHSET_LEVEL"})

_FOOTER_LINE_RE = re.compile(r"^[A-Za-z][A-Za-z0-9-]*:\s*\S")

_QUERY_OPTIONS = ("CURRENT_REVISION", "CURRENT_FILES", "DETAILED_ACCOUNTS")
_GET_OPTIONS = ("CURRENT_REVISION", "CURRENT_FILES", "COMMIT_FOOTERS")


class GerritError(Exception):
    pass


class GerritHttpError(GerritError):
    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"gerrit returned HTTP {status}" + (f": {detail}" if detail else ""))
        self.status = status


class AuthRequiredError(GerritHttpError):
    pass


class ChangeNotFoundError(GerritError):
    def __init__(self, change_id: str):
        super().__init__(f"change {change_id!r} not found")
        self.change_id = change_id


class GerritDecodeError(GerritError):
    pass


class GerritTimeoutError(GerritError):
    pass


class GerritConnectError(GerritError):
    pass


class MissingFieldError(GerritError):
    def __init__(self, name: str):
        super().__init__(f"gerrit response missing field {name!r}")
        self.name = name


@dataclass(frozen=True)
class GerritConfig:
    base_url: str
    username: str | None = None
    http_password: str | None = None
    timeout: float = 30.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "base_url", self.base_url.rstrip("/"))
        if (self.username is None) != (self.http_password is None):
            raise ValueError("username and http_password must both be set or both absent")

    @property
    def authenticated(self) -> bool:
        return self.username is not None


def strip_xssi_prefix(body: bytes) -> bytes:
    """Remove Gerrit's leading ``)]}'`` (and one following newline) if present."""
    if body.startswith(XSSI_PREFIX):
        body = body[len(XSSI_PREFIX):]
        if body.startswith(b"\n"):
            body = body[1:]
    return body


def parse_gerrit_timestamp(value: str) -> datetime:
    """Parse Gerrit's ``YYYY-MM-DD HH:MM:SS.nnnnnnnnn`` UTC format."""
    head = value.split(".", 1)[0]
    try:
        return datetime.strptime(head, "%Y-%m-%d %H:%M:%S").replace(tzinfo=timezone.utc)
    except ValueError:
        raise BadTimestampError(value) from None


def format_gerrit_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%d %H:%M:%S")


def _is_footer_block(block: str) -> bool:
    lines = [line for line in block.split("\n") if line.strip()]
    return bool(lines) and all(_FOOTER_LINE_RE.match(line) for line in lines)


def extract_description(message: str) -> str:
    """Commit message body with the subject line and trailing footers removed.

    Footers (Change-Id:, Signed-off-by:, ...) are boilerplate identifiers,
    not semantic content; leaving them in would let the embedder latch onto
    tokens shared by every change.
    """
    body_lines = message.split("\n")[1:]
    text = "\n".join(body_lines).strip("\n")
    if not text.strip():
        return ""
    blocks = re.split(r"\n\s*\n", text)
    while blocks and _is_footer_block(blocks[-1]):
        blocks.pop()
    return "\n\n".join(blocks).strip()


def normalize_change(raw: dict[str, Any], base_url: str) -> ChangeRecord:
    """Map a Gerrit ChangeInfo document to a ChangeRecord."""
    if "_number" in raw:
        change_key = str(raw["_number"])
    elif "id" in raw:
        change_key = str(raw["id"])
    else:
        raise MissingFieldError("_number")
    for name in ("project", "subject", "created"):
        if name not in raw:
            raise MissingFieldError(name)

    files: tuple[str, ...] = ()
    message = ""
    current = raw.get("current_revision")
    revision = (raw.get("revisions") or {}).get(current) if current else None
    if revision:
        files = normalize_files(
            path for path in (revision.get("files") or {}) if path not in PSEUDO_FILES
        )
        message = (revision.get("commit") or {}).get("message", "")

    base = base_url.rstrip("/")
    return ChangeRecord(
        change_key=change_key,
        project=str(raw["project"]),
        subject=str(raw["subject"]),
        description=extract_description(message),
        created_at=parse_gerrit_timestamp(str(raw["created"])),
        files=files,
        url=f"{base}/c/{raw['project']}/+/{change_key}",
    )


class GerritClient:
    """Stateless per-request client; safe for concurrent use.

    Concurrent requests per client are capped to stay polite to public
    Gerrit instances.
    """

    def __init__(self, config: GerritConfig, max_concurrency: int = 4, max_results: int = 500):
        self.config = config
        self.max_results = max_results
        self._semaphore = threading.Semaphore(max_concurrency)

    def _get(self, path: str, params: list[tuple[str, str]] | None = None) -> Any:
        base = self.config.base_url
        url = f"{base}/a{path}" if self.config.authenticated else f"{base}{path}"
        auth = None
        if self.config.authenticated:
            auth = (self.config.username, self.config.http_password)
        logger.debug("GET %s", path)
        try:
            with self._semaphore:
                response = requests.get(
                    url, params=params, auth=auth, timeout=self.config.timeout
                )
        except requests.Timeout as exc:
            raise GerritTimeoutError(f"gerrit timed out after {self.config.timeout}s") from exc
        except requests.RequestException as exc:
            raise GerritConnectError(f"gerrit unreachable at {base}: {type(exc).__name__}") from exc
        if response.status_code in (401, 403):
            raise AuthRequiredError(response.status_code)
        if response.status_code == 404:
            raise ChangeNotFoundError(path)
        if response.status_code >= 400:
            raise GerritHttpError(response.status_code)
        try:
            return json.loads(strip_xssi_prefix(response.content))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise GerritDecodeError(f"undecodable gerrit response: {exc}") from exc

    def query_changes(
        self,
        project: str,
        after: datetime,
        before: datetime,
        limit: int = 500,
    ) -> list[ChangeRecord]:
        """Changes in ``project`` created in [after, before], response order.

        Follows Gerrit's ``_more_changes`` pagination marker until ``limit``
        (hard-capped per client) or exhaustion.
        """
        if after > before:
            raise ValueError("after must be <= before")
        limit = min(limit, self.max_results)
        query = (
            f"project:{project}"
            f' after:"{format_gerrit_timestamp(after)}"'
            f' before:"{format_gerrit_timestamp(before)}"'
        )
        records: list[ChangeRecord] = []
        offset = 0
        while len(records) < limit:
            params: list[tuple[str, str]] = [("q", query)]
            params += [("o", option) for option in _QUERY_OPTIONS]
            params.append(("n", str(limit - len(records))))
            if offset:
                params.append(("S", str(offset)))
            page = self._get("/changes/", params)
            if not isinstance(page, list):
                raise GerritDecodeError("change query did not return a list")
            records.extend(normalize_change(raw, self.config.base_url) for raw in page)
            if not page or not page[-1].get("_more_changes"):
                break
            offset += len(page)
        return records[:limit]

    def get_change(self, change_id: str) -> ChangeRecord:
        """Fetch one change by numeric id or Change-Id string."""
        params = [("o", option) for option in _GET_OPTIONS]
        try:
            raw = self._get(f"/changes/{quote(change_id, safe='')}", params)
        except ChangeNotFoundError:
            raise ChangeNotFoundError(change_id) from None
        if not isinstance(raw, dict):
            raise GerritDecodeError("change lookup did not return an object")
        return normalize_change(raw, self.config.base_url)
