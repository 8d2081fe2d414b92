"""Shared test fixtures: change factories, synthetic corpora, and local stub
HTTP servers standing in for Gerrit and for a remote embedding service."""
from __future__ import annotations

import json
import re
import threading
from datetime import datetime, timedelta, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, unquote, urlsplit

import pytest

from patchlink.embedding import fallback_embed
from patchlink.records import ChangeRecord, LinkLabel

T0 = datetime(2024, 3, 1, tzinfo=timezone.utc)


def make_change(
    key: str,
    *,
    project: str = "nova",
    subject: str = "Fix scheduler leak",
    description: str = "",
    files: tuple[str, ...] = ("nova/scheduler/manager.py",),
    offset_hours: float = 0.0,
    url: str | None = None,
) -> ChangeRecord:
    return ChangeRecord(
        change_key=key,
        project=project,
        subject=subject,
        description=description,
        created_at=T0 + timedelta(hours=offset_hours),
        files=tuple(files),
        url=url if url is not None else f"https://gerrit.example/c/{project}/+/{key}",
    )


def separable_corpus(
    n_changes: int = 200, n_links: int = 20
) -> tuple[list[ChangeRecord], list[LinkLabel]]:
    """Corpus where linked pairs share text and files and distractors share
    neither: every ranking method has an unambiguous right answer."""
    changes: list[ChangeRecord] = []
    links: list[LinkLabel] = []
    for i in range(n_links):
        subject = f"Fix race in subsystem{i:03d} queue{i:03d} handling"
        description = (
            f"The subsystem{i:03d} worker drops queue{i:03d} events"
            f" when scenario{i:03d} runs under load."
        )
        files = (f"core/subsystem{i:03d}/handler.py", f"core/subsystem{i:03d}/util.py")
        a = make_change(
            f"p{i:03d}a", subject=subject, description=description,
            files=files, offset_hours=7 * i,
        )
        b = make_change(
            f"p{i:03d}b", subject=subject, description=description,
            files=files, offset_hours=7 * i + 3,
        )
        changes.extend([a, b])
        links.append(LinkLabel.of(a.change_key, b.change_key))
    for j in range(n_changes - 2 * n_links):
        changes.append(
            make_change(
                f"d{j:03d}",
                subject=f"Routine zz{j:04d}q cleanup wk{j:04d}m",
                description=f"Housekeeping qq{j:04d}x chore nothing shared here.",
                files=(f"zone{j:03d}/notes{j:03d}.txt",),
                offset_hours=float(j % 140),
            )
        )
    return changes, links


def mixed_corpus() -> tuple[list[ChangeRecord], list[LinkLabel]]:
    """Corpus mixing link flavors so baselines degrade differently: pairs that
    share text and files, pairs sharing only text, pairs sharing only files."""
    changes: list[ChangeRecord] = []
    links: list[LinkLabel] = []
    flavors = ("both", "text", "file")
    for i in range(18):
        flavor = flavors[i % 3]
        subject = f"Handle overflow{i:03d} in ring{i:03d} buffer"
        description = f"Writer stalls when ring{i:03d} wraps at boundary{i:03d}."
        files = (f"drivers/ring{i:03d}/io.py", f"drivers/ring{i:03d}/buf.py")
        alt_subject = f"Unrelated widget{i:03d} polish gadget{i:03d}"
        alt_description = f"Cosmetic gadget{i:03d} tweak only."
        alt_files = (f"ui/widget{i:03d}/style.css",)
        a = make_change(
            f"m{i:03d}a", subject=subject, description=description,
            files=files, offset_hours=5 * i,
        )
        b = make_change(
            f"m{i:03d}b",
            subject=subject if flavor in ("both", "text") else alt_subject,
            description=description if flavor in ("both", "text") else alt_description,
            files=files if flavor in ("both", "file") else alt_files,
            offset_hours=5 * i + 2,
        )
        changes.extend([a, b])
        links.append(LinkLabel.of(a.change_key, b.change_key))
    for j in range(54):
        changes.append(
            make_change(
                f"x{j:03d}",
                subject=f"Chore yy{j:04d}r sweep vv{j:04d}t",
                description=f"Nothing in common uu{j:04d}s here.",
                files=(f"misc{j:03d}/log{j:03d}.txt",),
                offset_hours=float(j % 90),
            )
        )
    return changes, links


def blob_samples(n: int, seed: int) -> list[tuple[list[float], int]]:
    """Linearly separable two-blob set in the 6-feature space: positives near
    [1,1,1,1,1,0], negatives near [0,0,0,0,500,10], small deterministic jitter."""
    import random

    rng = random.Random(seed)
    samples: list[tuple[list[float], int]] = []
    for i in range(n):
        if i % 2 == 0:
            base = [1.0, 1.0, 1.0, 1.0, 1.0, 0.0]
            jitter = [rng.uniform(-0.05, 0.05) for _ in range(6)]
        else:
            base = [0.0, 0.0, 0.0, 0.0, 500.0, 10.0]
            jitter = [rng.uniform(0.0, 0.05) for _ in range(4)] + [
                rng.uniform(-20.0, 20.0),
                rng.uniform(-2.0, 2.0),
            ]
        samples.append(([b + j for b, j in zip(base, jitter)], 1 if i % 2 == 0 else 0))
    return samples


def write_corpus(tmp_path, changes, links) -> tuple[str, str]:
    from patchlink.records import dump_changes_file, dump_links_file

    changes_path = tmp_path / "changes.jsonl"
    links_path = tmp_path / "links.jsonl"
    with open(changes_path, "w", encoding="utf-8") as fh:
        dump_changes_file(changes, fh)
    with open(links_path, "w", encoding="utf-8") as fh:
        dump_links_file(links, fh)
    return str(changes_path), str(links_path)


# ---------------------------------------------------------------------------
# Stub Gerrit


def gerrit_change_info(
    number: int,
    *,
    project: str = "nova",
    subject: str = "Fix leak",
    created: str = "2024-03-01 10:00:00.000000000",
    files: tuple[str, ...] = ("nova/scheduler/manager.py",),
    message: str | None = None,
) -> dict:
    revision = {"files": {name: {"lines_inserted": 1} for name in files}}
    if message is not None:
        revision["commit"] = {"message": message}
    return {
        "id": f"{project}~master~I{number:040d}",
        "_number": number,
        "project": project,
        "subject": subject,
        "created": created,
        "current_revision": f"rev{number}",
        "revisions": {f"rev{number}": revision},
    }


_QUERY_RE = re.compile(r'project:(?P<project>\S+) after:"(?P<after>[^"]+)" before:"(?P<before>[^"]+)"')


class _GerritHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, format: str, *args) -> None:
        pass

    def do_POST(self) -> None:  # noqa: N802
        self.server.stub.record(self)
        self._reply(405, b'{"message":"read-only"}')

    def do_GET(self) -> None:  # noqa: N802
        stub = self.server.stub
        stub.record(self)
        if stub.force_status is not None:
            self._reply(stub.force_status, b'{"message":"forced"}')
            return
        parts = urlsplit(self.path)
        path = parts.path
        if path.startswith("/a/"):
            if not self.headers.get("Authorization", "").startswith("Basic "):
                self._reply(401, b"Unauthorized")
                return
            path = path[2:]
        query = parse_qs(parts.query)
        if path == "/changes/":
            self._handle_query(stub, query)
        elif path.startswith("/changes/"):
            self._handle_get(stub, unquote(path[len("/changes/"):]))
        else:
            self._reply(404, b"Not Found")

    def _handle_query(self, stub: "StubGerrit", query: dict) -> None:
        matched = list(stub.changes)
        match = _QUERY_RE.match(query.get("q", [""])[0])
        if match is not None:
            matched = [
                c
                for c in matched
                if c["project"] == match.group("project")
                and match.group("after") <= c["created"][: len(match.group("after"))]
                and c["created"][: len(match.group("before"))] <= match.group("before")
            ]
        skip = int(query.get("S", ["0"])[0])
        count = int(query.get("n", [str(len(matched))])[0])
        if stub.page_size is not None:
            count = min(count, stub.page_size)
        page = [dict(c) for c in matched[skip : skip + count]]
        if page and skip + count < len(matched):
            page[-1]["_more_changes"] = True
        self._reply_json(page)

    def _handle_get(self, stub: "StubGerrit", change_id: str) -> None:
        for info in stub.changes:
            if str(info["_number"]) == change_id or info["id"] == change_id:
                self._reply_json(info)
                return
        self._reply(404, b"Not Found: " + change_id.encode("utf-8"))

    def _reply_json(self, payload) -> None:
        body = b")]}'\n" + json.dumps(payload).encode("utf-8")
        self._reply(200, body)

    def _reply(self, status: int, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class StubGerrit:
    """In-process Gerrit imitation: XSSI-prefixed JSON, /a/ auth, pagination."""

    def __init__(self):
        self.changes: list[dict] = []
        self.requests: list[tuple[str, str, str | None]] = []
        self.force_status: int | None = None
        self.page_size: int | None = None
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    def record(self, handler: BaseHTTPRequestHandler) -> None:
        self.requests.append(
            (handler.command, handler.path, handler.headers.get("Authorization"))
        )

    @property
    def url(self) -> str:
        assert self._server is not None
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> None:
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), _GerritHandler)
        self._server.stub = self
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._thread.join(timeout=5)


@pytest.fixture
def stub_gerrit():
    stub = StubGerrit()
    stub.start()
    yield stub
    stub.stop()


# ---------------------------------------------------------------------------
# Stub embedding service


class _EmbedHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, format: str, *args) -> None:
        pass

    def do_POST(self) -> None:  # noqa: N802
        stub = self.server.stub
        length = int(self.headers.get("Content-Length", "0"))
        body = json.loads(self.rfile.read(length)) if length else {}
        stub.calls.append(body.get("texts", []))
        if self.path != "/embed":
            self._reply(404, {"message": "not found"})
            return
        if stub.force_status is not None:
            self._reply(stub.force_status, {"message": "forced"})
            return
        if stub.malformed:
            self._reply(200, {"unexpected": True})
            return
        texts = body.get("texts", [])
        self._reply(
            200,
            {
                "vectors": [fallback_embed(t, stub.dimension) for t in texts],
                "dimension": stub.dimension,
            },
        )

    def _reply(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class StubEmbed:
    """Remote-provider imitation speaking the POST /embed protocol."""

    def __init__(self, dimension: int = 8):
        self.dimension = dimension
        self.calls: list[list[str]] = []
        self.force_status: int | None = None
        self.malformed = False
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        assert self._server is not None
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> None:
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), _EmbedHandler)
        self._server.stub = self
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._thread.join(timeout=5)


@pytest.fixture
def stub_embed():
    stub = StubEmbed()
    stub.start()
    yield stub
    stub.stop()
