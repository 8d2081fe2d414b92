"""Pluggable sentence-embedding providers and vector similarity.

Two providers ship here: a deterministic hashed-token fallback that needs
no model weights, and a remote HTTP provider speaking a one-line protocol
(POST /embed with ``{"texts": [...]}``) so any sentence-embedding backend
can be plugged in. Both are deterministic for a given input text.

Text is passed to remote providers untruncated; if a backend has a
context limit, truncation is the backend's responsibility.
"""
from __future__ import annotations

import hashlib
import math
import re
import threading
from typing import Protocol, Sequence

import requests

from .records import ChangeRecord

_TOKEN_RE = re.compile(r"[a-z0-9]+")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class EmbeddingError(Exception):
    pass


class DimensionMismatchError(EmbeddingError):
    def __init__(self, du: int, dv: int):
        super().__init__(f"vector dimensions differ: {du} vs {dv}")
        self.du = du
        self.dv = dv


class ProviderFailureError(EmbeddingError):
    """An external provider failed (network, protocol, or model error)."""


class EmbeddingProvider(Protocol):
    name: str
    dimension: int

    def embed(self, text: str) -> list[float]: ...


def tokenize(text: str) -> list[str]:
    """Lowercase and split into ASCII alphanumeric runs."""
    return _TOKEN_RE.findall(text.lower())


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def fallback_embed(text: str, dimension: int = 256) -> list[float]:
    """Deterministic hashed-token embedding.

    Each token lands in bucket fnv1a_64(token) mod dimension; bucket counts
    are L2-normalized. Text with no tokens embeds to the zero vector.
    """
    counts = [0.0] * dimension
    for token in tokenize(text):
        counts[fnv1a_64(token.encode("utf-8")) % dimension] += 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    if norm == 0.0:
        return counts
    return [c / norm for c in counts]


class FallbackProvider:
    """Built-in provider backed by ``fallback_embed``."""

    def __init__(self, dimension: int = 256):
        self.name = f"fallback-fnv1a-{dimension}"
        self.dimension = dimension

    def embed(self, text: str) -> list[float]:
        return fallback_embed(text, self.dimension)


class RemoteProvider:
    """HTTP provider: POST /embed {"texts": [...]} -> {"vectors": [...], "dimension": D}.

    The dimension is discovered on first use and held fixed afterwards.
    Safe for concurrent embed calls.
    """

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.name = f"remote:{self.url}"
        self._dimension: int | None = None
        self._lock = threading.Lock()

    @property
    def dimension(self) -> int:
        if self._dimension is None:
            self.embed("")
        assert self._dimension is not None
        return self._dimension

    def embed(self, text: str) -> list[float]:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> list[list[float]]:
        try:
            resp = requests.post(
                self.url + "/embed", json={"texts": list(texts)}, timeout=self.timeout
            )
            resp.raise_for_status()
            body = resp.json()
            vectors = [[float(x) for x in vec] for vec in body["vectors"]]
            dimension = int(body["dimension"])
        except (requests.RequestException, KeyError, TypeError, ValueError) as exc:
            raise ProviderFailureError(f"embedding endpoint {self.url}: {exc}") from exc
        if len(vectors) != len(texts) or any(len(v) != dimension for v in vectors):
            raise ProviderFailureError(
                f"embedding endpoint {self.url}: response shape does not match request"
            )
        with self._lock:
            if self._dimension is None:
                self._dimension = dimension
            elif self._dimension != dimension:
                raise ProviderFailureError(
                    f"embedding endpoint {self.url}: dimension changed "
                    f"from {self._dimension} to {dimension}"
                )
        return vectors


def cosine_similarity(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine of the angle between u and v, clamped to [-1, 1].

    A zero-norm vector carries no evidence: similarity is defined as 0.
    """
    if len(u) != len(v):
        raise DimensionMismatchError(len(u), len(v))
    dot = 0.0
    nu = 0.0
    nv = 0.0
    for a, b in zip(u, v):
        dot += a * b
        nu += a * a
        nv += b * b
    if nu == 0.0 or nv == 0.0:
        return 0.0
    sim = dot / (math.sqrt(nu) * math.sqrt(nv))
    return max(-1.0, min(1.0, sim))


def embed_change(provider: EmbeddingProvider, change: ChangeRecord) -> list[float]:
    """Embed a change's subject and description, newline-joined."""
    return provider.embed(change.text())


class EmbeddingCache:
    """Text-keyed vector cache shared across pipeline calls.

    Keys are (provider name, SHA-256 of the embedded text), so records that
    differ only in non-text fields share an entry. Thread-safe.
    """

    def __init__(self) -> None:
        self._entries: dict[tuple[str, str], list[float]] = {}
        self._lock = threading.Lock()

    @staticmethod
    def _key(provider: EmbeddingProvider, text: str) -> tuple[str, str]:
        return provider.name, hashlib.sha256(text.encode("utf-8")).hexdigest()

    def get_or_embed(self, provider: EmbeddingProvider, text: str) -> list[float]:
        key = self._key(provider, text)
        with self._lock:
            hit = self._entries.get(key)
        if hit is not None:
            return hit
        vector = provider.embed(text)
        with self._lock:
            return self._entries.setdefault(key, vector)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def cached_embed(
    provider: EmbeddingProvider, change: ChangeRecord, cache: EmbeddingCache | None
) -> list[float]:
    if cache is None:
        return embed_change(provider, change)
    return cache.get_or_embed(provider, change.text())
