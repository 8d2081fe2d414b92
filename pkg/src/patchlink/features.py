"""Six-signal feature vector for a pair of changes.

Signals: embedding cosine over subject+description, path-structure overlap
(longest common prefix/suffix of path segments, Jaccard over file sets),
absolute time difference in hours, and file-count difference. Path metrics
operate on whole segments, never characters, and are aggregated over the
two file sets by maximum: the strongest structural overlap is what signals
linkage.
"""
from __future__ import annotations

from dataclasses import dataclass

from .embedding import EmbeddingCache, EmbeddingProvider, cached_embed, cosine_similarity
from .records import ChangeRecord

FEATURE_NAMES = (
    "semantic_sim",
    "lcp_max",
    "lcs_max",
    "jaccard",
    "time_diff_hours",
    "delta_files",
)


@dataclass(frozen=True)
class FeatureVector:
    semantic_sim: float
    lcp_max: float
    lcs_max: float
    jaccard: float
    time_diff_hours: float
    delta_files: int

    def as_list(self) -> list[float]:
        """Values in canonical FEATURE_NAMES order."""
        return [
            self.semantic_sim,
            self.lcp_max,
            self.lcs_max,
            self.jaccard,
            self.time_diff_hours,
            float(self.delta_files),
        ]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.as_list()))


def path_segments(path: str) -> list[str]:
    """Split a normalized path on '/'; never yields empty segments."""
    return path.split("/")


def norm_lcp(p: str, q: str) -> float:
    """Shared leading segments over the longer segment count, in [0, 1]."""
    ps, qs = path_segments(p), path_segments(q)
    common = 0
    for a, b in zip(ps, qs):
        if a != b:
            break
        common += 1
    return common / max(len(ps), len(qs))


def norm_lcs_suffix(p: str, q: str) -> float:
    """Shared trailing segments over the longer segment count, in [0, 1]."""
    ps, qs = path_segments(p), path_segments(q)
    common = 0
    for a, b in zip(reversed(ps), reversed(qs)):
        if a != b:
            break
        common += 1
    return common / max(len(ps), len(qs))


def jaccard_files(a: frozenset[str] | set[str], b: frozenset[str] | set[str]) -> float:
    """|A∩B| / |A∪B| by exact string equality; 0 when both sets are empty."""
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


def _max_pairwise(files_a: tuple[str, ...], files_b: tuple[str, ...], metric) -> float:
    if not files_a or not files_b:
        return 0.0
    return max(metric(f, g) for f in files_a for g in files_b)


def featurize_pair(
    a: ChangeRecord,
    b: ChangeRecord,
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
) -> FeatureVector:
    """Compute the pair's feature vector. Symmetric in (a, b).

    The cosine is floored at 0: negative similarity carries no linkage
    evidence, which keeps all similarity features on a shared [0, 1] scale.
    """
    u = cached_embed(provider, a, cache)
    v = cached_embed(provider, b, cache)
    return FeatureVector(
        semantic_sim=max(0.0, cosine_similarity(u, v)),
        lcp_max=_max_pairwise(a.files, b.files, norm_lcp),
        lcs_max=_max_pairwise(a.files, b.files, norm_lcs_suffix),
        jaccard=jaccard_files(set(a.files), set(b.files)),
        time_diff_hours=abs((a.created_at - b.created_at).total_seconds()) / 3600.0,
        delta_files=abs(len(a.files) - len(b.files)),
    )
