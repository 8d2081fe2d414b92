"""End-to-end inference: window candidates, featurize, score, rank top-K.

The engine behind both the HTTP service and the evaluation harness.
Stateless given (model, provider, cache); safe for concurrent requests.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .embedding import EmbeddingCache, EmbeddingProvider, ProviderFailureError
from .features import FeatureVector, featurize_pair
from .forest import ForestModel, predict_proba
from .records import CandidateSet, ChangeRecord, WindowConfig, WindowMode


@dataclass(frozen=True)
class RankedPrediction:
    change_key: str
    subject: str
    url: str | None
    score: float
    rank: int
    features: FeatureVector


@dataclass(frozen=True)
class RankRequest:
    target: ChangeRecord
    pool: tuple[ChangeRecord, ...]
    window: WindowConfig = field(default_factory=WindowConfig)
    top_k: int = 5

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")


def select_candidates(
    target: ChangeRecord,
    pool: list[ChangeRecord] | tuple[ChangeRecord, ...],
    window: WindowConfig,
    same_project: bool = True,
) -> CandidateSet:
    """Keep pool entries inside the temporal window of the target.

    Symmetric mode keeps |time(c) - t| <= days * 86400 (inclusive);
    lookback keeps t - days * 86400 <= time(c) <= t. The target's own
    change_key is always excluded, and by default so is every other
    project. Output is ordered by |time difference|, ties by change_key.
    """
    t = target.created_at
    delta = window.seconds
    kept: list[ChangeRecord] = []
    for change in pool:
        if change.change_key == target.change_key:
            continue
        if same_project and change.project != target.project:
            continue
        offset = (change.created_at - t).total_seconds()
        if window.mode is WindowMode.LOOKBACK:
            if not -delta <= offset <= 0:
                continue
        else:
            if abs(offset) > delta:
                continue
        kept.append(change)
    kept.sort(key=lambda c: (abs((c.created_at - t).total_seconds()), c.change_key))
    return CandidateSet(target=target, candidates=tuple(kept), window=window)


def score_pair(
    a: ChangeRecord,
    b: ChangeRecord,
    model: ForestModel,
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
) -> tuple[float, FeatureVector]:
    features = featurize_pair(a, b, provider, cache)
    return predict_proba(model, features), features


def rank_candidates(
    request: RankRequest,
    model: ForestModel,
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
    same_project: bool = True,
) -> list[RankedPrediction]:
    """Score every windowed candidate against the target and rank.

    Ordering is a deterministic total order: score descending, then time
    difference ascending, then change_key. An embedding failure on any
    candidate aborts the whole request rather than silently degrading the
    ranking; the raised error names the failing candidate.
    """
    selected = select_candidates(request.target, request.pool, request.window, same_project)
    scored: list[tuple[float, FeatureVector, ChangeRecord]] = []
    for candidate in selected.candidates:
        try:
            score, features = score_pair(request.target, candidate, model, provider, cache)
        except ProviderFailureError as exc:
            raise ProviderFailureError(f"candidate {candidate.change_key}: {exc}") from exc
        scored.append((score, features, candidate))
    scored.sort(key=lambda item: (-item[0], item[1].time_diff_hours, item[2].change_key))
    return [
        RankedPrediction(
            change_key=candidate.change_key,
            subject=candidate.subject,
            url=candidate.url,
            score=score,
            rank=rank,
            features=features,
        )
        for rank, (score, features, candidate) in enumerate(scored[: request.top_k], start=1)
    ]
