"""Training-set construction, baselines, and the ranking evaluation protocol.

Baselines mirror the static-similarity family this tool is measured
against: TF-IDF cosine over titles and descriptions (text_only), the mean
of the three path-overlap signals (file_only), and their plain average
(combined). The learned method ranks by forest probability.

Metrics are Recall@K and mean reciprocal rank, computed over the FULL
candidate ranking of every link-participating change, per time window.
"""
from __future__ import annotations

import logging
import math
import random
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .embedding import EmbeddingCache, EmbeddingProvider, tokenize
from .features import FeatureVector, featurize_pair, jaccard_files, norm_lcp, norm_lcs_suffix
from .forest import ForestModel, predict_proba
from .records import ChangeRecord, LinkLabel, WindowConfig, WindowMode
from .pipeline import select_candidates

logger = logging.getLogger(__name__)

METHODS = ("learned", "combined", "text_only", "file_only")

DEFAULT_WINDOWS = (2, 7, 14, 30)
DEFAULT_KS = (1, 2, 4, 6, 8, 10)


class EvalError(Exception):
    pass


class MissingChangeError(EvalError):
    def __init__(self, key: str):
        super().__init__(f"link references unknown change_key {key!r}")
        self.key = key


class UnknownMethodError(EvalError):
    def __init__(self, method: str):
        super().__init__(f"unknown method {method!r}; expected one of {METHODS}")
        self.method = method


@dataclass(frozen=True)
class EvalConfig:
    windows: tuple[int, ...] = DEFAULT_WINDOWS
    ks: tuple[int, ...] = DEFAULT_KS
    methods: tuple[str, ...] = METHODS
    negatives_per_positive: int = 5
    seed: int = 42
    window_mode: WindowMode = WindowMode.SYMMETRIC

    def __post_init__(self) -> None:
        if list(self.ks) != sorted(self.ks):
            raise ValueError("ks must be sorted ascending")
        if any(w < 1 for w in self.windows):
            raise ValueError("windows must be positive")
        for method in self.methods:
            if method not in METHODS:
                raise UnknownMethodError(method)
        if self.negatives_per_positive < 1:
            raise ValueError("negatives_per_positive must be positive")


@dataclass(frozen=True)
class EvalCell:
    method: str
    window_days: int
    mrr: float
    recall_at: dict[int, float]
    n_queries: int
    n_empty_candidate_queries: int

    def to_json_obj(self) -> dict:
        return {
            "method": self.method,
            "window_days": self.window_days,
            "mrr": self.mrr,
            "recall_at": {str(k): v for k, v in self.recall_at.items()},
            "n_queries": self.n_queries,
            "n_empty_candidate_queries": self.n_empty_candidate_queries,
        }


@dataclass(frozen=True)
class EvalReport:
    cells: tuple[EvalCell, ...]
    windows: tuple[int, ...]
    ks: tuple[int, ...]
    methods: tuple[str, ...]

    def cell(self, method: str, window_days: int) -> EvalCell:
        for cell in self.cells:
            if cell.method == method and cell.window_days == window_days:
                return cell
        raise KeyError((method, window_days))


# ---------------------------------------------------------------------------
# Metrics


def reciprocal_rank(ranked: Sequence[str], relevant: set[str]) -> float:
    """1/position of the first relevant key (1-based); 0 if none present."""
    for position, key in enumerate(ranked, start=1):
        if key in relevant:
            return 1.0 / position
    return 0.0


def recall_at_k(ranked: Sequence[str], relevant: set[str], k: int) -> float:
    """Per-query hit: 1.0 iff any relevant key appears in the top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return 1.0 if any(key in relevant for key in ranked[:k]) else 0.0


def aggregate_rankings(
    per_query: Sequence[tuple[Sequence[str], set[str]]], ks: Sequence[int]
) -> tuple[float, dict[int, float]]:
    """Mean RR and mean Recall@K over (ranking, relevant-set) queries."""
    n = len(per_query)
    if n == 0:
        return 0.0, {k: 0.0 for k in ks}
    mrr = sum(reciprocal_rank(ranked, relevant) for ranked, relevant in per_query) / n
    recall = {
        k: sum(recall_at_k(ranked, relevant, k) for ranked, relevant in per_query) / n
        for k in ks
    }
    return mrr, recall


# ---------------------------------------------------------------------------
# Baselines


@dataclass(frozen=True)
class TfidfStats:
    """Document frequencies over the evaluation corpus."""

    n_docs: int
    doc_freq: dict[str, int]

    def idf(self, token: str) -> float:
        return math.log((self.n_docs + 1) / (self.doc_freq.get(token, 0) + 1)) + 1.0


def build_corpus_stats(changes: Iterable[ChangeRecord]) -> TfidfStats:
    doc_freq: Counter[str] = Counter()
    n_docs = 0
    for change in changes:
        n_docs += 1
        doc_freq.update(set(tokenize(change.text())))
    return TfidfStats(n_docs=n_docs, doc_freq=dict(doc_freq))


def _tfidf_vector(change: ChangeRecord, stats: TfidfStats) -> dict[str, float]:
    return {
        token: count * stats.idf(token)
        for token, count in Counter(tokenize(change.text())).items()
    }


def tfidf_cosine(a: ChangeRecord, b: ChangeRecord, stats: TfidfStats) -> float:
    """Cosine over sparse tf-idf vectors; 0 if either document is empty."""
    va = _tfidf_vector(a, stats)
    vb = _tfidf_vector(b, stats)
    if not va or not vb:
        return 0.0
    dot = sum(weight * vb[token] for token, weight in va.items() if token in vb)
    na = math.sqrt(sum(w * w for w in va.values()))
    nb = math.sqrt(sum(w * w for w in vb.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return max(0.0, min(1.0, dot / (na * nb)))


def _file_similarity(a: ChangeRecord, b: ChangeRecord) -> float:
    if not a.files or not b.files:
        lcp = lcs = 0.0
    else:
        lcp = max(norm_lcp(f, g) for f in a.files for g in b.files)
        lcs = max(norm_lcs_suffix(f, g) for f in a.files for g in b.files)
    jac = jaccard_files(set(a.files), set(b.files))
    return (lcp + lcs + jac) / 3.0


def baseline_score(method: str, a: ChangeRecord, b: ChangeRecord, stats: TfidfStats) -> float:
    if method == "text_only":
        return tfidf_cosine(a, b, stats)
    if method == "file_only":
        return _file_similarity(a, b)
    if method == "combined":
        return (tfidf_cosine(a, b, stats) + _file_similarity(a, b)) / 2.0
    raise UnknownMethodError(method)


# ---------------------------------------------------------------------------
# Training-set construction


def build_training_pairs(
    changes: Sequence[ChangeRecord],
    links: Sequence[LinkLabel],
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
    window_days: int = 14,
    negatives_per_positive: int = 5,
    seed: int = 42,
    same_project: bool = True,
) -> list[tuple[FeatureVector, int]]:
    """Labeled feature vectors: in-window linked pairs plus sampled negatives.

    Negatives are drawn uniformly (seeded) from each positive's own window
    candidates, excluding anything linked to the anchor: in-window negatives
    are the hard cases the deployed ranker actually faces. Positives whose
    members fall outside the window, and anchors with no negatives
    available, are skipped with a logged count.
    """
    by_key = {c.change_key: c for c in changes}
    partners: dict[str, set[str]] = {}
    for link in links:
        for key in (link.a, link.b):
            if key not in by_key:
                raise MissingChangeError(key)
        partners.setdefault(link.a, set()).add(link.b)
        partners.setdefault(link.b, set()).add(link.a)

    window = WindowConfig(days=window_days, mode=WindowMode.SYMMETRIC)
    rng = random.Random(seed)
    pairs: list[tuple[FeatureVector, int]] = []
    out_of_window = 0
    without_negatives = 0
    for link in sorted(links):
        a, b = by_key[link.a], by_key[link.b]
        if abs((a.created_at - b.created_at).total_seconds()) > window.seconds:
            out_of_window += 1
            continue
        pairs.append((featurize_pair(a, b, provider, cache), 1))
        candidates = select_candidates(a, changes, window, same_project).candidates
        eligible = [c for c in candidates if c.change_key not in partners.get(a.change_key, set())]
        if not eligible:
            without_negatives += 1
            logger.warning("no negatives available in window for %s", a.change_key)
            continue
        drawn = rng.sample(eligible, min(negatives_per_positive, len(eligible)))
        pairs.extend((featurize_pair(a, c, provider, cache), 0) for c in drawn)

    if out_of_window:
        logger.warning("%d linked pairs fall outside the %d-day window", out_of_window, window_days)
    if without_negatives:
        logger.warning("%d anchors had no negatives available", without_negatives)
    return pairs


# ---------------------------------------------------------------------------
# Evaluation protocol


def _rank_keys(scored: list[tuple[float, float, str]]) -> list[str]:
    # (score desc, time_diff asc, key asc) — same total order as the pipeline
    scored.sort(key=lambda item: (-item[0], item[1], item[2]))
    return [key for _, _, key in scored]


def run_evaluation(
    changes: Sequence[ChangeRecord],
    links: Sequence[LinkLabel],
    model: ForestModel | None,
    provider: EmbeddingProvider,
    config: EvalConfig = EvalConfig(),
    cache: EmbeddingCache | None = None,
    same_project: bool = True,
) -> EvalReport:
    """Rank every link-participating change's full candidate list per method.

    Queries with empty candidate sets score RR = 0 and recall 0 and are
    counted in the report. Deterministic for a fixed seed and corpus.
    """
    if "learned" in config.methods and model is None:
        raise EvalError("the learned method requires a trained model")
    by_key = {c.change_key: c for c in changes}
    relevant_by_key: dict[str, set[str]] = {}
    for link in links:
        for key in (link.a, link.b):
            if key not in by_key:
                raise MissingChangeError(key)
        relevant_by_key.setdefault(link.a, set()).add(link.b)
        relevant_by_key.setdefault(link.b, set()).add(link.a)

    queries = sorted(relevant_by_key)
    stats = build_corpus_stats(changes) if set(config.methods) - {"learned"} else None
    if cache is None:
        cache = EmbeddingCache()

    cells: list[EvalCell] = []
    for window_days in config.windows:
        window = WindowConfig(days=window_days, mode=config.window_mode)
        rankings: dict[str, list[tuple[Sequence[str], set[str]]]] = {
            method: [] for method in config.methods
        }
        n_empty = 0
        for query_key in queries:
            target = by_key[query_key]
            candidates = select_candidates(target, changes, window, same_project).candidates
            relevant = relevant_by_key[query_key]
            if not candidates:
                n_empty += 1
                for method in config.methods:
                    rankings[method].append(((), relevant))
                continue
            time_diffs = {
                c.change_key: abs((c.created_at - target.created_at).total_seconds()) / 3600.0
                for c in candidates
            }
            for method in config.methods:
                if method == "learned":
                    scored = [
                        (
                            predict_proba(model, featurize_pair(target, c, provider, cache)),
                            time_diffs[c.change_key],
                            c.change_key,
                        )
                        for c in candidates
                    ]
                else:
                    assert stats is not None
                    scored = [
                        (
                            baseline_score(method, target, c, stats),
                            time_diffs[c.change_key],
                            c.change_key,
                        )
                        for c in candidates
                    ]
                rankings[method].append((_rank_keys(scored), relevant))

        for method in config.methods:
            mrr, recall = aggregate_rankings(rankings[method], config.ks)
            cells.append(
                EvalCell(
                    method=method,
                    window_days=window_days,
                    mrr=mrr,
                    recall_at=recall,
                    n_queries=len(queries),
                    n_empty_candidate_queries=n_empty,
                )
            )

    return EvalReport(
        cells=tuple(cells),
        windows=tuple(config.windows),
        ks=tuple(config.ks),
        methods=tuple(config.methods),
    )
