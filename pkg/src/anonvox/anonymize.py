"""Embedding-space anonymization by farthest-pool averaging.

Each source vector is replaced by the mean of ``n_select`` pool vectors drawn
uniformly without replacement from the ``n_farthest`` pool entries ranked
most dissimilar under the verification model. Random streams are derived
from (seed, subset_tag, speaker-or-utterance id), so corpora anonymized with
different subset tags carry different pseudo-speakers without shared state.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .embeddings import Corpus, Embedding
from .plda import PldaModel, _ScoreCache

ASSIGNMENTS = ("per_speaker", "per_utterance")


@dataclass(frozen=True)
class AnonConfig:
    n_farthest: int = 200
    n_select: int = 100
    assignment: str = "per_speaker"
    seed: int = 0
    subset_tag: str = ""
    same_gender_pool: bool = False

    def __post_init__(self):
        if self.n_select < 1:
            raise ValueError("n_select must be positive")
        if self.n_select > self.n_farthest:
            raise ValueError(
                f"n_select ({self.n_select}) must not exceed n_farthest ({self.n_farthest})"
            )
        if self.assignment not in ASSIGNMENTS:
            raise ValueError(f"assignment must be one of {ASSIGNMENTS}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


def derive_stream(seed: int, subset_tag: str, key: str) -> np.random.Generator:
    """Deterministic per-key random stream; stable across platforms."""
    digest = hashlib.sha256(f"{subset_tag}\x1f{key}".encode("utf-8")).digest()
    entropy = int.from_bytes(digest[:16], "little")
    return np.random.default_rng(np.random.SeedSequence([seed, entropy]))


def tie_break_ranking(distances, utt_ids) -> list[int]:
    """Indices ordered by descending distance, ties by ascending utt_id."""
    d = np.asarray(distances, dtype=np.float64)
    if not np.all(np.isfinite(d)):
        raise ValueError("distances must be finite")
    if len(utt_ids) != d.size:
        raise ValueError("distances and utt_ids must have equal length")
    return sorted(range(d.size), key=lambda i: (-d[i], utt_ids[i]))


def _pool_view(pool: Corpus, cfg: AnonConfig, gender: str):
    records = pool.records
    if cfg.same_gender_pool:
        records = tuple(r for r in records if r.gender == gender)
    if not records:
        raise ValueError("anonymization pool is empty")
    if cfg.n_farthest > len(records):
        raise ValueError(
            f"n_farthest ({cfg.n_farthest}) exceeds pool size ({len(records)})"
        )
    ids = [r.utt_id for r in records]
    matrix = np.stack([r.vector for r in records])
    return ids, matrix


def _pseudo_vector(source_vec, ids, matrix, cache, cfg, rng) -> np.ndarray:
    distances = -cache.score_many(np.asarray(source_vec, dtype=np.float64), matrix)
    order = tie_break_ranking(distances, ids)
    top = np.array(order[: cfg.n_farthest])
    chosen = rng.choice(cfg.n_farthest, size=cfg.n_select, replace=False)
    # pool order canonicalizes summation, so the mean is selection-order free
    selected = np.sort(top[chosen])
    return matrix[selected].mean(axis=0)


def anonymize_embedding(
    source: Embedding,
    pool: Corpus,
    model: PldaModel,
    cfg: AnonConfig,
    stream: np.random.Generator,
) -> Embedding:
    """Replace one embedding's vector; utt/speaker/gender labels are kept."""
    ids, matrix = _pool_view(pool, cfg, source.gender)
    if matrix.shape[1] != model.dim or source.dim != model.dim:
        raise ValueError("pool or source dimension does not match model")
    cache = _ScoreCache(model)
    vec = _pseudo_vector(source.vector, ids, matrix, cache, cfg, stream)
    return Embedding(source.utt_id, source.spk_id, source.gender, vec)


def anonymize_corpus(
    corpus: Corpus, pool: Corpus, model: PldaModel, cfg: AnonConfig
) -> Corpus:
    """Anonymize every record, keyed per speaker or per utterance.

    per_speaker ranks against the speaker's mean embedding and assigns the
    identical pseudo-vector to all of that speaker's utterances.
    """
    if len(corpus) == 0:
        raise ValueError("cannot anonymize an empty corpus")
    cache = _ScoreCache(model)
    if corpus.dim != model.dim:
        raise ValueError("corpus dimension does not match model")

    out: list[Embedding] = []
    if cfg.assignment == "per_speaker":
        pseudo: dict[str, np.ndarray] = {}
        for spk, recs in corpus.by_speaker().items():
            ids, matrix = _pool_view(pool, cfg, recs[0].gender)
            source = np.mean([r.vector for r in recs], axis=0)
            rng = derive_stream(cfg.seed, cfg.subset_tag, spk)
            pseudo[spk] = _pseudo_vector(source, ids, matrix, cache, cfg, rng)
        out = [
            Embedding(r.utt_id, r.spk_id, r.gender, pseudo[r.spk_id])
            for r in corpus.records
        ]
    else:
        for r in corpus.records:
            ids, matrix = _pool_view(pool, cfg, r.gender)
            rng = derive_stream(cfg.seed, cfg.subset_tag, r.utt_id)
            vec = _pseudo_vector(r.vector, ids, matrix, cache, cfg, rng)
            out.append(Embedding(r.utt_id, r.spk_id, r.gender, vec))
    return Corpus(name=corpus.name, records=tuple(out), subset=corpus.subset)


def with_subset_tag(cfg: AnonConfig, tag: str) -> AnonConfig:
    return replace(cfg, subset_tag=tag)
