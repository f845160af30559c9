"""Two-covariance Gaussian speaker model.

The generative model is ``x = mu + y + eps`` with speaker offset
``y ~ N(0, between)`` and per-utterance noise ``eps ~ N(0, within)``.
Verification scores are the exact log-likelihood ratio between the
same-speaker hypothesis (shared ``y``) and the different-speaker hypothesis
(independent ``y``):

    LLR(x1, x2) = log N([x1;x2]; [mu;mu], [[T, B], [B, T]])
                - log N([x1;x2]; [mu;mu], [[T, 0], [0, T]])

with ``T = between + within``. Training is expectation-maximization on
speaker-labeled corpora.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import Corpus, Embedding, ScoreEntry, ScoreSet, TrialList

_MODEL_MAGIC = b"PLD1"
_LOG_2PI = float(np.log(2.0 * np.pi))


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class PldaModel:
    """Global mean plus between-speaker and within-speaker covariances."""

    mu: np.ndarray
    between: np.ndarray
    within: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        b = np.asarray(self.between, dtype=np.float64)
        w = np.asarray(self.within, dtype=np.float64)
        d = mu.shape[0]
        if mu.ndim != 1 or b.shape != (d, d) or w.shape != (d, d):
            raise ValueError("model shapes inconsistent: mu (D,), between/within (D, D)")
        for name, m in (("between", b), ("within", w)):
            if not np.all(np.isfinite(m)):
                raise ValueError(f"{name} covariance has non-finite entries")
            if not np.allclose(m, m.T, atol=1e-10):
                raise ValueError(f"{name} covariance is not symmetric")
        if not np.all(np.isfinite(mu)):
            raise ValueError("mu has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(b))))
        if float(np.min(np.linalg.eigvalsh(0.5 * (b + b.T)))) < -1e-8 * scale:
            raise ValueError("between covariance must be positive semi-definite")
        if float(np.min(np.linalg.eigvalsh(0.5 * (w + w.T)))) <= 0.0:
            raise ValueError("within covariance must be positive definite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "between", _symmetrize(b))
        object.__setattr__(self, "within", _symmetrize(w))

    @property
    def dim(self) -> int:
        return int(self.mu.shape[0])


@dataclass(frozen=True)
class PreprocessConfig:
    center: bool = False
    length_normalize: bool = False


def preprocess(corpus: Corpus, config: PreprocessConfig) -> Corpus:
    """Apply mean centering and/or length normalization.

    Centering subtracts the corpus's own mean. Length normalization scales
    every vector to Euclidean norm sqrt(D). With both flags set, centering
    runs first.
    """
    if len(corpus) == 0:
        raise ValueError("cannot preprocess an empty corpus")
    x = corpus.matrix()
    if config.center:
        x = x - x.mean(axis=0)
    if config.length_normalize:
        norms = np.linalg.norm(x, axis=1)
        if np.any(norms == 0.0):
            bad = corpus.records[int(np.argmin(norms))].utt_id
            raise ValueError(f"cannot length-normalize zero vector {bad!r}")
        x = x * (np.sqrt(x.shape[1]) / norms)[:, None]
    records = tuple(
        Embedding(r.utt_id, r.spk_id, r.gender, x[i]) for i, r in enumerate(corpus.records)
    )
    return Corpus(name=corpus.name, records=records, subset=corpus.subset)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _speaker_stats(corpus: Corpus):
    """Per-speaker counts and means plus the pooled within-speaker scatter."""
    groups = corpus.by_speaker()
    speakers = sorted(groups)
    d = corpus.dim
    counts = np.array([len(groups[s]) for s in speakers], dtype=np.int64)
    means = np.stack([np.mean([r.vector for r in groups[s]], axis=0) for s in speakers])
    scatter = np.zeros((d, d))
    for i, s in enumerate(speakers):
        dev = np.stack([r.vector for r in groups[s]]) - means[i]
        scatter += dev.T @ dev
    return speakers, counts, means, scatter


def _em_step(mu, b, w, counts, means, scatter, grand_mean, n_total):
    d = mu.shape[0]
    n_speakers = counts.shape[0]
    eye = np.eye(d)

    zbar = means - mu
    yhat = np.empty_like(means)
    ry = np.zeros((d, d))
    post_cov_weighted = np.zeros((d, d))
    for n in np.unique(counts):
        idx = np.flatnonzero(counts == n)
        m_noise = b + w / float(n)
        gain = np.linalg.solve(m_noise, b).T  # B (B + W/n)^-1
        post_cov = _symmetrize(b - gain @ b)
        yhat[idx] = zbar[idx] @ gain.T
        ry += len(idx) * post_cov
        post_cov_weighted += float(n) * len(idx) * post_cov
    ry += yhat.T @ yhat

    mu_new = grand_mean - (counts[:, None] * yhat).sum(axis=0) / float(n_total)
    b_new = _symmetrize(ry / float(n_speakers))

    resid = means - mu_new - yhat
    w_new = scatter + (resid * counts[:, None]).T @ resid + post_cov_weighted
    w_new = _symmetrize(w_new / float(n_total))

    trace = float(np.trace(w_new))
    if trace < 1e-12:
        warnings.warn("within-speaker covariance collapsed; flooring with 1e-6 I")
        w_new = w_new + 1e-6 * eye
    else:
        w_new = w_new + (1e-9 * trace / d) * eye
    return mu_new, b_new, w_new


def train_plda(corpus: Corpus, iterations: int) -> PldaModel:
    """Fit the two-covariance model by EM.

    Initialization: mu = data mean, between = within = half the total data
    covariance (within gets a 1e-6 I ridge). ``iterations=0`` returns the
    initialization. The total data log-likelihood is non-decreasing across
    iterations.
    """
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    if len(corpus) == 0:
        raise ValueError("cannot train on an empty corpus")
    _, counts, means, scatter = _speaker_stats(corpus)
    if counts.shape[0] < 2:
        raise ValueError("training requires at least two speakers")

    x = corpus.matrix()
    n_total, d = x.shape
    grand_mean = x.mean(axis=0)
    centered = x - grand_mean
    total_cov = centered.T @ centered / float(n_total)
    if float(np.trace(total_cov)) < 1e-12:
        warnings.warn("degenerate corpus (all vectors identical); covariances floored")

    mu = grand_mean.copy()
    b = 0.5 * total_cov
    w = 0.5 * total_cov + 1e-6 * np.eye(d)
    for _ in range(iterations):
        mu, b, w = _em_step(mu, b, w, counts, means, scatter, grand_mean, n_total)
    return PldaModel(mu=mu, between=b, within=w)


def log_likelihood(model: PldaModel, corpus: Corpus) -> float:
    """Exact marginal log-likelihood of a speaker-labeled corpus.

    For a speaker with n utterances the stacked covariance block-diagonalizes
    into one (within + n between) block for the speaker mean and n-1 within
    blocks for the deviations.
    """
    _, counts, means, scatter = _speaker_stats(corpus)
    d = model.dim
    w = model.within
    b = model.between
    sign_w, logdet_w = np.linalg.slogdet(w)
    if sign_w <= 0:
        raise ValueError("within covariance must be positive definite")

    ll = -0.5 * float(np.trace(np.linalg.solve(w, scatter)))
    for n in np.unique(counts):
        idx = np.flatnonzero(counts == n)
        a = w + float(n) * b
        sign_a, logdet_a = np.linalg.slogdet(a)
        if sign_a <= 0:
            raise ValueError("within + n * between must be positive definite")
        zbar = means[idx] - model.mu
        quad = float(np.einsum("ij,ij->", zbar, np.linalg.solve(a, zbar.T).T))
        ll += -0.5 * (
            len(idx) * (n * d * _LOG_2PI + logdet_a + (n - 1) * logdet_w)
            + float(n) * quad
        )
    return float(ll)


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------


class _ScoreCache:
    """Precomputed quadratic forms for repeated scoring against one model.

    With T = between + within, the LLR reduces to

        const - 0.25 * [u' (Q + G) u  +  v' (Q - G) v]

    where u = (x1 - mu) + (x2 - mu), v = (x1 - mu) - (x2 - mu),
    Q = (T - B T^-1 B)^-1 - T^-1 and G the off-diagonal block of the
    same-speaker precision. The u/v form makes score(a, b) == score(b, a)
    bit-exact.
    """

    __slots__ = ("mu", "q_plus", "q_minus", "const", "dim")

    def __init__(self, model: PldaModel):
        d = model.dim
        t = model.between + model.within
        eye = np.eye(d)
        try:
            t_inv = np.linalg.solve(t, eye)
        except np.linalg.LinAlgError:
            raise ValueError("between + within must be invertible") from None
        schur = t - model.between @ t_inv @ model.between
        lam = np.linalg.solve(schur, eye)
        gamma = _symmetrize(-t_inv @ model.between @ lam)
        q = _symmetrize(lam - t_inv)
        sign_s, logdet_s = np.linalg.slogdet(schur)
        sign_t, logdet_t = np.linalg.slogdet(t)
        if sign_s <= 0 or sign_t <= 0:
            raise ValueError("model covariances yield a non-PD total covariance")
        self.mu = model.mu
        self.q_plus = q + gamma
        self.q_minus = q - gamma
        self.const = -0.5 * (logdet_s - logdet_t)
        self.dim = d

    def score_many(self, x: np.ndarray, ys: np.ndarray) -> np.ndarray:
        xc = x - self.mu
        yc = ys - self.mu
        u = yc + xc
        v = xc - yc
        quad = np.einsum("ij,jk,ik->i", u, self.q_plus, u)
        quad = quad + np.einsum("ij,jk,ik->i", v, self.q_minus, v)
        return self.const - 0.25 * quad


def _as_vector(model: PldaModel, vec, what: str) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    if v.shape != (model.dim,):
        raise ValueError(f"{what} has shape {v.shape}, model expects ({model.dim},)")
    return v


def score(model: PldaModel, enroll_vec, test_vec) -> float:
    """Log-likelihood ratio for a single pair; symmetric in its arguments."""
    a = _as_vector(model, enroll_vec, "enrollment vector")
    b = _as_vector(model, test_vec, "test vector")
    cache = _ScoreCache(model)
    return float(cache.score_many(a, b[None, :])[0])


def plda_distance(model: PldaModel, a, b) -> float:
    """Dissimilarity used by the embedding anonymizer: the negated LLR."""
    return -score(model, a, b)


def enroll_speaker(model: PldaModel, embeddings) -> np.ndarray:
    """Enrollment vector: arithmetic mean of the speaker's embeddings."""
    vectors = [_as_vector(model, e.vector, f"embedding {e.utt_id!r}") for e in embeddings]
    if not vectors:
        raise ValueError("cannot enroll a speaker with no embeddings")
    return np.mean(vectors, axis=0)


def score_trials(
    model: PldaModel,
    enroll: Corpus,
    test: Corpus,
    trials: TrialList,
    aggregate_embeddings: bool = True,
) -> ScoreSet:
    """Score every trial entry via speaker enrollment then pairwise LLR.

    By default a speaker's enrollment embeddings are averaged into one
    vector before scoring; with ``aggregate_embeddings=False`` each
    enrollment utterance is scored separately and the LLRs are averaged.
    """
    if enroll.dim != model.dim or test.dim != model.dim:
        raise ValueError("corpus dimension does not match model dimension")
    enroll_groups = enroll.by_speaker()
    test_by_utt = test.by_utt()
    cache = _ScoreCache(model)

    by_spk: dict[str, list[int]] = {}
    for i, entry in enumerate(trials.entries):
        if entry.enroll_spk not in enroll_groups:
            raise ValueError(f"unknown enrollment speaker {entry.enroll_spk!r} in trial list")
        if entry.test_utt not in test_by_utt:
            raise ValueError(f"unknown test utterance {entry.test_utt!r} in trial list")
        by_spk.setdefault(entry.enroll_spk, []).append(i)

    scores = np.empty(len(trials.entries))
    for spk, rows in by_spk.items():
        ys = np.stack([test_by_utt[trials.entries[i].test_utt].vector for i in rows])
        if aggregate_embeddings:
            scores[rows] = cache.score_many(enroll_speaker(model, enroll_groups[spk]), ys)
        else:
            per_utt = np.stack(
                [cache.score_many(rec.vector, ys) for rec in enroll_groups[spk]]
            )
            scores[rows] = per_utt.mean(axis=0)

    entries = tuple(
        ScoreEntry(e.enroll_spk, e.test_utt, float(scores[i]), e.label)
        for i, e in enumerate(trials.entries)
    )
    return ScoreSet(entries)


# ---------------------------------------------------------------------------
# model file I/O
# ---------------------------------------------------------------------------


def save_model(model: PldaModel, path) -> None:
    d = model.dim
    parts = [
        _MODEL_MAGIC,
        struct.pack("<I", d),
        np.ascontiguousarray(model.mu, dtype="<f8").tobytes(),
        np.ascontiguousarray(model.between, dtype="<f8").tobytes(),
        np.ascontiguousarray(model.within, dtype="<f8").tobytes(),
    ]
    Path(path).write_bytes(b"".join(parts))


def load_model(path) -> PldaModel:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 8 or blob[:4] != _MODEL_MAGIC:
        raise ValueError(f"{path}: not a model file (bad magic)")
    (d,) = struct.unpack_from("<I", blob, 4)
    expected = 8 + 8 * (d + 2 * d * d)
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for D={d}, got {len(blob)}")
    mu = np.frombuffer(blob, dtype="<f8", count=d, offset=8)
    b = np.frombuffer(blob, dtype="<f8", count=d * d, offset=8 + 8 * d).reshape(d, d)
    w = np.frombuffer(blob, dtype="<f8", count=d * d, offset=8 + 8 * d * (1 + d)).reshape(d, d)
    return PldaModel(mu=mu.copy(), between=b.copy(), within=w.copy())
