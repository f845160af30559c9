"""Speaker anonymization and verification evaluation toolkit."""

__version__ = "0.1.0"

from .anonymize import AnonConfig, anonymize_corpus, anonymize_embedding, tie_break_ranking
from .embeddings import (
    Corpus,
    Embedding,
    ScoreEntry,
    ScoreSet,
    TrialEntry,
    TrialList,
    TrialPolicy,
    load_embeddings,
    load_scores,
    load_trials,
    make_trials,
    save_embeddings,
    save_scores,
    save_trials,
)
from .formant import LpcFrame, ShiftConfig, WaveBuffer, anonymize_wav, lpc_analyze, warp_poles
from .harness import Condition, EvalRun, render_report, run_condition
from .metrics import (
    DetCurve,
    MetricsReport,
    WerResult,
    compute_cllr,
    compute_eer,
    compute_metrics,
    compute_min_cllr,
    det_points,
    wer,
)
from .plda import (
    PldaModel,
    PreprocessConfig,
    enroll_speaker,
    load_model,
    log_likelihood,
    plda_distance,
    preprocess,
    save_model,
    score,
    score_trials,
    train_plda,
)
from .synthgen import GenSpec, default_spec, generate, split
