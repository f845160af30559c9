import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anonvox import (
    Corpus,
    Embedding,
    TrialList,
    TrialEntry,
    TrialPolicy,
    load_embeddings,
    load_scores,
    load_trials,
    make_trials,
    save_embeddings,
    save_scores,
    save_trials,
    ScoreEntry,
    ScoreSet,
)


def _corpus(spec, dim=2, name="c"):
    """spec: iterable of (utt, spk, gender, vector-or-None)."""
    rng = np.random.default_rng(0)
    records = []
    for utt, spk, gender, vec in spec:
        if vec is None:
            vec = rng.standard_normal(dim)
        records.append(Embedding(utt, spk, gender, vec))
    return Corpus(name, tuple(records))


class TestEmbeddingValidation:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            Embedding("u1", "s1", "F", [0.0, np.inf])

    def test_rejects_bad_gender(self):
        with pytest.raises(ValueError, match="gender"):
            Embedding("u1", "s1", "X", [0.0])

    def test_vector_is_immutable(self):
        e = Embedding("u1", "s1", "F", [1.0, 2.0])
        with pytest.raises(ValueError):
            e.vector[0] = 3.0

    def test_corpus_rejects_duplicate_utt(self):
        with pytest.raises(ValueError, match="duplicate"):
            _corpus([("u1", "s1", "F", None), ("u1", "s2", "F", None)])

    def test_corpus_rejects_mixed_dims(self):
        with pytest.raises(ValueError, match="inconsistent"):
            Corpus(
                "c",
                (Embedding("u1", "s1", "F", [1.0]), Embedding("u2", "s1", "F", [1.0, 2.0])),
            )

    def test_corpus_rejects_conflicting_speaker_gender(self):
        with pytest.raises(ValueError, match="conflicting genders"):
            _corpus([("u1", "s1", "F", None), ("u2", "s1", "M", None)])


class TestTextFormat:
    def test_single_line(self, tmp_path):
        path = tmp_path / "one.txt"
        path.write_text("u1 s1 F 0.0 1.0\n")
        corpus = load_embeddings(path, "text")
        assert len(corpus) == 1 and corpus.dim == 2
        rec = corpus.records[0]
        assert (rec.utt_id, rec.spk_id, rec.gender) == ("u1", "s1", "F")
        np.testing.assert_array_equal(rec.vector, [0.0, 1.0])

    def test_empty_file_errors(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("")
        with pytest.raises(ValueError, match="empty corpus"):
            load_embeddings(path, "text")

    def test_comments_ignored(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("# header\nu1 s1 M 1.5\n")
        assert len(load_embeddings(path, "text")) == 1

    def test_parse_error_names_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("u1 s1 F 1.0\nu2 s1 F nope\n")
        with pytest.raises(ValueError, match=":2:"):
            load_embeddings(path, "text")

    def test_dimension_error_names_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("u1 s1 F 1.0 2.0\nu2 s1 F 1.0\n")
        with pytest.raises(ValueError, match="dimension mismatch"):
            load_embeddings(path, "text")

    def test_decimal_rendering_is_positional(self, tmp_path):
        corpus = _corpus([("u1", "s1", "F", [0.5, 5e-4])], dim=2)
        path = tmp_path / "r.txt"
        save_embeddings(corpus, path, "text")
        text = path.read_text()
        assert "0.5" in text and "e" not in text.split(" ", 3)[3].lower()

    def test_text_round_trip_nine_digits(self, tmp_path):
        rng = np.random.default_rng(5)
        corpus = _corpus(
            [(f"u{i}", f"s{i % 3}", "F", rng.standard_normal(4) * 10.0**rng.integers(-4, 4))
             for i in range(20)],
            dim=4,
        )
        path = tmp_path / "r.txt"
        save_embeddings(corpus, path, "text")
        loaded = load_embeddings(path, "text")
        np.testing.assert_allclose(loaded.matrix(), corpus.matrix(), rtol=1e-8)


class TestBinaryFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(17)
        corpus = _corpus(
            [(f"utt{i:03d}", f"spk{i % 7}", "FM"[(i % 7) % 2], rng.standard_normal(16))
             for i in range(100)],
            dim=16,
        )
        path = tmp_path / "c.xvec"
        save_embeddings(corpus, path, "binary")
        loaded = load_embeddings(path, "binary")
        assert [r.utt_id for r in loaded.records] == [r.utt_id for r in corpus.records]
        assert [r.spk_id for r in loaded.records] == [r.spk_id for r in corpus.records]
        assert [r.gender for r in loaded.records] == [r.gender for r in corpus.records]
        assert np.array_equal(loaded.matrix(), corpus.matrix())  # bit exact

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.xvec"
        path.write_bytes(b"NOPE" + b"\0" * 16)
        with pytest.raises(ValueError, match="magic"):
            load_embeddings(path, "binary")

    def test_truncated_file(self, tmp_path):
        corpus = _corpus([("u1", "s1", "F", None)])
        path = tmp_path / "t.xvec"
        save_embeddings(corpus, path, "binary")
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(ValueError):
            load_embeddings(path, "binary")

    def test_save_empty_corpus_errors(self, tmp_path):
        with pytest.raises(ValueError, match="empty"):
            save_embeddings(Corpus("c", ()), tmp_path / "e.xvec", "binary")


class TestMakeTrials:
    def test_exhaustive_counts(self):
        enroll = _corpus(
            [("e1", "s1", "F", None), ("e2", "s2", "F", None)], dim=2, name="enroll"
        )
        trial = _corpus(
            [("t1", "s1", "F", None), ("t2", "s1", "F", None),
             ("t3", "s2", "F", None), ("t4", "s2", "F", None)],
            dim=2,
            name="trial",
        )
        trials = make_trials(enroll, trial)
        assert trials.n_target == 4
        assert trials.n_nontarget == 4

    def test_single_speaker_no_nontargets(self):
        enroll = _corpus([("e1", "s1", "F", None)])
        trial = _corpus([("t1", "s1", "F", None), ("t2", "s1", "F", None)])
        trials = make_trials(enroll, trial)
        assert trials.n_target == 2 and trials.n_nontarget == 0

    def test_cross_gender_blocked_by_policy(self):
        enroll = _corpus([("e1", "s1", "F", None), ("e2", "s2", "M", None)])
        trial = _corpus([("t1", "s1", "F", None), ("t2", "s2", "M", None)])
        trials = make_trials(enroll, trial, TrialPolicy(same_gender_only=True))
        assert trials.n_nontarget == 0

    def test_enrollment_overlap_excluded_from_targets(self):
        enroll = _corpus([("x1", "s1", "F", None), ("e2", "s2", "F", None)])
        trial = _corpus([("x1", "s1", "F", None), ("t2", "s2", "F", None)])
        with pytest.warns(UserWarning, match="no trial utterances"):
            trials = make_trials(enroll, trial)
        assert all(e.test_utt != "x1" or e.label != "target" for e in trials.entries)
        assert trials.n_target == 1

    def test_subsample_deterministic(self):
        enroll = _corpus([(f"e{i}", f"s{i}", "F", None) for i in range(4)])
        trial = _corpus([(f"t{i}", f"s{i % 4}", "F", None) for i in range(12)])
        policy = TrialPolicy(max_nontargets=10, seed=3)
        first = make_trials(enroll, trial, policy)
        second = make_trials(enroll, trial, policy)
        assert first == second
        assert first.n_nontarget == 10

    def test_labels_partition_entries(self):
        enroll = _corpus([("e1", "s1", "F", None), ("e2", "s2", "F", None)])
        trial = _corpus([("t1", "s1", "F", None), ("t2", "s2", "F", None)])
        trials = make_trials(enroll, trial)
        pairs = [(e.enroll_spk, e.test_utt) for e in trials.entries]
        assert len(set(pairs)) == len(pairs)
        assert trials.n_target + trials.n_nontarget == len(trials)

    def test_exhaustive_target_count_matches_enumeration(self):
        rng = np.random.default_rng(8)
        enroll = _corpus(
            [(f"e{s}_{u}", f"s{s}", "FM"[s % 2], None) for s in range(5) for u in range(2)],
            dim=3,
        )
        speakers = [int(rng.integers(0, 5)) for _ in range(30)]
        trial = _corpus(
            [(f"t{i}", f"s{s}", "FM"[s % 2], None) for i, s in enumerate(speakers)],
            dim=3,
        )
        trials = make_trials(enroll, trial)
        expected_targets = sum(
            sum(1 for r in trial.records if r.spk_id == s) for s in enroll.by_speaker()
        )
        assert trials.n_target == expected_targets


class TestTrialAndScoreFiles:
    def test_trial_round_trip(self, tmp_path):
        trials = TrialList(
            (TrialEntry("s1", "t1", "target"), TrialEntry("s1", "t2", "nontarget"))
        )
        path = tmp_path / "trials.txt"
        save_trials(trials, path)
        assert load_trials(path) == trials

    def test_score_round_trip_six_decimals(self, tmp_path):
        scores = ScoreSet(
            (ScoreEntry("s1", "t1", 1.23456789), ScoreEntry("s2", "t2", -0.5))
        )
        path = tmp_path / "scores.txt"
        save_scores(scores, path)
        loaded = load_scores(path)
        assert loaded.entries[0].score == pytest.approx(1.234568, abs=5e-7)
        assert "1.234568" in path.read_text()

    def test_with_labels_from(self):
        trials = TrialList((TrialEntry("s1", "t1", "target"),))
        scores = ScoreSet((ScoreEntry("s1", "t1", 0.25),))
        labeled = scores.with_labels_from(trials)
        assert labeled.entries[0].label == "target"

    def test_with_labels_missing_pair(self):
        trials = TrialList((TrialEntry("s1", "t1", "target"),))
        scores = ScoreSet((ScoreEntry("s9", "t9", 0.25),))
        with pytest.raises(ValueError, match="not present"):
            scores.with_labels_from(trials)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(-1e6, 1e6, allow_nan=False),
            st.floats(-1e6, 1e6, allow_nan=False),
        ),
        min_size=1,
        max_size=20,
    )
)
def test_binary_round_trip_property(tmp_path_factory, vecs):
    records = tuple(
        Embedding(f"u{i}", f"s{i % 3}", "M", np.array(v)) for i, v in enumerate(vecs)
    )
    corpus = Corpus("prop", records)
    path = tmp_path_factory.mktemp("rt") / "c.xvec"
    save_embeddings(corpus, path, "binary")
    loaded = load_embeddings(path, "binary")
    assert np.array_equal(loaded.matrix(), corpus.matrix())
