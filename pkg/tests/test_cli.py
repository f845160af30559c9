import pytest

from anonvox.cli import main
from anonvox.formant import read_wav, write_wav

from conftest import synth_vowel


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    code = run_cli(
        "synth",
        "--out-dir", str(out),
        "--n-speakers", "24",
        "--utts-per-speaker", "6",
        "--dim", "8",
        "--seed", "3",
        "--fractions", "0.3,0.4,0.1,0.2",
        "--model-out", str(out / "truth.plda"),
    )
    assert code == 0
    return out


@pytest.fixture(scope="module")
def trained(synth_dir, tmp_path_factory):
    work = tmp_path_factory.mktemp("work")
    model = work / "model.plda"
    trials = work / "trials.txt"
    assert run_cli(
        "train-plda", "--data", str(synth_dir / "train.xvec"),
        "--out", str(model), "--iterations", "8",
    ) == 0
    assert run_cli(
        "make-trials",
        "--enroll", str(synth_dir / "enroll.xvec"),
        "--trial", str(synth_dir / "trial.xvec"),
        "--out", str(trials),
    ) == 0
    return model, trials


class TestExitCodes:
    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert run_cli("frobnicate") == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_no_subcommand_is_usage_error(self):
        assert run_cli() == 1

    def test_missing_required_flag_is_usage_error(self, capsys):
        assert run_cli("train-plda") == 1
        assert "missing required" in capsys.readouterr().err

    def test_missing_file_is_data_error(self, tmp_path):
        assert run_cli(
            "train-plda", "--data", str(tmp_path / "nope.xvec"),
            "--out", str(tmp_path / "m.plda"),
        ) == 2

    def test_malformed_data_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("u1 s1 F not-a-number\n")
        assert run_cli(
            "train-plda", "--data", str(bad), "--format", "text",
            "--out", str(tmp_path / "m.plda"),
        ) == 2

    def test_help_exits_zero(self):
        assert run_cli("--help") == 0


class TestConfigFile:
    def test_config_supplies_values_and_flags_override(self, tmp_path, capsys):
        ref = tmp_path / "r.txt"
        hyp = tmp_path / "h.txt"
        ref.write_text("a b c\n")
        hyp.write_text("a b c\n")
        config = tmp_path / "run.cfg"
        config.write_text(f"ref = {ref}\nhyp = {hyp}\n")
        assert run_cli("wer", "--config", str(config)) == 0
        assert "WER 0.000%" in capsys.readouterr().out

        other_hyp = tmp_path / "h2.txt"
        other_hyp.write_text("a x c\n")
        assert run_cli("wer", "--config", str(config), "--hyp", str(other_hyp)) == 0
        assert "WER 33.333%" in capsys.readouterr().out

    def test_unknown_key_rejected(self, tmp_path, capsys):
        config = tmp_path / "run.cfg"
        config.write_text("bogus_key = 1\n")
        assert run_cli("wer", "--config", str(config)) == 1
        assert "unknown config key" in capsys.readouterr().err

    def test_provenance_line_on_stderr(self, tmp_path, capsys):
        ref = tmp_path / "r.txt"
        ref.write_text("a\n")
        assert run_cli("wer", "--ref", str(ref), "--hyp", str(ref)) == 0
        err = capsys.readouterr().err
        assert "# provenance: command=wer" in err
        assert "ref=" in err and "hyp=" in err


class TestWerCommand:
    def test_identical_files(self, tmp_path, capsys):
        ref = tmp_path / "r.txt"
        hyp = tmp_path / "h.txt"
        ref.write_text("the cat sat\non the mat\n")
        hyp.write_text("the cat sat\non the mat\n")
        assert run_cli("wer", "--ref", str(ref), "--hyp", str(hyp)) == 0
        assert capsys.readouterr().out == "WER 0.000%\n"

    def test_line_count_mismatch(self, tmp_path):
        ref = tmp_path / "r.txt"
        hyp = tmp_path / "h.txt"
        ref.write_text("a\nb\n")
        hyp.write_text("a\n")
        assert run_cli("wer", "--ref", str(ref), "--hyp", str(hyp)) == 2


class TestPipelineCommands:
    def test_synth_writes_corpora(self, synth_dir):
        for name in ("train.xvec", "pool.xvec", "enroll.xvec", "trial.xvec", "truth.plda"):
            assert (synth_dir / name).exists()

    def test_score_and_det(self, synth_dir, trained, tmp_path, capsys):
        model, trials = trained
        scores = tmp_path / "scores.txt"
        assert run_cli(
            "score", "--model", str(model),
            "--enroll", str(synth_dir / "enroll.xvec"),
            "--test", str(synth_dir / "trial.xvec"),
            "--trials", str(trials), "--out", str(scores),
        ) == 0
        assert scores.exists()
        capsys.readouterr()
        assert run_cli("det", "--scores", str(scores), "--trials", str(trials)) == 0
        out = capsys.readouterr().out
        assert out.startswith("# threshold p_fa p_miss probit_fa probit_miss")

    def test_anonymize_xvec(self, synth_dir, trained, tmp_path):
        model, _ = trained
        out = tmp_path / "anon.xvec"
        assert run_cli(
            "anonymize-xvec",
            "--input", str(synth_dir / "trial.xvec"),
            "--pool", str(synth_dir / "pool.xvec"),
            "--model", str(model),
            "--out", str(out),
            "--n-farthest", "20", "--n-select", "10",
            "--subset-tag", "trial",
        ) == 0
        assert out.exists()

    def test_eval_end_to_end(self, synth_dir, trained, tmp_path, capsys):
        model, trials = trained
        records = tmp_path / "records.txt"
        assert run_cli(
            "eval",
            "--enroll", str(synth_dir / "enroll.xvec"),
            "--trial", str(synth_dir / "trial.xvec"),
            "--pool", str(synth_dir / "pool.xvec"),
            "--model", str(model),
            "--trials", str(trials),
            "--n-farthest", "20", "--n-select", "10",
            "--records", str(records),
        ) == 0
        table = capsys.readouterr().out
        assert "original" in table and "anonymized" in table
        lines = records.read_text().strip().splitlines()
        statuses = {tuple(l.split()[2:4]) for l in lines}
        assert statuses == {
            ("original", "original"),
            ("original", "anonymized"),
            ("anonymized", "anonymized"),
        }

    def test_eval_determinism_bytes(self, synth_dir, trained, tmp_path, capsys):
        model, trials = trained
        outputs = []
        for tag in ("one", "two"):
            records = tmp_path / f"records_{tag}.txt"
            dump = tmp_path / f"dump_{tag}"
            assert run_cli(
                "eval",
                "--enroll", str(synth_dir / "enroll.xvec"),
                "--trial", str(synth_dir / "trial.xvec"),
                "--pool", str(synth_dir / "pool.xvec"),
                "--model", str(model),
                "--trials", str(trials),
                "--n-farthest", "20", "--n-select", "10", "--seed", "5",
                "--records", str(records),
                "--dump-anon", str(dump),
            ) == 0
            outputs.append(
                (
                    capsys.readouterr().out,
                    records.read_bytes(),
                    (dump / "trial_anon.xvec").read_bytes(),
                    (dump / "enroll_anon.xvec").read_bytes(),
                )
            )
        assert outputs[0] == outputs[1]

    def test_anonymize_wav(self, tmp_path):
        src = tmp_path / "in.wav"
        dst = tmp_path / "out.wav"
        write_wav(synth_vowel(duration=0.2), src)
        assert run_cli("anonymize-wav", "--input", str(src), "--out", str(dst),
                       "--alpha", "0.8") == 0
        out = read_wav(dst)
        assert len(out) == len(read_wav(src))

    def test_unknown_condition_rejected(self, synth_dir, trained, capsys):
        model, trials = trained
        assert run_cli(
            "eval",
            "--enroll", str(synth_dir / "enroll.xvec"),
            "--trial", str(synth_dir / "trial.xvec"),
            "--pool", str(synth_dir / "pool.xvec"),
            "--model", str(model),
            "--trials", str(trials),
            "--conditions", "zz",
        ) == 1
        assert "unknown condition" in capsys.readouterr().err
