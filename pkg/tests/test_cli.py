"""End-to-end command-line runs: synth, validate, infer, surface, classify.

Each producing command is exercised against real artifacts in a temp tree,
including the failure paths that must exit 1 with a JSON error line.
"""

import json
import subprocess
import sys

import pytest

from soda.cli import main
from soda.ingest import load_symbols
from soda.report import sha256_file


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture(scope="module")
def tree(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def corpus_dir(tree):
    """Tiny two-class corpus, two members each, six frames."""
    out = tree / "corpus"
    code = main(["synth", "--mode", "corpus", "--classes", "2", "--members", "2",
                 "--frames", "6", "--grid", "8", "8", "--candidates", "2",
                 "--arity", "3", "--out", str(out), "--seed", "5"])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def sym_dir(tree, corpus_dir):
    out = tree / "sym"
    inputs = sorted(str(p) for p in corpus_dir.glob("*.jsonl"))
    code = main(["infer", *inputs, "--out", str(out), "--seed", "3",
                 "--p", "4", "--gibbs-burnin", "20", "--gibbs-samples", "40"])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def pair_dir(tree):
    """Strongly coupled detection pair for infer and surface runs."""
    out = tree / "pair"
    code = main(["synth", "--mode", "pair", "--frames", "10", "--coupling", "0.95",
                 "--lag", "1", "--noise", "0.2", "--grid", "8", "8",
                 "--candidates", "2", "--arity", "3", "--out", str(out),
                 "--seed", "11"])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def pair_sym(tree, pair_dir):
    out = tree / "pair_sym"
    code = main(["infer", str(pair_dir / "x.jsonl"), str(pair_dir / "y.jsonl"),
                 "--out", str(out), "--seed", "4", "--p", "4",
                 "--gibbs-burnin", "20", "--gibbs-samples", "40"])
    assert code == 0
    return out


class TestSynth:
    def test_pair_artifacts(self, capsys, tmp_path):
        out = tmp_path / "pair"
        code, stdout, _ = run(capsys, "synth", "--mode", "pair", "--frames", "8",
                              "--lag", "2", "--out", str(out), "--seed", "1")
        assert code == 0
        assert (out / "x.jsonl").exists()
        assert (out / "y.jsonl").exists()
        assert (out / "manifest.json").exists()
        truth = json.loads((out / "truth.json").read_text())
        assert truth["mode"] == "pair"
        record = truth["pairs"][0]
        assert (record["x_id"], record["y_id"]) == ("x", "y")
        assert record["lag"] == 2
        assert all(f >= 2 for f in record["coupled_frames"])
        assert stdout.count("wrote") == 3

    def test_corpus_artifacts(self, corpus_dir):
        names = sorted(p.name for p in corpus_dir.glob("*.jsonl"))
        assert names == ["c0-00.jsonl", "c0-01.jsonl", "c1-00.jsonl", "c1-01.jsonl"]
        truth = json.loads((corpus_dir / "truth.json").read_text())
        assert truth["mode"] == "corpus"
        assert truth["per_class"] == 2
        assert [c["label"] for c in truth["classes"]] == ["c0", "c1"]
        assert set(truth["sequences"]) == {"c0-00", "c0-01", "c1-00", "c1-01"}

    def test_spec_file_drives_generation(self, capsys, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({
            "mode": "pair",
            "frames": 7,
            "candidates": 2,
            "classes": [{"label": "w", "lag": 3, "coupling": 1.0}],
        }))
        out = tmp_path / "gen"
        code, _, _ = run(capsys, "synth", "--spec", str(spec), "--out", str(out),
                         "--seed", "2", "--noise", "0.0")
        assert code == 0
        record = json.loads((out / "truth.json").read_text())["pairs"][0]
        assert record["lag"] == 3
        assert record["coupling_strength"] == 1.0
        assert record["coupled_frames"] == [3, 4, 5, 6]

    def test_spec_unknown_key_fails(self, capsys, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"frames": 6, "lags": [1]}))
        code, _, stderr = run(capsys, "synth", "--spec", str(spec),
                              "--out", str(tmp_path / "o"))
        assert code == 1
        err = json.loads(stderr)
        assert err["error"] == "InvalidSpec"
        assert "lags" in err["message"]

    def test_spec_unknown_class_key_fails(self, capsys, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"classes": [{"label": "a", "delay": 2}]}))
        code, _, stderr = run(capsys, "synth", "--spec", str(spec),
                              "--out", str(tmp_path / "o"))
        assert code == 1
        assert json.loads(stderr)["error"] == "InvalidSpec"

    def test_same_seed_same_bytes(self, capsys, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            code, _, _ = run(capsys, "synth", "--mode", "pair", "--frames", "6",
                             "--out", str(out), "--seed", "9")
            assert code == 0
            outs.append(out)
        for name in ("x.jsonl", "y.jsonl", "truth.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


class TestValidate:
    def test_accepts_generated_files(self, capsys, corpus_dir):
        inputs = sorted(str(p) for p in corpus_dir.glob("*.jsonl"))
        code, stdout, _ = run(capsys, "validate", *inputs)
        assert code == 0
        assert stdout.count(": ok (6 frames)") == 4

    def test_rejects_corrupt_file(self, capsys, corpus_dir, tmp_path):
        good = next(iter(sorted(corpus_dir.glob("*.jsonl"))))
        bad = tmp_path / "bad.jsonl"
        bad.write_text(good.read_text() + "{broken\n")
        code, stdout, _ = run(capsys, "validate", str(bad))
        assert code == 1
        assert "MalformedRecord" in stdout

    def test_missing_file_reported_per_input(self, capsys, tmp_path):
        code, stdout, _ = run(capsys, "validate", str(tmp_path / "absent.jsonl"))
        assert code == 1
        assert "IoFailure" in stdout


class TestInfer:
    def test_artifacts_and_symbol_shape(self, sym_dir):
        names = sorted(p.name for p in sym_dir.glob("*.sym"))
        assert names == ["c0-00.sym", "c0-01.sym", "c1-00.sym", "c1-01.sym"]
        assert (sym_dir / "codebook.json").exists()
        seq = load_symbols(sym_dir / "c0-00.sym")
        assert seq.p == 4
        assert seq.num_frames == 6
        assert seq.n == 40
        assert seq.label == "c0"
        codebook = json.loads((sym_dir / "codebook.json").read_text())
        assert codebook["p"] == 4
        assert len(codebook["centroids"]) == 4

    def test_fits_gammas_by_default(self, capsys, corpus_dir, tmp_path):
        inputs = sorted(str(p) for p in corpus_dir.glob("*.jsonl"))[:2]
        code, stdout, _ = run(capsys, "infer", *inputs, "--out", str(tmp_path / "o"),
                              "--p", "4", "--gibbs-burnin", "10",
                              "--gibbs-samples", "30", "--seed", "1")
        assert code == 0
        assert "fitted gamma1=" in stdout

    def test_pinned_gammas_skip_fitting(self, capsys, corpus_dir, tmp_path):
        inputs = sorted(str(p) for p in corpus_dir.glob("*.jsonl"))[:2]
        code, stdout, _ = run(capsys, "infer", *inputs, "--out", str(tmp_path / "o"),
                              "--gamma1", "1.0", "--gamma2", "0.5", "--p", "4",
                              "--gibbs-burnin", "10", "--gibbs-samples", "30",
                              "--seed", "1")
        assert code == 0
        assert "fitted" not in stdout
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["config"]["gamma2"] == 0.5

    def test_fit_flag_overrides_pinning(self, capsys, corpus_dir, tmp_path):
        inputs = sorted(str(p) for p in corpus_dir.glob("*.jsonl"))[:2]
        code, stdout, _ = run(capsys, "infer", *inputs, "--fit-gammas",
                              "--gamma1", "1.0", "--gamma2", "0.5",
                              "--out", str(tmp_path / "o"), "--p", "4",
                              "--gibbs-burnin", "10", "--gibbs-samples", "30",
                              "--seed", "1")
        assert code == 0
        assert "fitted gamma1=" in stdout

    def test_rerun_reproduces_artifacts(self, capsys, corpus_dir, sym_dir, tmp_path):
        inputs = sorted(str(p) for p in corpus_dir.glob("*.jsonl"))
        out = tmp_path / "again"
        code, _, _ = run(capsys, "infer", *inputs, "--out", str(out), "--seed", "3",
                         "--p", "4", "--gibbs-burnin", "20", "--gibbs-samples", "40")
        assert code == 0
        for path in sorted(sym_dir.glob("*.sym")):
            assert sha256_file(out / path.name) == sha256_file(path)
        first = json.loads((sym_dir / "manifest.json").read_text())
        second = json.loads((out / "manifest.json").read_text())
        assert first["artifacts"] == second["artifacts"]

    def test_duplicate_ids_rejected(self, capsys, pair_dir, tmp_path):
        code, _, stderr = run(capsys, "infer", str(pair_dir / "x.jsonl"),
                              str(pair_dir / "x.jsonl"), "--out", str(tmp_path / "o"),
                              "--p", "4", "--gibbs-burnin", "5",
                              "--gibbs-samples", "10")
        assert code == 1
        assert json.loads(stderr)["error"] == "ConfigError"

    def test_mixed_grids_rejected(self, capsys, tmp_path):
        for i, w in enumerate(("6", "8")):
            code = main(["synth", "--mode", "pair", "--frames", "4",
                         "--grid", w, w, "--out", str(tmp_path / f"g{i}"),
                         "--seed", str(i)])
            assert code == 0
        capsys.readouterr()
        code, _, stderr = run(capsys, "infer", str(tmp_path / "g0" / "x.jsonl"),
                              str(tmp_path / "g1" / "y.jsonl"),
                              "--out", str(tmp_path / "o"))
        assert code == 1
        err = json.loads(stderr)
        assert err["error"] == "ConfigError"
        assert "grid" in err["message"]


class TestSurface:
    def test_artifacts(self, capsys, pair_sym, tmp_path):
        out = tmp_path / "surf"
        code, stdout, _ = run(capsys, "surface", str(pair_sym / "x.sym"),
                              str(pair_sym / "y.sym"), "--out", str(out),
                              "--window", "4", "--null-reps", "40", "--seed", "7")
        assert code == 0
        for name in ("surface.csv", "peaks.json", "bubble.svg", "manifest.json"):
            assert (out / name).exists()
        lines = (out / "surface.csv").read_text().splitlines()
        assert lines[0] == "tau_x,tau_y,di,pval"
        assert len(lines) == 1 + 7 * 7  # ceil((10 - 4 + 1) / 1) block starts per axis
        peaks = json.loads((out / "peaks.json").read_text())
        assert peaks["peaks"], "expected at least one reported peak"
        assert "peak(s)," in stdout

    def test_percell_null_mode(self, capsys, pair_sym, tmp_path):
        out = tmp_path / "surfcell"
        code, _, _ = run(capsys, "surface", str(pair_sym / "x.sym"),
                         str(pair_sym / "y.sym"), "--out", str(out),
                         "--window", "4", "--null-reps", "40", "--null", "percell",
                         "--seed", "7")
        assert code == 0
        assert (out / "peaks.json").exists()

    def test_rerun_reproduces_figure(self, capsys, pair_sym, tmp_path):
        digests = []
        for name in ("s1", "s2"):
            out = tmp_path / name
            code, _, _ = run(capsys, "surface", str(pair_sym / "x.sym"),
                             str(pair_sym / "y.sym"), "--out", str(out),
                             "--window", "4", "--null-reps", "40", "--seed", "7")
            assert code == 0
            digests.append({n: sha256_file(out / n)
                            for n in ("surface.csv", "peaks.json", "bubble.svg")})
        assert digests[0] == digests[1]

    def test_alphabet_mismatch(self, capsys, pair_sym, pair_dir, tmp_path):
        other = tmp_path / "p8"
        code = main(["infer", str(pair_dir / "y.jsonl"), "--out", str(other),
                     "--p", "8", "--gibbs-burnin", "10", "--gibbs-samples", "40",
                     "--seed", "4"])
        assert code == 0
        capsys.readouterr()
        code, _, stderr = run(capsys, "surface", str(pair_sym / "x.sym"),
                              str(other / "y.sym"), "--out", str(tmp_path / "o"),
                              "--window", "4", "--null-reps", "40")
        assert code == 1
        assert json.loads(stderr)["error"] == "IncompatibleAlphabets"


class TestClassify:
    def test_artifacts_and_report(self, capsys, sym_dir, tmp_path):
        out = tmp_path / "cls"
        inputs = sorted(str(p) for p in sym_dir.glob("*.sym"))
        code, stdout, _ = run(capsys, "classify", *inputs, "--out", str(out),
                              "--seed", "2", "--lambda-mode", "0.0")
        assert code == 0
        for name in ("matrix.csv", "predictions.csv", "report.json",
                     "confusion.svg", "manifest.json"):
            assert (out / name).exists()
        report = json.loads((out / "report.json").read_text())
        assert set(report) >= {"accuracy", "labels", "confusion", "average_precision"}
        assert report["labels"] == ["c0", "c1"]
        assert "accuracy" in stdout
        lines = (out / "matrix.csv").read_text().splitlines()
        assert lines[0].startswith("id,")
        assert "" in lines and any(l.startswith("forward_id,") for l in lines)

    def test_repeated_splits(self, capsys, sym_dir, tmp_path):
        inputs = sorted(str(p) for p in sym_dir.glob("*.sym"))
        code, stdout, _ = run(capsys, "classify", *inputs,
                              "--out", str(tmp_path / "o"), "--seed", "2",
                              "--lambda-mode", "0.0", "--repeats", "3")
        assert code == 0
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert len(report["repeat_accuracies"]) == 3
        assert "mean_accuracy" in report
        assert "mean accuracy" in stdout

    def test_bad_repeats(self, capsys, sym_dir, tmp_path):
        inputs = sorted(str(p) for p in sym_dir.glob("*.sym"))
        code, _, stderr = run(capsys, "classify", *inputs,
                              "--out", str(tmp_path / "o"), "--repeats", "0")
        assert code == 1
        assert json.loads(stderr)["error"] == "ConfigError"

    def test_missing_input(self, capsys, tmp_path):
        code, _, stderr = run(capsys, "classify", str(tmp_path / "nope.sym"),
                              "--out", str(tmp_path / "o"))
        assert code == 1
        assert json.loads(stderr)["error"] == "IoFailure"


class TestConfigPlumbing:
    def test_config_file_feeds_commands(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 21, "noise": 0.1}))
        code, _, stderr = run(capsys, "synth", "--config", str(cfg),
                              "--out", str(tmp_path / "o"))
        assert code == 1  # noise is a synth flag, not a config key
        assert json.loads(stderr)["error"] == "ConfigError"
        cfg.write_text(json.dumps({"seed": 21}))
        code, _, _ = run(capsys, "synth", "--mode", "pair", "--frames", "5",
                         "--config", str(cfg), "--out", str(tmp_path / "o"))
        assert code == 0
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["seed"] == 21

    def test_flag_beats_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 21}))
        code, _, _ = run(capsys, "synth", "--mode", "pair", "--frames", "5",
                         "--config", str(cfg), "--seed", "33",
                         "--out", str(tmp_path / "o"))
        assert code == 0
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["seed"] == 33

    def test_range_error_reported_as_json(self, capsys, tmp_path):
        code, _, stderr = run(capsys, "synth", "--fdr", "1.5",
                              "--out", str(tmp_path / "o"))
        assert code == 1
        err = json.loads(stderr)
        assert err["error"] == "ConfigError"
        assert "fdr" in err["message"]


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "soda.cli", "synth", "--mode", "pair",
             "--frames", "5", "--out", str(tmp_path / "o"), "--seed", "1"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert (tmp_path / "o" / "truth.json").exists()

    def test_console_script_help(self):
        proc = subprocess.run(["soda", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        for word in ("synth", "validate", "infer", "surface", "classify"):
            assert word in proc.stdout
