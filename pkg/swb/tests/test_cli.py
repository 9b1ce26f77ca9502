import json

import pytest

from swb.cli import EXIT_ERROR, EXIT_OK, EXIT_USAGE, build_parser, resolve_config, run
from swb.rng import PortableRandom
from swb.wellbeing import PANEL_COMPONENTS

CATS = "--cats=off,-1,0,1"


def write_json(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def write_indicators(path, columns, seed, rows=30):
    values = PortableRandom(seed).normal((rows, len(columns)))
    lines = ["region," + ",".join(columns)]
    lines += [f"r{i:02d}," + ",".join(f"{v:.6f}" for v in row) for i, row in enumerate(values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def corpus_spec(seed):
    return {
        "categories": ["off", "-1", "0", "1"],
        "mixture": [0.1, 0.3, 0.3, 0.3],
        "stems_per_category": 2,
        "emission": 0.8,
        "overlap": 0.2,
        "n_train": 800,
        "n_test": 1500,
        "days": 10,
        "units": ["north", "south"],
        "seed": seed,
    }


def run_pipeline(root):
    """Полный прогон: синтетика -> isa -> панель -> запаздывание -> CCA и регрессии"""
    data, out = root / "data", root / "out"
    data.mkdir(parents=True)
    estimates = out / "estimates"

    for seed, component in enumerate(PANEL_COMPONENTS):
        spec = write_json(data / f"{component}.json", corpus_spec(seed))
        train, test = data / f"{component}-train.jsonl", data / f"{component}-test.jsonl"
        assert run(["synth", "corpus", "--spec", str(spec), "--out-train", str(train), "--out-test", str(test),
                    "--out-truth", str(out / f"{component}-truth.json")]) == EXIT_OK
        assert run(["isa", "estimate", "--train", str(train), "--test", str(test), CATS, "--by-cell", "day",
                    "--component", component, "--out", str(estimates / f"{component}.json")]) == EXIT_OK

    assert run(["isa", "estimate", "--train", str(data / "emo-train.jsonl"), "--test", str(data / "emo-test.jsonl"),
                CATS, "--bootstrap", "100", "--seed", "7", "--jobs", "2", "--on-topic",
                "--out", str(out / "emo-bootstrap.json")]) == EXIT_OK

    panel = out / "panel.csv"
    assert run(["swbi", "build", "--estimates", str(estimates), "--out", str(panel)]) == EXIT_OK
    for unit in ("north", "south"):
        assert run(["swbi", "series", "--panel", str(panel), "--unit", unit,
                    "--out", str(out / f"{unit}.csv")]) == EXIT_OK
    assert run(["swbi", "integrate", "--panel", str(panel), "--period", "month",
                "--out", str(out / "monthly.csv")]) == EXIT_OK
    assert run(["leadlag", "--x", str(out / "north.csv"), "--y", str(out / "south.csv"), "--delta", "3",
                "--out", str(out / "leadlag.json")]) == EXIT_OK

    x = write_indicators(data / "bes.csv", ["income", "health", "jobs"], seed=1)
    y = write_indicators(data / "swbi.csv", ["swbi", "emo"], seed=2)
    assert run(["cca", "--x", str(x), "--y", str(y), "--key", "region", "--out", str(out / "cca.json"),
                "--scores-out", str(out / "cca-scores.csv")]) == EXIT_OK
    assert run(["regress", "--y", f"{y}:swbi,emo", "--x", str(x), "--key", "region",
                "--out", str(out / "regress.json"), "--table-out", str(out / "regress.csv")]) == EXIT_OK
    return out


@pytest.mark.slow
def test_pipeline_is_byte_identical_across_runs(tmp_path):
    first = run_pipeline(tmp_path / "first")
    second = run_pipeline(tmp_path / "second")
    names = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
    assert names == sorted(p.relative_to(second) for p in second.rglob("*") if p.is_file())
    assert len(names) > 20
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name

    panel = (first / "panel.csv").read_text(encoding="utf-8").splitlines()
    assert panel[0] == "period,unit,emo,fun,rel,res,sat,tru,vit,wor,swbi,n_docs,unpolarized"
    assert len(panel) == 21
    bootstrap = json.loads((first / "emo-bootstrap.json").read_text(encoding="utf-8"))
    assert set(bootstrap["probs"]) == {"-1", "0", "1"}
    assert bootstrap["bootstrap"]["seed"] == 7


def test_isa_estimate_writes_distribution(tmp_path):
    spec = write_json(tmp_path / "spec.json", {**corpus_spec(3), "days": None, "units": None, "n_train": 3000})
    train, test = tmp_path / "train.jsonl", tmp_path / "test.jsonl"
    truth = tmp_path / "truth.json"
    assert run(["synth", "corpus", "--spec", str(spec), "--out-train", str(train), "--out-test", str(test),
                "--out-truth", str(truth)]) == EXIT_OK
    out = tmp_path / "estimate.json"
    assert run(["isa", "estimate", "--train", str(train), "--test", str(test), CATS, "--out", str(out)]) == EXIT_OK

    record = json.loads(out.read_text(encoding="utf-8"))
    expected = json.loads(truth.read_text(encoding="utf-8"))["truth"]
    assert record["method"] == "inverse"
    assert sum(record["probs"].values()) == pytest.approx(1.0)
    for category, p in expected.items():
        assert record["probs"][category] == pytest.approx(p, abs=0.05)

    baseline = tmp_path / "baseline.json"
    assert run(["isa", "estimate", "--train", str(train), "--test", str(test), CATS, "--method", "baseline",
                "--priors", "train", "--out", str(baseline)]) == EXIT_OK
    assert json.loads(baseline.read_text(encoding="utf-8"))["method"] == "baseline"


def test_isa_train_saves_lexicon_and_matrix(tmp_path):
    corpus = tmp_path / "labeled.jsonl"
    corpus.write_text('{"id": "1", "text": "sole mare", "label": "A"}\n'
                      '{"id": "2", "text": "sole mare", "label": "A"}\n'
                      '{"id": "3", "text": "pioggia vento", "label": "B"}\n'
                      '{"id": "4", "text": "pioggia vento", "label": "B"}\n', encoding="utf-8")
    lexicon, matrix = tmp_path / "lexicon.txt", tmp_path / "matrix.json"
    assert run(["isa", "train", "--corpus", str(corpus), "--cats", "A,B", "--lexicon-out", str(lexicon),
                "--matrix-out", str(matrix)]) == EXIT_OK
    assert lexicon.read_text(encoding="utf-8").splitlines()[1:] == [
        "mare", "pioggia", "pioggia vento", "sole", "sole mare", "vento"]
    record = json.loads(matrix.read_text(encoding="utf-8"))
    assert record["counts"] == {"A": 2, "B": 2}
    assert record["off_topic"] == "A"


def test_synth_series_cli(tmp_path):
    spec = write_json(tmp_path / "series.json", {"lag": 3, "length": 200, "seed": 4})
    x, y, truth = tmp_path / "x.csv", tmp_path / "y.csv", tmp_path / "truth.json"
    assert run(["synth", "series", "--spec", str(spec), "--out-x", str(x), "--out-y", str(y),
                "--out-truth", str(truth)]) == EXIT_OK
    assert x.read_text(encoding="utf-8").splitlines()[0] == "ts,value"
    out = tmp_path / "leadlag.json"
    assert run(["leadlag", "--x", str(x), "--y", str(y), "--out", str(out)]) == EXIT_OK
    result = json.loads(out.read_text(encoding="utf-8"))
    assert result["theta_hat"] == 3.0
    assert json.loads(truth.read_text(encoding="utf-8"))["lag"] == 3.0


def test_missing_input_exits_with_error(tmp_path):
    code = run(["leadlag", "--x", str(tmp_path / "nope.csv"), "--y", str(tmp_path / "nope.csv"),
                "--out", str(tmp_path / "out.json")])
    assert code == EXIT_ERROR
    assert not (tmp_path / "out.json").exists()


@pytest.mark.parametrize("argv", [[], ["isa"], ["unknown"], ["leadlag", "--x", "a.csv"]])
def test_usage_errors(argv):
    assert run(argv) == EXIT_USAGE


def test_help_exits_cleanly():
    assert run(["--help"]) == EXIT_OK


def test_bootstrap_without_seed_is_a_usage_error(tmp_path):
    train, test = tmp_path / "train.jsonl", tmp_path / "test.jsonl"
    train.write_text('{"id": "1", "text": "a", "label": "A"}\n', encoding="utf-8")
    test.write_text('{"id": "2", "text": "a"}\n', encoding="utf-8")
    code = run(["isa", "estimate", "--train", str(train), "--test", str(test), "--cats", "A,B",
                "--bootstrap", "100", "--out", str(tmp_path / "out.json")])
    assert code == EXIT_USAGE


def test_config_file_and_flag_precedence(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("# запуск\ncats = off, -1, 0, 1\nmin_df = 3\nmethod = baseline\ndelta = 7\n", encoding="utf-8")
    args = build_parser().parse_args(["isa", "estimate", "--config", str(config), "--min-df", "1",
                                      "--out", str(tmp_path / "out.json")])
    resolved = resolve_config(args)
    assert resolved.cats == ["off", "-1", "0", "1"]
    assert resolved.min_df == 1
    assert resolved.method == "baseline"
    assert resolved.delta == 7.0


def test_unknown_config_key_is_a_usage_error(tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("colour = blue\n", encoding="utf-8")
    code = run(["--config", str(config), "swbi", "summary", "--panel", str(tmp_path / "panel.csv"),
                "--out", str(tmp_path / "summary.csv")])
    assert code == EXIT_USAGE


def test_ridge_flag_defaults_to_small_constant():
    args = build_parser().parse_args(["isa", "estimate", "--ridge", "--out", "o.json"])
    assert resolve_config(args).ridge == pytest.approx(1e-8)
    args = build_parser().parse_args(["isa", "estimate", "--ridge", "0.01", "--out", "o.json"])
    assert resolve_config(args).ridge == pytest.approx(0.01)


def test_regress_and_cca_outputs(tmp_path):
    x = write_indicators(tmp_path / "x.csv", ["a", "b"], seed=5, rows=25)
    y = write_indicators(tmp_path / "y.csv", ["swbi"], seed=6, rows=25)
    out = tmp_path / "regress.json"
    assert run(["regress", "--y", f"{y}:swbi", "--x", str(x), "--key", "region", "--no-intercept",
                "--out", str(out)]) == EXIT_OK
    model = json.loads(out.read_text(encoding="utf-8"))["models"]["swbi"]
    assert [c["term"] for c in model["coefficients"]] == ["a", "b"]
    assert model["statistics"]["n"] == 25

    code = run(["cca", "--x", str(x), "--y", str(y), "--key", "region", "--out", str(tmp_path / "cca.json")])
    assert code == EXIT_OK
    assert json.loads((tmp_path / "cca.json").read_text(encoding="utf-8"))["n"] == 25


def test_on_topic_bootstrap_intervals_match_renormalized_probs(tmp_path):
    spec = write_json(tmp_path / "spec.json", {**corpus_spec(5), "days": None, "units": None})
    train, test = tmp_path / "train.jsonl", tmp_path / "test.jsonl"
    assert run(["synth", "corpus", "--spec", str(spec), "--out-train", str(train), "--out-test", str(test),
                "--out-truth", str(tmp_path / "truth.json")]) == EXIT_OK
    out = tmp_path / "estimate.json"
    assert run(["isa", "estimate", "--train", str(train), "--test", str(test), CATS, "--on-topic",
                "--bootstrap", "100", "--seed", "3", "--out", str(out)]) == EXIT_OK

    record = json.loads(out.read_text(encoding="utf-8"))
    assert set(record["probs"]) == set(record["ci"]) == set(record["sd"]) == {"-1", "0", "1"}
    for category, (lower, upper) in record["ci"].items():
        assert 0.0 <= lower <= upper <= 1.0
        assert lower - 0.1 < record["probs"][category] < upper + 0.1


def test_bootstrap_with_cells_is_a_usage_error(tmp_path):
    train, test = tmp_path / "train.jsonl", tmp_path / "test.jsonl"
    train.write_text('{"id": "1", "text": "a", "label": "A"}\n', encoding="utf-8")
    test.write_text('{"id": "2", "text": "a", "timestamp": "2013-01-01"}\n', encoding="utf-8")
    code = run(["isa", "estimate", "--train", str(train), "--test", str(test), "--cats", "A,B", "--by-cell", "day",
                "--bootstrap", "100", "--seed", "1", "--out", str(tmp_path / "out.json")])
    assert code == EXIT_USAGE
    assert not (tmp_path / "out.json").exists()


def test_integrate_skips_units_without_values(tmp_path):
    components = ",".join(["60"] * len(PANEL_COMPONENTS))
    empty = "," * (len(PANEL_COMPONENTS) - 1)
    panel = tmp_path / "panel.csv"
    panel.write_text(
        f"period,unit,{','.join(PANEL_COMPONENTS)},swbi,n_docs,unpolarized\n"
        f"2013-01-01,north,{components},60,5,\n"
        f"2013-01-02,north,{components},60,5,\n"
        f"2013-01-01,south,{empty},,0,\n", encoding="utf-8")
    out = tmp_path / "monthly.csv"
    log = tmp_path / "run.log"
    assert run(["swbi", "integrate", "--panel", str(panel), "--period", "month", "--out", str(out),
                "--log-file", str(log)]) == EXIT_OK
    assert out.read_text(encoding="utf-8").splitlines() == ["unit,period,value,count", "north,2013-01,120,2"]
    assert "south" in log.read_text(encoding="utf-8")

    code = run(["swbi", "integrate", "--panel", str(panel), "--unit", "south", "--out", str(tmp_path / "s.csv")])
    assert code == EXIT_ERROR
