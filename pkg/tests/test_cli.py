import json

import numpy as np
import pytest

from dlfault.cli import EXIT_OK, EXIT_OPERATIONAL, EXIT_USAGE, main
from dlfault.features import FEATURE_NAMES, LABEL_NAMES, feature_csv_to_string
from dlfault.labels import FaultLabelSet
from dlfault.mutation import (
    EpochSpec,
    LayerSpec,
    LossSpec,
    ModelSpec,
    OptimizerSpec,
)
from dlfault.synthetic import generate_corpus, generate_trace
from dlfault.trace_model import serialize_trace

PROGRAM = """\
model = Sequential()
model.add(Dense(8, activation='relu'))
model.add(Dense(1, activation='sigmoid'))
sgd = SGD(lr=0.1)
model.compile(loss='binary_crossentropy', optimizer=sgd)
model.fit(X, y, batch_size=4, epochs=100)
"""


def write_trace(tmp_path, name, faults=(), seed=0):
    trace = generate_trace(
        name, FaultLabelSet(faults), rng=np.random.default_rng(seed)
    )
    path = tmp_path / f"{name}.jsonl"
    path.write_bytes(serialize_trace(trace))
    return path


def write_labeled_csv(tmp_path, n_per_class=8, seed=0):
    from dlfault.features import extract_features
    from dlfault.indicators import compute_indicators

    rows = []
    for run_id, labels, trace in generate_corpus(n_per_class, seed=seed):
        vec = extract_features(compute_indicators(trace))
        rows.append((run_id, vec, labels.to_bools()))
    path = tmp_path / "features.csv"
    path.write_text(feature_csv_to_string(rows, with_labels=True))
    return path


# -- extract ------------------------------------------------------------------

def test_extract_writes_csv(tmp_path):
    traces = [write_trace(tmp_path, f"r{i}", seed=i) for i in range(3)]
    out = tmp_path / "f.csv"
    rc = main(["--output", str(out), "extract", *map(str, traces)])
    assert rc == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 4
    header = lines[0].split(",")
    assert header[0] == "run_id"
    assert header[1:] == list(FEATURE_NAMES)


def test_extract_skips_bad_file_with_warning(tmp_path, capsys):
    good = write_trace(tmp_path, "good")
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json\n")
    out = tmp_path / "f.csv"
    rc = main(["--output", str(out), "extract", str(good), str(bad)])
    assert rc == EXIT_OK
    assert "warning: skipping" in capsys.readouterr().err
    assert len(out.read_text().splitlines()) == 2


def test_extract_all_bad_is_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json\n")
    rc = main(["extract", str(bad)])
    assert rc == EXIT_USAGE
    assert "no readable traces" in capsys.readouterr().err


def test_extract_parallel_matches_serial(tmp_path):
    traces = [str(write_trace(tmp_path, f"r{i}", seed=i)) for i in range(4)]
    out1, out4 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["--output", str(out1), "--jobs", "1", "extract", *traces]) == EXIT_OK
    assert main(["--output", str(out4), "--jobs", "4", "extract", *traces]) == EXIT_OK
    assert out1.read_text() == out4.read_text()


# -- train / diagnose ---------------------------------------------------------

@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("trained")
    csv = write_labeled_csv(tmp_path)
    bundle = tmp_path / "bundle.json"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"classifier": {"n_trees": 10}}))
    rc = main(["--config", str(cfg), "--seed", "5",
               "--output", str(bundle), "train", str(csv)])
    assert rc == EXIT_OK
    return tmp_path, bundle, cfg


def test_train_prints_metrics(trained, capsys):
    tmp_path, bundle, cfg = trained
    # retrain to capture stdout in this test
    rc = main(["--config", str(cfg), "--seed", "5",
               "--output", str(tmp_path / "b2.json"), "train",
               str(tmp_path / "features.csv")])
    assert rc == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["split"] == "70/30"
    assert 0.0 <= doc["exact_match_accuracy"] <= 1.0
    assert (tmp_path / "b2.json").read_text() == bundle.read_text()


def test_train_without_labels_is_usage_error(tmp_path, capsys):
    rows = [("r0", np.zeros(160), None)]
    from dlfault.features import feature_csv_to_string as to_csv

    path = tmp_path / "unlabeled.csv"
    path.write_text(to_csv([(r, v, ()) for r, v, _ in rows], with_labels=False))
    rc = main(["--output", str(tmp_path / "b.json"), "train", str(path)])
    assert rc == EXIT_USAGE
    assert "label columns" in capsys.readouterr().err


def test_diagnose_reports_seeded_fault(trained, tmp_path, capsys):
    _, bundle, cfg = trained
    trace = write_trace(tmp_path, "lr-case", faults=["lr"], seed=99)
    out = tmp_path / "report.json"
    rc = main(["--config", str(cfg), "--output", str(out),
               "diagnose", "--bundle", str(bundle), str(trace)])
    assert rc == EXIT_OK
    doc = json.loads(out.read_text())
    assert "lr" in doc["diagnosis"]["final"]
    assert "localization" not in doc


def test_diagnose_with_program_localizes(trained, tmp_path):
    _, bundle, cfg = trained
    trace = write_trace(tmp_path, "lr-case2", faults=["lr"], seed=7)
    prog = tmp_path / "prog.py"
    prog.write_text(PROGRAM)
    out = tmp_path / "report.json"
    rc = main(["--config", str(cfg), "--output", str(out), "diagnose",
               "--bundle", str(bundle), "--program", str(prog), str(trace)])
    assert rc == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["localization"]["faults"]["lr"] == [4]


def test_diagnose_unreadable_trace_is_operational(trained, tmp_path, capsys):
    _, bundle, _ = trained
    bad = tmp_path / "missing.jsonl"
    rc = main(["diagnose", "--bundle", str(bundle), str(bad)])
    assert rc == EXIT_OPERATIONAL


# -- localize -----------------------------------------------------------------

def test_localize_outputs_line_sets(tmp_path):
    prog = tmp_path / "prog.py"
    prog.write_text(PROGRAM)
    out = tmp_path / "loc.json"
    rc = main(["--output", str(out), "localize", "--program", str(prog),
               "--faults", "lr,act"])
    assert rc == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["faults"] == {"lr": [4], "act": [2, 3]}


def test_localize_emit_spec(tmp_path):
    prog = tmp_path / "prog.py"
    prog.write_text(PROGRAM)
    out = tmp_path / "loc.json"
    rc = main(["--output", str(out), "localize", "--program", str(prog),
               "--faults", "loss", "--emit-spec"])
    assert rc == EXIT_OK
    spec = json.loads(out.read_text())["model_spec"]
    assert spec["loss"]["name"] == "binary_crossentropy"
    assert spec["epochs"]["value"] == 100


def test_localize_unknown_fault_is_usage_error(tmp_path, capsys):
    prog = tmp_path / "prog.py"
    prog.write_text(PROGRAM)
    rc = main(["localize", "--program", str(prog), "--faults", "nonsense"])
    assert rc == EXIT_USAGE


def test_localize_malformed_program_is_operational(tmp_path):
    prog = tmp_path / "prog.py"
    prog.write_text("model.add(Dense(3\n")
    rc = main(["localize", "--program", str(prog), "--faults", "act"])
    assert rc == EXIT_OPERATIONAL


# -- seed ---------------------------------------------------------------------

def spec_file(tmp_path):
    spec = ModelSpec(
        layers=(LayerSpec("Dense", units=8, activation="relu", source_line=2),),
        loss=LossSpec("mean_squared_error", source_line=5),
        optimizer=OptimizerSpec("SGD", learning_rate=0.01, source_line=4),
        epochs=EpochSpec(200, source_line=6),
    )
    path = tmp_path / "spec.json"
    path.write_text(spec.to_json())
    return path


def test_seed_plan_deterministic(tmp_path):
    spec = spec_file(tmp_path)
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        rc = main(["--seed", "11", "--output", str(out), "seed",
                   "--spec", str(spec), "--max-types", "3"])
        assert rc == EXIT_OK
        outs.append(out.read_text())
    assert outs[0] == outs[1]
    doc = json.loads(outs[0])
    records = doc["plan"]["records"]
    assert len(records) == 3
    assert len({r["fault_type"] for r in records}) == 3


def test_seed_with_evaluator_runs_kill_loop(tmp_path):
    spec = spec_file(tmp_path)
    out = tmp_path / "mutants.json"
    # evaluator: baseline spec (epochs 200, lr 0.01, mse) scores high, any
    # mutated spec scores low -> every type kills
    script = tmp_path / "eval.py"
    script.write_text(
        "import json, sys\n"
        "doc = json.load(open(sys.argv[1]))\n"
        "orig = (doc['epochs']['value'] == 200 and\n"
        "        doc['optimizer']['learning_rate'] == 0.01 and\n"
        "        doc['loss']['name'] == 'mean_squared_error' and\n"
        "        doc['optimizer']['name'] == 'SGD' and\n"
        "        doc['layers'][0]['activation'] == 'relu')\n"
        "base = [0.9, 0.91, 0.89, 0.9, 0.92]\n"
        "print(json.dumps(base if orig else [v - 0.5 for v in base]))\n"
    )
    rc = main(["--seed", "3", "--output", str(out), "seed", "--spec", str(spec),
               "--max-types", "2",
               "--evaluator-cmd", f"python3 {script} {{spec}}"])
    assert rc == EXIT_OK
    doc = json.loads(out.read_text())
    assert len(doc["mutants"]) == 2
    assert all(v["killed"] for m in doc["mutants"] for v in m["verdicts"])


# -- kill-check ---------------------------------------------------------------

def test_kill_check_killed(tmp_path):
    a = tmp_path / "orig.json"
    b = tmp_path / "mut.json"
    a.write_text(json.dumps([0.9, 0.91, 0.89, 0.9]))
    b.write_text(json.dumps([0.4, 0.41, 0.39, 0.4]))
    out = tmp_path / "v.json"
    rc = main(["--output", str(out), "kill-check", str(a), str(b)])
    assert rc == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["killed"] is True
    assert doc["mutant_worse"] is True


def test_kill_check_identical_not_killed(tmp_path):
    a = tmp_path / "orig.json"
    a.write_text(json.dumps([0.8, 0.81, 0.82]))
    out = tmp_path / "v.json"
    rc = main(["--output", str(out), "kill-check", str(a), str(a)])
    assert rc == EXIT_OK
    assert json.loads(out.read_text())["killed"] is False


def test_kill_check_non_array_is_usage_error(tmp_path, capsys):
    a = tmp_path / "orig.json"
    a.write_text(json.dumps({"not": "array"}))
    rc = main(["kill-check", str(a), str(a)])
    assert rc == EXIT_USAGE


# -- export-dist --------------------------------------------------------------

def test_export_dist_shape(tmp_path):
    csv = write_labeled_csv(tmp_path, n_per_class=4)
    out = tmp_path / "dist.csv"
    rc = main(["--output", str(out), "export-dist", str(csv), "--label", "lr"])
    assert rc == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 161
    header = lines[0].split(",")
    assert header[0] == "feature"
    assert "faulty_mean" in header and "ok_mean" in header
    first = lines[1].split(",")
    assert first[0] == FEATURE_NAMES[0]
    assert int(first[1]) == 4  # lr-labeled rows
    assert int(first[7]) == 20  # all other rows


def test_export_dist_unknown_label_is_usage_error(tmp_path, capsys):
    csv = write_labeled_csv(tmp_path, n_per_class=2)
    rc = main(["export-dist", str(csv), "--label", "bogus"])
    assert rc == EXIT_USAGE
    assert str(LABEL_NAMES) in capsys.readouterr().err


# -- config / global ----------------------------------------------------------

def test_bad_config_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"runs_per_program": 0}))
    a = tmp_path / "a.json"
    a.write_text("[0.5, 0.6]")
    rc = main(["--config", str(cfg), "kill-check", str(a), str(a)])
    assert rc == EXIT_USAGE
    assert "bad config" in capsys.readouterr().err


def test_missing_subcommand_exits_two():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
