"""End-to-end CLI behavior: artifacts, determinism, exit codes, formats."""

import csv
import json
import xml.etree.ElementTree as ET

from abstainrl.cli import main
from abstainrl.policy import ALL_FEATURES, ActionId, Choice, Evidence, PolicyParams
from abstainrl.synthenv import GenConfig, generate_dataset, item_to_dict

import numpy as np


def _gen(tmp_path, name="data.jsonl", n=60, p=0.3, seed=5, ambiguity=0.25):
    path = tmp_path / name
    code = main(
        [
            "gen",
            "--n", str(n),
            "--p-unans", str(p),
            "--ambiguity", str(ambiguity),
            "--seed", str(seed),
            "--out", str(path),
        ]
    )
    assert code == 0
    return path


class TestGen:
    def test_writes_expected_counts(self, tmp_path, capsys):
        path = _gen(tmp_path, n=1000, p=0.5, seed=7)
        lines = path.read_text().splitlines()
        assert len(lines) == 1000
        unans = sum(1 for line in lines if json.loads(line)["gold"] is None)
        assert unans == 500
        assert "500 unanswerable" in capsys.readouterr().out

    def test_creates_missing_output_dir(self, tmp_path):
        out = tmp_path / "deep" / "nested" / "data.jsonl"
        assert main(["gen", "--n", "10", "--out", str(out)]) == 0
        assert out.exists()

    def test_invalid_fraction_is_usage_error(self, tmp_path):
        code = main(
            ["gen", "--n", "10", "--p-unans", "1.5", "--out", str(tmp_path / "x.jsonl")]
        )
        assert code == 2

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n": 30, "p_unans": 0.5, "seed": 3}))
        out = tmp_path / "from_config.jsonl"
        assert main(["gen", "--config", str(cfg), "--n", "20", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 20  # flag wins
        assert sum(1 for ln in lines if json.loads(ln)["gold"] is None) == 10


class TestBuildMc:
    def _sources(self, tmp_path, n=50):
        path = tmp_path / "mc_src.jsonl"
        with path.open("w") as fh:
            for i in range(n):
                fh.write(
                    json.dumps(
                        {
                            "question": f"q{i}",
                            "options": [f"o{i}{j}" for j in range(4)],
                            "answer_key": "ABCD"[i % 4],
                        }
                    )
                    + "\n"
                )
        return path

    def test_build(self, tmp_path):
        src = self._sources(tmp_path)
        out = tmp_path / "mc.jsonl"
        assert main(["build-mc", "--in", str(src), "--ratio", "0.12", "--seed", "1",
                     "--out", str(out)]) == 0
        items = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(items) == 50
        assert sum(1 for i in items if i["unanswerable"]) == 6
        assert all(len(i["options"]) == 3 for i in items)

    def test_bad_source_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text(json.dumps({"question": "q", "options": ["a", "b"], "answer_key": "A"}) + "\n")
        assert main(["build-mc", "--in", str(bad), "--out", str(tmp_path / "o.jsonl")]) == 3


class TestExtract:
    def test_sub_context_rules(self, tmp_path, capsys):
        code = main(
            [
                "extract",
                "--mode", "sub-context",
                "--question", "Where did he live from 1921 to 1923?",
                "--context", "He moved in 1921. He was happy. He left in 1980.",
            ]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["source"] == "rules"
        assert payload["sentences"] == ["He moved in 1921."]

    def test_kg_heuristic(self, tmp_path):
        out = tmp_path / "extract.json"
        code = main(
            [
                "extract",
                "--mode", "kg",
                "--question", "who",
                "--context", "Anna Karina married Pierre Fabre in 1968.",
                "--out", str(out),
            ]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["quadruples"][0]["head"] == "Anna Karina"

    def test_dataset_to_store(self, tmp_path):
        data = _gen(tmp_path, n=20, p=0.0)
        out = tmp_path / "store.jsonl"
        assert main(["extract", "--mode", "kg", "--dataset", str(data), "--out", str(out)]) == 0
        quads = [json.loads(line) for line in out.read_text().splitlines()]
        assert quads and all({"head", "relation", "tail", "timestamp"} <= set(q) for q in quads)

    def test_remote_failure_falls_back(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("ABSTAINRL_TEST_KEY", "sk")
        code = main(
            [
                "extract",
                "--mode", "sub-context",
                "--question", "q in 1921?",
                "--context", "He moved in 1921.",
                "--remote",
                "--endpoint", "http://127.0.0.1:9",
                "--model", "stub",
                "--api-key-env", "ABSTAINRL_TEST_KEY",
                "--timeout", "0.5",
            ]
        )
        assert code == 0
        captured = capsys.readouterr()
        assert "falling back" in captured.err
        payload = json.loads(captured.out)
        assert payload["source"] == "rules"
        assert "fallback_reason" in payload
        assert payload["sentences"] == ["He moved in 1921."]

    def test_missing_question_is_usage_error(self):
        assert main(["extract", "--mode", "sub-context", "--context", "c"]) == 2


def _train_args(data, out_dir, iters="12", extra=()):
    return [
        "train",
        "--dataset", str(data),
        "--out-dir", str(out_dir),
        "--iters", iters,
        "--batch-size", "8",
        "--seed", "3",
        *extra,
    ]


class TestTrain:
    def test_artifacts_written(self, tmp_path):
        data = _gen(tmp_path)
        out = tmp_path / "run"
        assert main(_train_args(data, out)) == 0
        for name in ("config.json", "train_log.jsonl", "policy.json", "summary.csv", "curves.svg"):
            assert (out / name).exists(), name
        config = json.loads((out / "config.json").read_text())
        assert config["group_size"] == 4
        assert config["clip_eps"] == 0.2
        assert config["beta"] == 0.01
        assert config["seed"] == 3

    def test_rerun_identical_log(self, tmp_path):
        data = _gen(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(_train_args(data, out_a)) == 0
        assert main(_train_args(data, out_b)) == 0
        assert (out_a / "train_log.jsonl").read_bytes() == (out_b / "train_log.jsonl").read_bytes()
        assert (out_a / "summary.csv").read_bytes() == (out_b / "summary.csv").read_bytes()

    def test_beta_zero_runs(self, tmp_path):
        data = _gen(tmp_path)
        out = tmp_path / "kl_free"
        assert main(_train_args(data, out, extra=["--beta", "0"])) == 0
        record = json.loads((out / "train_log.jsonl").read_text().splitlines()[0])
        assert set(record) == {
            "iteration", "mean_reward", "abstain_rate", "kl", "objective", "tp", "fp", "fn",
        }

    def test_sft_phase(self, tmp_path):
        data = _gen(tmp_path)
        out = tmp_path / "sft_run"
        code = main(
            _train_args(
                data, out, iters="5",
                extra=["--sft-traces", str(data), "--sft-epochs", "50"],
            )
        )
        assert code == 0
        assert (out / "policy.json").exists()

    def test_missing_dataset_is_data_error(self, tmp_path):
        assert main(_train_args(tmp_path / "nope.jsonl", tmp_path / "o")) == 3

    def test_checkpoint_loadable(self, tmp_path):
        data = _gen(tmp_path)
        out = tmp_path / "ckpt_run"
        assert main(_train_args(data, out)) == 0
        params = PolicyParams.loads((out / "policy.json").read_text())
        assert params.logits.shape == (6, 6)


def _oracle_checkpoint(tmp_path):
    """A checkpoint that answers candidate A in supports rows, abstains elsewhere."""
    logits = np.zeros((6, 6))
    for f in ALL_FEATURES:
        target = (
            ActionId(Choice.ANSWER_A, True)
            if f.evidence is Evidence.SUPPORTS
            else ActionId(Choice.ABSTAIN, True)
        )
        logits[f.index, target.index] = 50.0
    path = tmp_path / "oracle_policy.json"
    path.write_text(PolicyParams(logits).dumps())
    return path


def _oracle_solvable_dataset(tmp_path):
    """Noise-free items rewritten so the gold is always candidate A."""
    items = generate_dataset(GenConfig(n_items=40, p_unans=0.3, ambiguity=0.0, seed=9))
    fixed = []
    for item in items:
        d = item_to_dict(item)
        if d["gold"] is not None and d["candidates"][0] not in d["gold"]:
            d["candidates"] = [d["candidates"][1], d["candidates"][0]]
        fixed.append(d)
    path = tmp_path / "solvable.jsonl"
    path.write_text("".join(json.dumps(d, sort_keys=True) + "\n" for d in fixed))
    return path


class TestEval:
    def test_csv_header_and_oracle_scores(self, tmp_path, capsys):
        data = _oracle_solvable_dataset(tmp_path)
        ckpt = _oracle_checkpoint(tmp_path)
        out = tmp_path / "summary.csv"
        assert main(["eval", "--checkpoint", str(ckpt), "--dataset", str(data),
                     "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "id,r1,r2,rl,sem,em,tp,fp,fn"
        rows = list(csv.DictReader(lines))
        assert len(rows) == 40
        assert all(row["em"] == "1" for row in rows)
        assert all(row["fp"] == "0" and row["fn"] == "0" for row in rows)
        printed = capsys.readouterr().out
        assert "em_rate=1.0000" in printed

    def test_empty_dataset_is_usage_error(self, tmp_path):
        ckpt = _oracle_checkpoint(tmp_path)
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        assert main(["eval", "--checkpoint", str(ckpt), "--dataset", str(empty)]) == 2

    def test_missing_checkpoint_is_data_error(self, tmp_path):
        data = _gen(tmp_path)
        assert main(["eval", "--checkpoint", str(tmp_path / "no.json"),
                     "--dataset", str(data)]) == 3


class TestSweep:
    def test_p_unans_sweep(self, tmp_path):
        out = tmp_path / "sweep"
        code = main(
            [
                "sweep",
                "--axis", "p-unans",
                "--values", "0.124,0.5",
                "--out-dir", str(out),
                "--n", "40",
                "--ambiguity", "0.5",
                "--iters", "10",
                "--batch-size", "8",
                "--seed", "2",
            ]
        )
        assert code == 0
        summary = (out / "sweep_summary.csv").read_text().splitlines()
        assert summary[0] == "axis,value,mean_reward,abstain_rate,em_rate,tp,fp,fn"
        assert len(summary) == 3
        for value in ("0.124", "0.5"):
            run_dir = out / f"p-unans_{value}"
            assert (run_dir / "train_log.jsonl").exists()
            assert (run_dir / "dataset.jsonl").exists()

    def test_beta_sweep_uses_shared_dataset(self, tmp_path):
        data = _gen(tmp_path)
        out = tmp_path / "betas"
        code = main(
            [
                "sweep",
                "--axis", "beta",
                "--values", "0,0.01",
                "--dataset", str(data),
                "--out-dir", str(out),
                "--iters", "8",
                "--batch-size", "8",
                "--seed", "2",
            ]
        )
        assert code == 0
        cfg = json.loads((out / "beta_0.01" / "config.json").read_text())
        assert cfg["beta"] == 0.01

    def test_duplicate_values_rejected(self, tmp_path):
        assert main(
            ["sweep", "--axis", "beta", "--values", "0.1,0.1",
             "--dataset", "x.jsonl", "--out-dir", str(tmp_path / "s")]
        ) == 2

    def test_single_value_rejected(self, tmp_path):
        assert main(
            ["sweep", "--axis", "beta", "--values", "0.1",
             "--dataset", "x.jsonl", "--out-dir", str(tmp_path / "s")]
        ) == 2

    def test_unknown_axis_rejected(self, tmp_path):
        assert main(
            ["sweep", "--axis", "lr", "--values", "0.1,0.2",
             "--dataset", "x.jsonl", "--out-dir", str(tmp_path / "s")]
        ) == 2


class TestReport:
    def test_svg_and_aggregate(self, tmp_path):
        data = _gen(tmp_path)
        run_a, run_b = tmp_path / "run_a", tmp_path / "run_b"
        assert main(_train_args(data, run_a, iters="6")) == 0
        assert main(_train_args(data, run_b, iters="6")) == 0
        out = tmp_path / "report"
        assert main(["report", "--runs", str(run_a), str(run_b), "--out-dir", str(out)]) == 0
        svg = (out / "curves.svg").read_text()
        root = ET.fromstring(svg)
        assert root.tag.endswith("svg")
        rows = (out / "aggregate.csv").read_text().splitlines()
        assert len(rows) == 3  # header + 2 runs

    def test_missing_log_is_data_error(self, tmp_path):
        assert main(["report", "--runs", str(tmp_path / "ghost"),
                     "--out-dir", str(tmp_path / "r")]) == 3

    def test_single_run_svg_parses(self, tmp_path):
        data = _gen(tmp_path)
        run = tmp_path / "solo"
        assert main(_train_args(data, run, iters="4")) == 0
        ET.fromstring((run / "curves.svg").read_text())


class TestUsage:
    def test_no_command_is_usage_error(self):
        assert main([]) == 2

    def test_unknown_command_is_usage_error(self):
        assert main(["frobnicate"]) == 2
