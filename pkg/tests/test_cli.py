"""Command-line interface: argument wiring, file round trips, exit codes."""
from __future__ import annotations

import json

import pytest

from patchlink.cli import build_parser, main
from patchlink.evaluation import DEFAULT_KS, DEFAULT_WINDOWS, METHODS
from patchlink.records import parse_changes_file

from conftest import gerrit_change_info, make_change, separable_corpus, write_corpus

ENV_VARS = ("GERRIT_URL", "GERRIT_USER", "GERRIT_HTTP_PASSWORD", "EMBED_URL")


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ENV_VARS:
        monkeypatch.delenv(name, raising=False)


@pytest.fixture(scope="module")
def corpus_files(tmp_path_factory):
    changes, links = separable_corpus(40, 4)
    return write_corpus(tmp_path_factory.mktemp("corpus"), changes, links)


@pytest.fixture(scope="module")
def model_file(tmp_path_factory, corpus_files):
    changes_path, links_path = corpus_files
    out = tmp_path_factory.mktemp("model") / "model.json"
    with pytest.MonkeyPatch.context() as mp:
        for name in ENV_VARS:
            mp.delenv(name, raising=False)
        code = main([
            "train", "--changes", changes_path, "--links", links_path,
            "--out", str(out), "--trees", "20", "--seed", "42",
        ])
    assert code == 0
    return str(out)


class TestTrain:
    def test_reports_counts_and_writes_model(self, corpus_files, tmp_path, capsys):
        changes_path, links_path = corpus_files
        out = tmp_path / "model.json"
        code = main([
            "train", "--changes", changes_path, "--links", links_path,
            "--out", str(out), "--trees", "10",
        ])
        assert code == 0
        assert out.exists()
        stdout = capsys.readouterr().out
        assert "trained 10 trees" in stdout
        assert str(out) in stdout

    def test_same_seed_writes_identical_bytes(self, corpus_files, tmp_path):
        changes_path, links_path = corpus_files
        first, second = tmp_path / "m1.json", tmp_path / "m2.json"
        for out in (first, second):
            assert main([
                "train", "--changes", changes_path, "--links", links_path,
                "--out", str(out), "--trees", "10", "--seed", "7",
            ]) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_missing_changes_file_exits_2(self, corpus_files, tmp_path, capsys):
        _, links_path = corpus_files
        code = main([
            "train", "--changes", str(tmp_path / "absent.jsonl"),
            "--links", links_path, "--out", str(tmp_path / "m.json"),
        ])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestEvaluate:
    def test_writes_report_table_and_figures(self, corpus_files, model_file, tmp_path, capsys):
        changes_path, links_path = corpus_files
        out = tmp_path / "report.jsonl"
        code = main([
            "evaluate", "--changes", changes_path, "--links", links_path,
            "--model", model_file, "--windows", "7,14", "--k", "1,2",
            "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().splitlines()
        assert len(lines) == len(METHODS) * 2
        assert {json.loads(line)["method"] for line in lines} == set(METHODS)
        stdout = capsys.readouterr().out
        assert "window = 7d" in stdout
        assert f"report: {out}" in stdout
        # figures land next to the report unless redirected
        assert (tmp_path / "recall_at_k.png").exists()
        assert (tmp_path / "mrr.png").exists()

    def test_no_figures_flag(self, corpus_files, model_file, tmp_path):
        changes_path, links_path = corpus_files
        out = tmp_path / "report.jsonl"
        code = main([
            "evaluate", "--changes", changes_path, "--links", links_path,
            "--model", model_file, "--windows", "7", "--k", "1",
            "--out", str(out), "--no-figures",
        ])
        assert code == 0
        assert not (tmp_path / "recall_at_k.png").exists()

    def test_figures_dir_redirects_output(self, corpus_files, model_file, tmp_path):
        changes_path, links_path = corpus_files
        figs = tmp_path / "figs"
        code = main([
            "evaluate", "--changes", changes_path, "--links", links_path,
            "--model", model_file, "--windows", "7", "--k", "1",
            "--out", str(tmp_path / "report.jsonl"), "--figures-dir", str(figs),
        ])
        assert code == 0
        assert (figs / "recall_at_k.png").exists()
        assert (figs / "mrr.png").exists()

    def test_learned_without_model_exits_2(self, corpus_files, tmp_path, capsys):
        changes_path, links_path = corpus_files
        code = main([
            "evaluate", "--changes", changes_path, "--links", links_path,
            "--out", str(tmp_path / "report.jsonl"),
        ])
        assert code == 2
        assert "--model" in capsys.readouterr().err

    def test_baselines_run_without_model(self, corpus_files, tmp_path):
        changes_path, links_path = corpus_files
        out = tmp_path / "report.jsonl"
        code = main([
            "evaluate", "--changes", changes_path, "--links", links_path,
            "--methods", "text_only,file_only", "--windows", "7", "--k", "1,2",
            "--out", str(out), "--no-figures",
        ])
        assert code == 0
        assert len(out.read_text().splitlines()) == 2


class TestPredict:
    def test_tab_separated_ranking(self, corpus_files, model_file, capsys):
        changes_path, _ = corpus_files
        code = main([
            "predict", "--changes", changes_path, "--target", "p000a",
            "--model", model_file, "--top-k", "3",
        ])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 3
        first = lines[0].split("\t")
        assert len(first) == 6
        rank, key, score, confidence, url, subject = first
        assert rank == "1"
        assert key == "p000b"
        assert 0.0 <= float(score) <= 1.0
        assert confidence.endswith("%")
        assert url.startswith("https://gerrit.example/c/nova/+/")
        assert subject

    def test_ranks_ascend(self, corpus_files, model_file, capsys):
        changes_path, _ = corpus_files
        assert main([
            "predict", "--changes", changes_path, "--target", "p001a",
            "--model", model_file,
        ]) == 0
        ranks = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
        assert ranks == [str(i) for i in range(1, len(ranks) + 1)]

    def test_unknown_target_exits_2(self, corpus_files, model_file, capsys):
        changes_path, _ = corpus_files
        code = main([
            "predict", "--changes", changes_path, "--target", "ghost",
            "--model", model_file,
        ])
        assert code == 2
        assert "unknown change_key" in capsys.readouterr().err

    def test_lonely_target_prints_nothing(self, tmp_path, model_file, capsys):
        changes, _ = separable_corpus(4, 1)
        lone = make_change("far", offset_hours=24 * 200.0)
        changes_path, _ = write_corpus(tmp_path, changes + [lone], [])
        code = main([
            "predict", "--changes", changes_path, "--target", "far",
            "--model", model_file,
        ])
        assert code == 0
        assert capsys.readouterr().out == ""


class TestFetch:
    def populate(self, stub):
        stub.changes = [
            gerrit_change_info(1, created="2024-03-01 10:00:00.000000000"),
            gerrit_change_info(2, created="2024-03-01 11:00:00.000000000"),
        ]

    def test_writes_parseable_corpus(self, stub_gerrit, tmp_path, capsys):
        self.populate(stub_gerrit)
        out = tmp_path / "changes.jsonl"
        code = main([
            "fetch", "--gerrit-url", stub_gerrit.url, "--project", "nova",
            "--since", "2024-03-01T00:00:00Z", "--until", "2024-03-02T00:00:00Z",
            "--out", str(out),
        ])
        assert code == 0
        assert "fetched 2 changes" in capsys.readouterr().out
        with open(out, "rb") as fh:
            records = parse_changes_file(fh)
        assert [r.change_key for r in records] == ["1", "2"]

    def test_gerrit_url_env_var(self, stub_gerrit, tmp_path, monkeypatch):
        self.populate(stub_gerrit)
        monkeypatch.setenv("GERRIT_URL", stub_gerrit.url)
        code = main([
            "fetch", "--project", "nova",
            "--since", "2024-03-01T00:00:00Z", "--until", "2024-03-02T00:00:00Z",
            "--out", str(tmp_path / "changes.jsonl"),
        ])
        assert code == 0

    def test_credentials_from_env_use_authenticated_prefix(self, stub_gerrit, tmp_path, monkeypatch):
        self.populate(stub_gerrit)
        monkeypatch.setenv("GERRIT_URL", stub_gerrit.url)
        monkeypatch.setenv("GERRIT_USER", "reviewer")
        monkeypatch.setenv("GERRIT_HTTP_PASSWORD", "sekrit")
        code = main([
            "fetch", "--project", "nova",
            "--since", "2024-03-01T00:00:00Z", "--until", "2024-03-02T00:00:00Z",
            "--out", str(tmp_path / "changes.jsonl"),
        ])
        assert code == 0
        assert all(path.startswith("/a/changes/") for _, path, _ in stub_gerrit.requests)

    def test_no_url_anywhere_exits_2(self, tmp_path, capsys):
        code = main([
            "fetch", "--project", "nova",
            "--since", "2024-03-01T00:00:00Z", "--until", "2024-03-02T00:00:00Z",
            "--out", str(tmp_path / "changes.jsonl"),
        ])
        assert code == 2
        assert "GERRIT_URL" in capsys.readouterr().err

    def test_unreachable_gerrit_exits_2(self, tmp_path, capsys):
        code = main([
            "fetch", "--gerrit-url", "http://127.0.0.1:1", "--project", "nova",
            "--since", "2024-03-01T00:00:00Z", "--until", "2024-03-02T00:00:00Z",
            "--out", str(tmp_path / "changes.jsonl"),
        ])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestServe:
    def test_missing_model_exits_2(self, tmp_path, capsys):
        code = main(["serve", "--model", str(tmp_path / "absent.json")])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestParserDefaults:
    def test_evaluate_defaults(self):
        args = build_parser().parse_args([
            "evaluate", "--changes", "c", "--links", "l", "--out", "r",
        ])
        assert tuple(args.windows) == DEFAULT_WINDOWS
        assert tuple(args.k) == DEFAULT_KS
        assert tuple(args.methods) == METHODS
        assert args.window_mode == "symmetric"
        assert args.seed == 42

    def test_train_defaults(self):
        args = build_parser().parse_args([
            "train", "--changes", "c", "--links", "l", "--out", "m",
        ])
        assert args.window_days == 14
        assert args.negatives_per_positive == 5
        assert args.seed == 42

    def test_predict_defaults(self):
        args = build_parser().parse_args([
            "predict", "--changes", "c", "--target", "t", "--model", "m",
        ])
        assert args.window_days == 14
        assert args.top_k == 5

    def test_serve_defaults(self):
        args = build_parser().parse_args(["serve", "--model", "m"])
        assert args.host == "127.0.0.1"
        assert args.port == 8787
        assert args.window_mode == "lookback"
        assert args.allowed_origin == []

    def test_csv_lists_parse(self):
        args = build_parser().parse_args([
            "evaluate", "--changes", "c", "--links", "l", "--out", "r",
            "--windows", "2,30", "--k", "1,10", "--methods", "learned,combined",
        ])
        assert args.windows == (2, 30)
        assert args.k == (1, 10)
        assert args.methods == ("learned", "combined")

    def test_missing_subcommand_exits(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])
