"""Command line behavior: formats, determinism, exit codes, manifests."""

import csv
import json

import pytest

from fairkm.cli import main
from synthetic import dataset_to_csv, imbalanced_instance


def write_csv(path, n=80, seed=0):
    return dataset_to_csv(imbalanced_instance(seed=seed, n=n, noise_dims=2), path)


@pytest.fixture
def demo(tmp_path):
    return str(write_csv(tmp_path / "demo.csv"))


def run_args(demo, *extra):
    return ["run", "--input", demo, "--sensitive-col", "grp", "--k", "2", *extra]


class TestRun:
    def test_json_report_structure(self, demo, capsys):
        assert main(run_args(demo)) == 0
        report = json.loads(capsys.readouterr().out)
        assert set(report) == {"dataset", "config", "baseline", "adjusted"}
        assert report["dataset"]["n"] == 80
        assert report["dataset"]["group_names"] == ["a", "b"]
        assert set(report["adjusted"]) == {"near_foreign", "gini"}
        assert len(report["baseline"]["assignment"]) == 80
        for block in report["adjusted"].values():
            assert block["switch_count"] == len(block["switches"])
            assert block["reason"] in ("balanced", "candidates_exhausted", "round_cap")
            assert len(block["assignment"]) == 80

    def test_single_heuristic_and_none(self, demo, capsys):
        assert main(run_args(demo, "--heuristic", "near-foreign")) == 0
        report = json.loads(capsys.readouterr().out)
        assert list(report["adjusted"]) == ["near_foreign"]
        assert main(run_args(demo, "--heuristic", "none")) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["adjusted"] == {}

    def test_output_file_and_byte_identity(self, demo, tmp_path, capsys):
        out1, out2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
        assert main(run_args(demo, "--output", out1)) == 0
        assert capsys.readouterr().out == ""  # report went to the file
        assert main(run_args(demo, "--output", out2)) == 0
        with open(out1, "rb") as f1, open(out2, "rb") as f2:
            assert f1.read() == f2.read()

    def test_seed_changes_report(self, demo, tmp_path):
        out1, out2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
        assert main(run_args(demo, "--output", out1)) == 0
        assert main(run_args(demo, "--seed", "3", "--output", out2)) == 0
        with open(out1) as f1, open(out2) as f2:
            assert json.load(f1)["config"]["seed"] != json.load(f2)["config"]["seed"]

    def test_csv_format(self, demo, capsys):
        assert main(run_args(demo, "--format", "csv")) == 0
        rows = list(csv.reader(capsys.readouterr().out.splitlines()))
        assert rows[0] == ["section", "metric", "value"]
        sections = {r[0] for r in rows[1:]}
        assert {"dataset", "baseline", "near-foreign", "gini"} <= sections

    def test_summary_on_stderr(self, demo, capsys):
        assert main(run_args(demo)) == 0
        err = capsys.readouterr().err
        assert "baseline: fairness" in err
        assert "elapsed" in err

    def test_literal_switch_accepted(self, demo, capsys):
        assert main(run_args(demo, "--literal-switch")) == 0
        assert json.loads(capsys.readouterr().out)["config"]["literal_switch"] is True

    def test_no_standardize(self, demo, capsys):
        assert main(run_args(demo, "--no-standardize")) == 0
        assert json.loads(capsys.readouterr().out)["config"]["standardize"] is False


class TestExitCodes:
    def test_usage_errors_exit_2(self, demo):
        cases = [
            ["run", "--sensitive-col", "grp", "--k", "2"],  # no --input
            ["run", "--input", demo, "--sensitive-col", "grp", "--k", "1"],
            run_args(demo, "--beta0", "1.5"),
            run_args(demo, "--knn-k", "0"),
            run_args(demo, "--heuristic", "fastest"),
            run_args(demo, "--max-pair-rounds", "-1"),
            ["sweep-knn", "--input", demo, "--sensitive-col", "grp", "--k", "2",
             "--heuristic", "near-foreign"],
            ["sweep-knn", "--input", demo, "--sensitive-col", "grp", "--k", "2",
             "--knn-sweep", "a,b"],
        ]
        for argv in cases:
            with pytest.raises(SystemExit) as exc:
                main(argv)
            assert exc.value.code == 2, argv

    def test_data_errors_exit_1(self, demo, tmp_path, capsys):
        cases = [
            run_args(str(tmp_path / "absent.csv")),
            run_args(demo, "--k", "81"),  # more clusters than rows
            run_args(demo, "--knn-k", "80"),  # neighborhood as big as the data
            ["run", "--input", demo, "--sensitive-col", "nope", "--k", "2"],
            ["sweep-knn", "--input", demo, "--sensitive-col", "grp", "--k", "2",
             "--knn-sweep", "5,80"],
        ]
        for argv in cases:
            assert main(argv) == 1, argv
            assert "error" in capsys.readouterr().err


class TestSweep:
    def test_csv_rows(self, demo, capsys):
        argv = ["sweep-knn", "--input", demo, "--sensitive-col", "grp", "--k", "2",
                "--knn-sweep", "5,10,15", "--format", "csv"]
        assert main(argv) == 0
        rows = list(csv.reader(capsys.readouterr().out.splitlines()))
        assert rows[0] == ["knn_k", "fairness", "kappa", "switch_count", "reason"]
        assert rows[1][0] == "baseline"
        assert [r[0] for r in rows[2:]] == ["5", "10", "15"]

    def test_json_structure(self, demo, capsys):
        argv = ["sweep-knn", "--input", demo, "--sensitive-col", "grp", "--k", "2"]
        assert main(argv) == 0
        report = json.loads(capsys.readouterr().out)
        assert [r["knn_k"] for r in report["sweep"]] == [5, 10, 15]
        assert "kappa" in report["baseline"]

    def test_deterministic(self, demo, tmp_path):
        out1, out2 = str(tmp_path / "s1.csv"), str(tmp_path / "s2.csv")
        argv = ["sweep-knn", "--input", demo, "--sensitive-col", "grp", "--k", "2",
                "--format", "csv"]
        assert main(argv + ["--output", out1]) == 0
        assert main(argv + ["--output", out2]) == 0
        with open(out1, "rb") as f1, open(out2, "rb") as f2:
            assert f1.read() == f2.read()


def write_manifest(tmp_path, rows):
    path = tmp_path / "manifest.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "sensitive_col", "k"])
        w.writerows(rows)
    return str(path)


class TestBench:
    def test_table_with_failures(self, tmp_path, capsys):
        write_csv(tmp_path / "one.csv", seed=1)
        write_csv(tmp_path / "two.csv", seed=2)
        manifest = write_manifest(
            tmp_path,
            [["one.csv", "grp", "2"], ["absent.csv", "grp", "2"], ["two.csv", "grp", "3"]],
        )
        assert main(["bench-table", manifest]) == 1
        captured = capsys.readouterr()
        entries = json.loads(captured.out)
        assert [e["error"] is None for e in entries] == [True, False, True]
        assert entries[0]["original"]["fairness"] > entries[0]["near_foreign"]["fairness"]
        assert "absent.csv" in captured.err

    def test_relative_paths_resolve_against_manifest(self, tmp_path, capsys, monkeypatch):
        write_csv(tmp_path / "one.csv")
        manifest = write_manifest(tmp_path, [["one.csv", "grp", "2"]])
        monkeypatch.chdir("/")  # cwd must not matter
        assert main(["bench-table", manifest]) == 0
        assert json.loads(capsys.readouterr().out)[0]["error"] is None

    def test_empty_manifest(self, tmp_path, capsys):
        manifest = write_manifest(tmp_path, [])
        assert main(["bench-table", manifest]) == 0
        assert json.loads(capsys.readouterr().out) == []

    def test_missing_columns(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("path,k\nx.csv,2\n")
        assert main(["bench-table", str(path)]) == 1
        assert "sensitive_col" in capsys.readouterr().err

    def test_csv_format(self, tmp_path, capsys):
        write_csv(tmp_path / "one.csv")
        manifest = write_manifest(tmp_path, [["one.csv", "grp", "2"]])
        assert main(["bench-table", manifest, "--format", "csv"]) == 0
        rows = list(csv.reader(capsys.readouterr().out.splitlines()))
        assert rows[0] == ["path", "variant", "fairness", "kappa", "error"]
        assert [r[1] for r in rows[1:]] == ["original", "near-foreign", "gini"]

    def test_threads_match_serial(self, tmp_path, capsys, monkeypatch):
        for seed in range(3):
            write_csv(tmp_path / f"d{seed}.csv", seed=seed)
        manifest = write_manifest(
            tmp_path, [[f"d{s}.csv", "grp", "2"] for s in range(3)]
        )
        assert main(["bench-table", manifest]) == 0
        serial = capsys.readouterr().out
        monkeypatch.setenv("FAIRKM_THREADS", "3")
        assert main(["bench-table", manifest]) == 0
        assert capsys.readouterr().out == serial

    def test_bad_thread_env_exits_2(self, tmp_path, monkeypatch, capsys):
        write_csv(tmp_path / "one.csv")
        manifest = write_manifest(tmp_path, [["one.csv", "grp", "2"]])
        for value in ("abc", "0", "-2"):
            monkeypatch.setenv("FAIRKM_THREADS", value)
            with pytest.raises(SystemExit) as exc:
                main(["bench-table", manifest])
            assert exc.value.code == 2

    def test_bad_k_in_row_is_a_row_error(self, tmp_path, capsys):
        write_csv(tmp_path / "one.csv")
        manifest = write_manifest(tmp_path, [["one.csv", "grp", "x"]])
        assert main(["bench-table", manifest]) == 1
        entries = json.loads(capsys.readouterr().out)
        assert "not an integer" in entries[0]["error"]
