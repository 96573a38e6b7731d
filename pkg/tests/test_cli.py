from __future__ import annotations

import subprocess
import sys

import pytest

from lznet.cli import main
from lznet.train import METRICS_HEADER, read_metrics


@pytest.fixture
def files(tmp_path):
    (tmp_path / "a.bin").write_bytes(b"aabbaba")
    (tmp_path / "b.bin").write_bytes(b"aabbba")
    (tmp_path / "z.bin").write_bytes(b"zzzzzz")
    return tmp_path


class TestSymbolicCommands:
    def test_lzjd_self(self, files, capsys):
        assert main(["lzjd", str(files / "a.bin"), str(files / "a.bin")]) == 0
        assert capsys.readouterr().out.strip() == "0.000000"

    def test_lzjd_pair(self, files, capsys):
        assert main(["lzjd", str(files / "a.bin"), str(files / "b.bin"), "--hashed"]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(0.4)

    def test_digest_lines(self, files, capsys):
        assert main(["digest", str(files / "a.bin")]) == 0
        lines = capsys.readouterr().out.split()
        assert [bytes.fromhex(x) for x in lines] == [b"a", b"ab", b"b", b"aba"]

    def test_digest_hashed(self, files, capsys):
        assert main(["digest", "--hashed", str(files / "a.bin")]) == 0
        lines = capsys.readouterr().out.split()
        assert len(lines) == 4 and all(len(x) == 16 for x in lines)

    def test_knn(self, files, capsys):
        (files / "index.tsv").write_text("X\ta.bin\nY\tz.bin\n")
        assert main(["knn", "--index", str(files / "index.tsv"), "-k", "1", str(files / "b.bin")]) == 0
        assert capsys.readouterr().out.strip().endswith("\tX")

    def test_knn_bad_index(self, files, capsys):
        (files / "index.tsv").write_text("X a.bin\n")
        assert main(["knn", "--index", str(files / "index.tsv"), str(files / "b.bin")]) == 1
        assert ":1:" in capsys.readouterr().err

    def test_missing_file_is_runtime_failure(self, files, capsys):
        assert main(["lzjd", str(files / "nope"), str(files / "a.bin")]) == 1
        assert "nope" in capsys.readouterr().err


class TestUsage:
    @pytest.mark.parametrize(
        "argv", [["--frobnicate"], ["train", "--frobnicate"], ["bogus"], [], ["knn", "--index", "x", "-k", "0", "q"]]
    )
    def test_usage_errors_exit_2(self, argv, capsys):
        assert main(argv) == 2
        assert capsys.readouterr().err

    def test_bad_config_value_exits_2(self, tmp_path, capsys):
        assert main(["train", "--task", "sorting", "--out-dir", str(tmp_path)]) == 2
        assert "task" in capsys.readouterr().err

    def test_help_exits_0(self, capsys):
        assert main(["--help"]) == 0
        assert "vsa-bench" in capsys.readouterr().out


class TestTrainEval:
    def test_train_writes_metrics(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("epochs = 1\nsteps-per-epoch = 2\nhidden = 4\nbatch = 4\neval-size = 8\n")
        argv = ["train", "--config", str(cfg), "--task", "addition", "--model", "lz", "--backend", "hrr",
                "--seq-len", "100", "--out-dir", str(tmp_path / "out"), "--seed", "3"]
        assert main(argv) == 0
        rows = read_metrics(tmp_path / "out" / "metrics.csv")
        assert tuple(rows[0]) == METRICS_HEADER and len(rows) == 3
        assert main(["eval", "--checkpoint", str(tmp_path / "out" / "final.ckpt")]) == 0
        out = capsys.readouterr().out
        assert "loss" in out and "mean_p" in out

    def test_eval_corrupt_checkpoint(self, tmp_path, capsys):
        (tmp_path / "bad.ckpt").write_bytes(b"LZNETCKP\x01")
        assert main(["eval", "--checkpoint", str(tmp_path / "bad.ckpt")]) == 1
        assert "corrupt" in capsys.readouterr().err


class TestBenchCommands:
    def test_vsa_bench(self, capsys):
        assert main(["vsa-bench", "--dims", "16", "--trials", "5", "--items", "2", "--fresh", "20"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert any(line.startswith("roundtrip hrr 16") for line in out)
        assert any(line.startswith("roundtrip vtb 16") for line in out)
        assert any(line.startswith("capacity hrr 16 2") for line in out)

    def test_console_script(self, files):
        proc = subprocess.run(
            [sys.executable, "-m", "lznet.cli", "lzjd", str(files / "a.bin"), str(files / "z.bin")],
            capture_output=True, text=True, check=False,
        )
        assert proc.returncode == 0 and proc.stdout.strip() == "1.000000"

    def test_gradcheck_table(self, capsys):
        assert main(["gradcheck"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out and out.strip().endswith("passed")
