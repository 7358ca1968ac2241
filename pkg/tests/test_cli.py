import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from freediag import cli
from freediag.cli import main, parse_grid


def model_file(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


@pytest.fixture
def files(tmp_path):
    half = {"dim": 2, "weights": [0.5, 0.5]}
    return {
        "sc": model_file(tmp_path, "sc.json", {"dim": 1, "weights": [1], "type": "scalar_semicircle",
                                               "variance": 1.0}),
        "d01": model_file(tmp_path, "d01.json", dict(half, type="diagonal", x=[0, 1])),
        "d21": model_file(tmp_path, "d21.json", dict(half, type="diagonal", x=[2, 1])),
        "d05": model_file(tmp_path, "d05.json", dict(half, type="diagonal", x=[0, 5])),
        "prof": model_file(tmp_path, "prof.json", dict(half, type="semicircular_profile",
                                                       S=[[1, 0], [0, 0]])),
        "bx": model_file(tmp_path, "bx.json", {"dim": 1, "weights": [1], "type": "scalar_atomic",
                                               "atoms": [[0, 0.75], [1, 0.25]]}),
        "by": model_file(tmp_path, "by.json", {"dim": 1, "weights": [1], "type": "scalar_atomic",
                                               "atoms": [[0, 0.75], [2, 0.25]]}),
    }


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(v) for v in r] for r in rows[1:]]


class TestConvolve:
    def test_semicircle_peak(self, files, tmp_path):
        out = tmp_path / "o"
        assert main(["convolve", files["sc"], files["sc"], "--grid", "-3:3:601", "--y", "1e-6",
                     "--output-dir", str(out)]) == 0
        head, rows = read_csv(out / "density.csv")
        assert head[-1] == "trace_density" and len(rows) == 601
        peak = max(rows, key=lambda r: r[-1])
        assert peak[0] == pytest.approx(0, abs=1e-12)
        assert peak[-1] == pytest.approx(1 / (np.pi * np.sqrt(2)), abs=1e-5)
        summary = json.loads((out / "summary.json").read_text())
        assert summary["failed"] == 0 and summary["max_residual_bsubord"] <= 1e-8

    def test_diagonal_spike(self, files, tmp_path):
        assert main(["convolve", files["d01"], files["d21"], "--grid", "0:4:9", "--y", "1e-3",
                     "--output-dir", str(tmp_path)]) == 0
        _, rows = read_csv(tmp_path / "density.csv")
        peak = max(rows, key=lambda r: r[-1])
        assert peak[0] == 2.0 and peak[-1] == pytest.approx(1 / (np.pi * 1e-3))

    def test_dimension_mismatch(self, files, tmp_path, capsys):
        assert main(["convolve", files["sc"], files["d01"], "--output-dir", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "1" in err and "2" in err

    def test_numerical_failure(self, files, tmp_path, monkeypatch):
        from freediag import subordination as sub
        from freediag.errors import NoConvergence

        def never(*a, **k):
            raise NoConvergence("forced", 1)

        monkeypatch.setattr(sub, "solve_subordination", never)
        assert main(["convolve", files["sc"], files["sc"], "--grid", "0:1:3",
                     "--output-dir", str(tmp_path)]) == 3
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["failed"] == 3


class TestOtherCommands:
    def test_atoms(self, files, tmp_path):
        assert main(["atoms", files["bx"], files["by"], "--output-dir", str(tmp_path)]) == 0
        head, rows = read_csv(tmp_path / "atoms.csv")
        assert head == ["a", "trace_mass"] and len(rows) == 1
        assert rows[0][0] == 0 and rows[0][1] == pytest.approx(0.5, abs=1e-4)

    def test_atoms_explicit_candidates(self, files, tmp_path):
        assert main(["atoms", files["bx"], files["by"], "--candidates", "-1,3",
                     "--output-dir", str(tmp_path)]) == 0
        assert read_csv(tmp_path / "atoms.csv")[1] == []
        assert main(["atoms", files["bx"], files["by"], "--candidates", "x",
                     "--output-dir", str(tmp_path)]) == 2

    def test_check_theorem(self, files, tmp_path):
        assert main(["check-theorem", files["prof"], files["d05"], "--a", "5", "--dump-ladder",
                     "--output-dir", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "theorem.json").read_text())
        assert all(doc[k]["pass"] for k in ("item1", "item2", "item3"))
        head, rows = read_csv(tmp_path / "ladder.csv")
        assert head[0] == "y" and len(rows) == 45

    def test_check_theorem_needs_a(self, files, tmp_path):
        assert main(["check-theorem", files["prof"], files["d05"], "--output-dir", str(tmp_path)]) == 2

    def test_mc(self, files, tmp_path):
        assert main(["mc", files["d01"], files["d21"], "--N", "8", "--trials", "2",
                     "--grid", "-1:3:5", "--output-dir", str(tmp_path)]) == 0
        head, rows = read_csv(tmp_path / "mc.csv")
        assert head[-1] == "discrepancy" and len(rows) == 5
        assert max(r[-1] for r in rows) <= 1e-12


class TestValidation:
    @pytest.mark.parametrize("extra", [["--y", "nan"], ["--y", "-1"], ["--tol", "1e-20"],
                                       ["--tol", "0.5"], ["--grid", "0:1"], ["--grid", "0:inf:3"],
                                       ["--threads", "0"], ["--bogus"]])
    def test_rejected(self, files, tmp_path, extra):
        assert main(["convolve", files["sc"], files["sc"], "--output-dir", str(tmp_path)] + extra) == 2
        assert not (tmp_path / "density.csv").exists()

    def test_bad_model_files(self, files, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{oops")
        assert main(["convolve", str(bad), files["sc"], "--output-dir", str(tmp_path)]) == 2
        assert main(["convolve", str(tmp_path / "missing.json"), files["sc"],
                     "--output-dir", str(tmp_path)]) == 2

    def test_ladder_ranges(self, files, tmp_path):
        for extra in (["--rho", "1.5"], ["--K", "1"], ["--y0", "0"]):
            assert main(["atoms", files["bx"], files["by"], "--output-dir", str(tmp_path)] + extra) == 2

    def test_config_precedence(self, files, tmp_path):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({"grid": "0:1:3", "y": 0.5}))
        assert main(["convolve", files["sc"], files["sc"], "--config", str(cfgfile),
                     "--y", "0.25", "--output-dir", str(tmp_path)]) == 0
        _, rows = read_csv(tmp_path / "density.csv")
        assert [r[0] for r in rows] == [0, 0.5, 1] and all(r[1] == 0.25 for r in rows)

    def test_bad_config(self, files, tmp_path):
        cfgfile = tmp_path / "cfg.json"
        for text in ("[1]", "{bad", json.dumps({"colour": 1}), json.dumps({"y": "small"})):
            cfgfile.write_text(text)
            assert main(["convolve", files["sc"], files["sc"], "--config", str(cfgfile),
                         "--output-dir", str(tmp_path)]) == 2

    def test_parse_grid(self):
        assert parse_grid("-3:3:601")[300] == 0
        assert parse_grid("1:1:1").tolist() == [1.0]
        with pytest.raises(cli.InputError):
            parse_grid("a:b:c")


class TestDeterminism:
    def test_rerun_identical(self, files, tmp_path):
        outs = []
        for k, threads in enumerate(("1", "4")):
            d = tmp_path / f"run{k}"
            assert main(["convolve", files["bx"], files["by"], "--grid", "-1:3:41", "--y", "1e-3",
                         "--threads", threads, "--output-dir", str(d)]) == 0
            outs.append(((d / "density.csv").read_bytes(), (d / "summary.json").read_bytes()))
        assert outs[0] == outs[1]

    def test_module_entry_point(self, files, tmp_path):
        r = subprocess.run([sys.executable, "-m", "freediag", "atoms", files["bx"], files["by"],
                            "--output-dir", str(tmp_path)], capture_output=True, text=True)
        assert r.returncode == 0 and "0.5" in r.stdout

    def test_version(self, capsys):
        assert main(["--version"]) == 0
