import json

import numpy as np
import pytest

from qrls import __version__
from qrls.cli import ConfigError, main, parse_config, run_experiment


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[1].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[2:]]
    return lines[0], header, rows


def test_defaults():
    cfg = parse_config("dim=1\ncase=a\nn=16\nl=4")
    assert cfg.c is None and cfg.copies(4) == 3
    assert cfg.eps == 0.5
    assert cfg.n == (16,) and cfg.l == (4,)


def test_comments_and_lists():
    cfg = parse_config("# sweep setup\nn = 16, 32,64  # three sizes\nl=2,4\n\nseed=3\n")
    assert cfg.n == (16, 32, 64) and cfg.l == (2, 4) and cfg.seed == 3


@pytest.mark.parametrize("text,key,line", [("l=0", "l", 1), ("dim=1\nbogus=2", "bogus", 2),
                                           ("dim=1\ncase=a\neps=abc", "eps", 3),
                                           ("dim=1\ncase=c", "case", 2), ("eps=0.5\nn", "n", 2)])
def test_errors_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key
    assert f"line {line}" in str(info.value)


def test_flag_overrides_file():
    cfg = parse_config("seed=3", {"seed": "7"})
    assert cfg.seed == 7
    assert cfg.sources["seed"] == "flag --seed"


def test_hash_ignores_output_dir():
    a = parse_config("n=4", {"out": "x"})
    b = parse_config("n=4", {"out": "y"})
    c = parse_config("n=5", {"out": "x"})
    assert a.digest() == b.digest() != c.digest()


def test_classical_output(tmp_path):
    cfg = parse_config(f"n=16\neps=1e-8\nout={tmp_path}", {"mode": "classical"})
    files = run_experiment(cfg)
    first, header, rows = read_csv(files[0])
    assert first.startswith(f"# qrls {__version__} config={cfg.digest()} seed=0")
    assert header == ["i", "rel_error", "l_over_kappa"]
    err = np.array([float(r["rel_error"]) for r in rows])
    assert np.all(np.diff(err) <= 0) and err[-1] <= 1e-8
    assert "e" in rows[1]["rel_error"]
    assert files[-1].suffix == ".gp"
    assert "\r" not in files[0].read_text()


def test_qrls_output(tmp_path):
    cfg = parse_config(f"n=4\nl=2,4\ndelta=1e-9\nreps=2\nout={tmp_path}", {"mode": "qrls"})
    files = run_experiment(cfg)
    _, header, rows = read_csv(files[0])
    assert header[:9] == ["l", "p_success_exact", "p_success_bound", "normalized_error",
                          "qc_discrepancy", "delta_used", "degree_used", "attempts", "seed"]
    assert len(rows) == 4
    assert all(float(r["qc_discrepancy"]) <= 1e-8 for r in rows)
    assert all(float(r["p_success_exact"]) >= float(r["p_success_bound"]) for r in rows)
    assert files[1].name.endswith("_attempts.csv")


def test_verify_output(tmp_path):
    cfg = parse_config(f"dim=2\ncase=b\nn=3\nl=2\nout={tmp_path}", {"mode": "verify"})
    _, header, rows = read_csv(run_experiment(cfg)[0])
    r = rows[0]
    assert r["block_bounds_ok"] == "1"
    assert float(r["kappa_M"]) <= float(r["kappa_M_bound"])
    assert float(r["collapse_error"]) <= float(r["collapse_error_bound"])
    assert float(r["p_prime"]) >= float(r["p_prime_bound"])


def test_assemble_output(tmp_path):
    cfg = parse_config(f"n=4\nl=2\nout={tmp_path}", {"mode": "assemble"})
    names = {p.name for p in run_experiment(cfg)}
    assert {"A_1da_n4.mtx", "b_1da_n4.mtx", "block_1da_n4_l2_M.mtx"} <= names


def test_main_success_and_failure(tmp_path, capsys):
    assert main(["classical", "--n", "8", "--eps", "1e-4", "--out", str(tmp_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["mode"] == "classical" and out["files"]
    assert main(["qrls", "--l", "0", "--out", str(tmp_path)]) != 0
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ConfigError" and "l" in err["message"]


def test_main_reads_config_file(tmp_path, capsys):
    conf = tmp_path / "exp.conf"
    conf.write_text("dim = 2\ncase = c\nn = 3\nl = 2\nseed = 3\n")
    assert main(["verify", "--config", str(conf), "--seed", "7", "--out", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "verify_2dc.csv").read_text()
    assert "seed=7" in text.splitlines()[0]


def test_sweep_is_byte_identical(tmp_path):
    for sub in ("a", "b"):
        assert main(["sweep", "--pipeline", "qrls", "--n", "4,6", "--l", "2,3", "--reps", "2",
                     "--seed", "11", "--out", str(tmp_path / sub)]) == 0
    a = sorted(p.name for p in (tmp_path / "a").iterdir())
    b = sorted(p.name for p in (tmp_path / "b").iterdir())
    assert a == b and len(a) > 4
    for name in a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
