import json

import numpy as np
import pytest

from kronframe.cli import main
from kronframe.io import read_matrix, write_matrix
from kronframe.kron import kron_operator


def write_cfg(tmp_path, **kw):
    cfg = dict(T=4, R=4, M_T=2, M_R=2, G_T=6, G_R=6, L=1, trials=4, snr_grid_db=[0.0, 10.0],
               sidco_max_sweeps=5)
    cfg.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_design_frame(tmp_path):
    out, rep = tmp_path / "phi.json", tmp_path / "rep.json"
    assert main(["design-frame", "--config", write_cfg(tmp_path), "--out", str(out),
                 "--report", str(rep)]) == 0
    phi = read_matrix(out)
    assert phi.shape == (4, 16)
    assert np.linalg.norm(phi) == pytest.approx(4.0, abs=1e-10)
    report = json.loads(rep.read_text())
    assert len(report["stages"]) == 4
    assert {"sweeps", "coherence_trace", "flagged_columns"} <= set(report)


def test_factor(tmp_path):
    rng = np.random.default_rng(0)
    U = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    V = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    write_matrix(tmp_path / "phi.json", kron_operator(U, V))
    out = tmp_path / "pair.json"
    assert main(["factor", "--in", str(tmp_path / "phi.json"), "--dims", "4,4,2,2",
                 "--out", str(out)]) == 0
    pair = json.loads(out.read_text())
    assert set(pair) == {"U", "V", "sigma", "approx_error"}
    assert pair["approx_error"] <= 1e-10
    assert pair["U"]["rows"] == 4 and pair["U"]["cols"] == 2


def test_factor_bad_dims(tmp_path):
    write_matrix(tmp_path / "phi.json", np.ones((4, 16)))
    assert main(["factor", "--in", str(tmp_path / "phi.json"), "--dims", "4,4,2",
                 "--out", str(tmp_path / "o.json")]) == 2
    assert main(["factor", "--in", str(tmp_path / "phi.json"), "--dims", "4,4,4,2",
                 "--out", str(tmp_path / "o.json")]) == 2


def test_coherence_profile(tmp_path):
    write_matrix(tmp_path / "f.json", np.eye(4))
    out = tmp_path / "prof.csv"
    assert main(["coherence-profile", "--in", str(tmp_path / "f.json"), "--bins", "8",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "bin_center,count,empirical_cdf"
    assert len(lines) == 9
    assert lines[1].split(",")[1] == "6"
    assert main(["coherence-profile", "--in", str(tmp_path / "f.json"), "--bins", "1",
                 "--out", str(out)]) == 2


def test_sweeps_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["nmse-sweep", "--config", cfg, "--out", str(a), "--workers", "1"]) == 0
    assert main(["nmse-sweep", "--config", cfg, "--out", str(b), "--workers", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 1 + 2 * 3 * 2
    c = tmp_path / "c.csv"
    cfg2 = write_cfg(tmp_path, frame_design=["RANDOM_UNITNORM"], trials=2)
    assert main(["aspect-sweep", "--config", cfg2, "--pairs", "2x2,1x4", "--out", str(c)]) == 0
    assert len(c.read_text().splitlines()) == 1 + 2 * 2 * 3


def test_config_errors(tmp_path):
    out = str(tmp_path / "o.csv")
    assert main(["nmse-sweep", "--config", write_cfg(tmp_path, trials=0), "--out", out]) == 2
    assert main(["nmse-sweep", "--config", str(tmp_path / "nope.json"), "--out", out]) == 2
    assert main(["aspect-sweep", "--config", write_cfg(tmp_path), "--pairs", "8x8",
                 "--out", out]) == 2
    assert main(["nmse-sweep", "--config", write_cfg(tmp_path), "--workers", "0", "--out", out]) == 2


def test_numeric_failure_exit_code(tmp_path):
    # rank-deficient input frame: tightening cannot proceed
    write_matrix(tmp_path / "z.json", np.zeros((2, 4)))
    assert main(["coherence-profile", "--in", str(tmp_path / "z.json"), "--out",
                 str(tmp_path / "p.csv")]) == 3
