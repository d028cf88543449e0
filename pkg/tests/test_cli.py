import json
import math

import numpy as np
import pytest

from cylstereo import cli
from cylstereo.geometry import EmptyObservationError, QuantityKind
from cylstereo.isotonic import fit_isotonic
from cylstereo.plugin import moments
from cylstereo.simulation import SimulationSpec, sample_2d_direct


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_ingest_width_schema(tmp_path):
    obs, rep = cli.ingest(write(tmp_path / "a.csv", "width,height\n4.0,2.0\n"), "width")
    assert obs.z.tolist() == [4.0] and obs.h.tolist() == [2.0] and rep.rejected_lines == ()


def test_ingest_z_schema_case_insensitive(tmp_path):
    obs, _ = cli.ingest(write(tmp_path / "a.csv", "Z , H,label\n4.0,2.0,x\n"), "z")
    assert obs.z.tolist() == [4.0] and obs.h.tolist() == [2.0]


def test_ingest_rejections_report_lines(tmp_path):
    rng = np.random.default_rng(0)
    rows = [f"{a},{b}" for a, b in rng.uniform(0.5, 3, (181, 2))]
    rows[10] = "-1.0,2.0"
    rows[100] = "abc,1.0"
    obs, rep = cli.ingest(write(tmp_path / "a.csv", "z,h\n" + "\n".join(rows) + "\n"), "z")
    assert obs.n == 179 and rep.rows == 181 and rep.rejected_lines == (12, 102)


def test_ingest_errors(tmp_path):
    with pytest.raises(cli.SchemaError):
        cli.ingest(write(tmp_path / "a.csv", "a,b\n1,2\n"), "z")
    with pytest.raises(cli.SchemaError):
        cli.ingest(write(tmp_path / "b.csv", "z,h\n1,2\n"), "width")
    with pytest.raises(EmptyObservationError):
        cli.ingest(write(tmp_path / "c.csv", "z,h\n0,1\n-1,2\n"), "z")
    with pytest.raises(cli.SchemaError):
        cli.ingest(write(tmp_path / "d.csv", ""), "z")


def test_parse_grid():
    assert cli.parse_grid("auto") is None
    g = cli.parse_grid("1:10:5:log")
    assert g.values()[0] == 1.0 and g.values()[-1] == pytest.approx(10.0) and g.points == 5
    assert cli.parse_grid("0:1:3").spacing == "linear"
    for bad in ["1:2", "2:1:5", "0:1:5:log", "0:1:1", "0:1:5:cubic"]:
        with pytest.raises(ValueError):
            cli.parse_grid(bad)


def read_tsv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split("\t")
    data = np.array([[float(v) for v in ln.split("\t")] for ln in lines[1:]])
    return header, data


def test_simulate_estimate_round_trip(tmp_path):
    csv = tmp_path / "sim.csv"
    assert cli.main(["simulate", "--n", "300", "--seed", "5", "--out", str(csv)]) == 0
    first = csv.read_bytes()
    assert cli.main(["simulate", "--n", "300", "--seed", "5", "--out", str(csv)]) == 0
    assert csv.read_bytes() == first

    out = tmp_path / "est"
    assert cli.main(["estimate", "--input", str(csv), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    mem = sample_2d_direct(SimulationSpec(300, seed=5))
    assert summary["moments"]["volume"]["estimate"] == moments(mem).volume
    header, data = read_tsv(out / "vol.tsv")
    assert header == ["t", "F_plugin", "F_isotonic", "ci_lower", "ci_upper"]
    fit = fit_isotonic(mem, QuantityKind.VOLUME)
    np.testing.assert_array_equal(data[:, 2], fit.cdf(data[:, 0]))

    out2 = tmp_path / "est2"
    cli.main(["estimate", "--input", str(csv), "--out", str(out2)])
    for name in ["vol.tsv", "surf.tsv", "ratio.tsv", "sqradius.tsv", "height.tsv", "summary.json"]:
        assert (out / name).read_bytes() == (out2 / name).read_bytes()
    assert not list(out.glob(".*tmp"))


def test_estimate_outputs_schema_and_monotone(tmp_path):
    csv = tmp_path / "sim.csv"
    cli.main(["simulate", "--n", "179", "--seed", "2", "--mode", "slice", "--out", str(csv)])
    out = tmp_path / "o"
    assert cli.main(["estimate", "--input", str(csv), "--grid", "0.1:40:64:log", "--cb", "1.5", "--out", str(out)]) == 0
    for kind in ["vol", "surf", "ratio", "sqradius"]:
        _, d = read_tsv(out / f"{kind}.tsv")
        assert d.shape == (64, 5)
        assert np.all(np.diff(d[:, 2]) >= 0)
        assert np.all(d[:, 3] <= d[:, 2]) and np.all(d[:, 2] <= d[:, 4])
    header, d = read_tsv(out / "height.tsv")
    assert header == ["h", "F_weighted", "F_unweighted", "ci_lower", "ci_upper"]
    assert np.all(np.diff(d[:, 1]) >= 0)
    s = json.loads((out / "summary.json").read_text())
    assert s["n"] == 179 and s["bandwidth"]["c_b"] == 1.5
    assert set(s["moments"]) == {"radius", "squared_radius", "height", "volume", "surface_area"}
    assert s["covariance"]["lower"] <= s["covariance"]["estimate"] <= s["covariance"]["upper"]


def test_estimate_single_observation(tmp_path):
    out = tmp_path / "o"
    csv = write(tmp_path / "one.csv", "z,h\n4.0,2.0\n")
    assert cli.main(["estimate", "--input", str(csv), "--kinds", "sqradius,height", "--out", str(out)]) == 0
    _, d = read_tsv(out / "sqradius.tsv")
    assert set(np.unique(d[:, 2])) <= {0.0, 1.0}
    s = json.loads((out / "summary.json").read_text())
    assert s["moments"]["radius"]["estimate"] == pytest.approx(math.pi)
    assert s["covariance"] is None


def test_exit_codes(tmp_path):
    assert cli.main(["estimate", "--input", str(write(tmp_path / "a.csv", "q,r\n1,2\n")), "--out", str(tmp_path)]) == 2
    assert cli.main(["estimate", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2
    csv = write(tmp_path / "b.csv", "z,h\n1,1\n")
    assert cli.main(["estimate", "--input", str(csv), "--kinds", "bogus", "--out", str(tmp_path)]) == 2
    assert cli.main(["estimate", "--input", str(csv), "--grid", "5:1:3", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        cli.main(["nonsense"])


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise ArithmeticError("quadrature did not converge")

    monkeypatch.setattr(cli, "run_table3", boom)
    assert cli.main(["table3", "--replicates", "1", "--out", str(tmp_path / "t.tsv")]) == 3


def test_table3_command(tmp_path):
    out = tmp_path / "t3.tsv"
    assert cli.main(["table3", "--replicates", "2", "--sizes", "50,100", "--seed", "1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n\tsigma_hat\tnu2_hat\thalf_width\tmean_sigma"
    inf = lines[-1].split("\t")
    assert inf[0] == "inf" and float(inf[1]) == pytest.approx(0.277, abs=1e-3) and float(inf[2]) == pytest.approx(1.50, abs=0.01)



def test_estimate_plugin_zero_option(tmp_path):
    csv = tmp_path / "sim.csv"
    cli.main(["simulate", "--n", "200", "--seed", "3", "--out", str(csv)])
    out = tmp_path / "o"
    args = ["estimate", "--input", str(csv), "--kinds", "vol", "--isotonic-zero", "plugin", "--out", str(out)]
    assert cli.main(args) == 0
    _, d = read_tsv(out / "vol.tsv")
    fit = fit_isotonic(sample_2d_direct(SimulationSpec(200, seed=3)), QuantityKind.VOLUME)
    np.testing.assert_array_equal(d[:, 2], fit.cdf(d[:, 0], zero="plugin"))
    meta = json.loads((out / "summary.json").read_text())["grids"]["vol.tsv"]
    assert meta["isotonic_zero"] == "plugin" and meta["N_tilde_zero"] <= meta["N_hat_zero"]
