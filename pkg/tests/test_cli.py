import json

import numpy as np
import pytest

from spherebayes import persistence
from spherebayes.catalogue import write_catalogue
from spherebayes.cli import Settings, main
from spherebayes.synthetic import clustered_directions, regression_sample, zonal_truth


@pytest.fixture
def regression_csv(tmp_path):
    data = regression_sample(zonal_truth, 80, 0.05, np.random.default_rng(1))
    path = tmp_path / "reg.csv"
    with open(path, "w") as fh:
        fh.write("theta,phi,y\n")
        for (t, p), y in zip(data.points, data.y):
            fh.write(f"{t:.17g},{p:.17g},{y:.17g}\n")
    return path


def _last_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_fit_spline_and_project(tmp_path, regression_csv, capsys):
    arc = tmp_path / "fit.sba"
    assert main(["fit-spline", str(regression_csv), "--out", str(arc), "--values",
                 str(tmp_path / "v.csv")]) == 0
    rec = _last_json(capsys)
    assert rec["digest"] == persistence.digest_of(arc) and rec["status"] == 0
    assert (tmp_path / "fit.sba.jsonl").exists()
    assert (tmp_path / "v.csv").read_text().startswith("theta,phi,y,fitted")
    grid = tmp_path / "grid.csv"
    assert main(["project", str(arc), "--out", str(grid), "--resolution", "16"]) == 0
    assert len(grid.read_text().splitlines()) == 1 + 17 * 17


def test_fit_bayes_and_select_k(tmp_path, regression_csv, capsys):
    assert main(["fit-bayes", str(regression_csv), "--out", str(tmp_path / "b.sba")]) == 0
    assert 0.0 <= _last_json(capsys)["pstar"] <= 1.0
    table = tmp_path / "k.csv"
    assert main(["select-k", str(regression_csv), "--k", "3", "--out", str(table)]) == 0
    assert _last_json(capsys)["selected_k"] in (1, 2, 3)
    lines = table.read_text().splitlines()
    assert lines[0] == "K,log_marginal,log_bayes_factor,schwarz,p_best" and len(lines) == 4


def test_histospline(tmp_path, capsys):
    cat = tmp_path / "dirs.csv"
    write_catalogue(cat, clustered_directions(3000, np.random.default_rng(2)))
    assert main(["histospline", str(cat), "--m", "6", "--out", str(tmp_path / "h.sba")]) == 0
    assert _last_json(capsys)["normalising_constant"] > 0


def test_missing_input_is_exit_1(tmp_path, capsys):
    assert main(["fit-spline", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]) == 1
    assert "error" in _last_json(capsys)


def test_bad_config_key_is_exit_1(tmp_path, regression_csv):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["fit-spline", str(regression_csv), "--config", str(cfg),
                 "--out", str(tmp_path / "o")]) == 1


def test_rank_deficient_is_exit_2(tmp_path, regression_csv):
    # 80 points cannot determine the 100 coefficients of K = 9
    assert main(["fit-spline", str(regression_csv), "--k", "9", "--out", str(tmp_path / "o")]) == 2


def test_flag_beats_config_beats_default(tmp_path, regression_csv, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# overrides\nk = 1\nxi = 0.01\n")
    assert main(["fit-spline", str(regression_csv), "--config", str(cfg), "--k", "3",
                 "--out", str(tmp_path / "o")]) == 0
    s = _last_json(capsys)["settings"]
    assert s["k"] == 3 and s["xi"] == 0.01 and s["b"] == Settings().b


def test_describe_lists_every_setting(capsys):
    assert main(["describe"]) == 0
    out = capsys.readouterr().out
    assert "retained_scale = 100.0" in out and "k = 2" in out
    assert len(out.strip().splitlines()) == len(Settings.__dataclass_fields__)
