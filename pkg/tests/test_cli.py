import csv
import json

import numpy as np
import pytest

from lklab.cli import (
    CAMPAIGNS,
    ConfigError,
    ExperimentConfig,
    main,
    resolve_flow,
    run_campaign,
    shipped_flows,
)
from lklab.loewner import read_states_csv


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_shipped_flows_listed():
    assert set(shipped_flows()) >= {"koebe", "quadratic", "mixed"}
    with pytest.raises(ConfigError):
        resolve_flow("no-such-flow")


@pytest.mark.parametrize("name", ["koebe", "quadratic", "mixed"])
def test_certify_and_solve(tmp_path, name, capsys):
    out = tmp_path / "cert.csv"
    assert main(["certify", "--flow", name, "--out", str(out), "--n-max", "4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(l.startswith("PASS") for l in lines)
    assert read_csv(out)[0][:3] == ["n", "composition", "s"]
    states = tmp_path / "states.csv"
    assert main(["solve", "--flow", name, "--out", str(states), "--grid", "9"]) == 0
    assert len(read_states_csv(states)) == 9


def test_grunsky_from_states(tmp_path):
    states = tmp_path / "states.csv"
    assert main(["solve", "--flow", "quadratic", "--out", str(states), "--grid", "9", "--N", "25"]) == 0
    out = tmp_path / "g.csv"
    report = tmp_path / "r.json"
    code = main(["grunsky", "--states", str(states), "--M", "8", "--out", str(out), "--report", str(report)])
    assert code == 0
    summary = json.loads(report.read_text())
    assert summary["passed"] and summary["campaign"] == "grunsky"
    assert len(read_csv(out)) > 1


def test_grunsky_states_too_short(tmp_path):
    states = tmp_path / "states.csv"
    main(["solve", "--flow", "koebe", "--out", str(states), "--grid", "3", "--N", "9"])
    assert main(["grunsky", "--states", str(states), "--M", "12"]) == 2


def test_continuity_campaign(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["continuity", "--flow", "mixed", "--M", "12", "--grid", "6", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0][:5] == ["s", "t", "omega", "opnorm", "ratio"]
    assert len(rows) == 1 + 15


def test_continuity_refuses_large_control(tmp_path, capsys):
    doc = resolve_flow("koebe")
    doc = dict(doc, T=1.0)
    doc["x0"] = {"knots": [0.0, 1.0], "values": [[0.0, 0.0], [0.0, 0.0]]}
    doc["xk"] = [{"knots": [0.0, 1.0], "values": [[0.0, 0.0], [0.2, 0.0]]}]
    doc["control"] = {"kind": "linear_rate", "rate": 0.2}
    path = tmp_path / "big.json"
    path.write_text(json.dumps(doc))
    assert main(["continuity", "--config", str(path), "--M", "6"]) == 2
    assert "1/8" in capsys.readouterr().err


def test_ward_deterministic(tmp_path):
    paths = [tmp_path / f"w{i}.csv" for i in range(2)]
    for p in paths:
        main(["ward", "--trials", "20", "--matrix-size", "40", "--K", "3", "--seed", "5", "--out", str(p)])
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert read_csv(paths[0])[0] == ["m", "n", "alpha_ward", "alpha_mc", "se", "z_score"]


def test_moments_campaign(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"shape": {"kind": "circle", "r": 0.7}, "K": 3}))
    out = tmp_path / "m.csv"
    assert main(["moments", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out)
    t0 = [r for r in rows[1:] if r[1] == "t0"][0]
    assert float(t0[3]) == pytest.approx(0.49)
    rep = run_campaign(ExperimentConfig(flow="koebe", K=3, grid=5), "moments")
    assert len(rep.meta["C_k"]) == 3 and all(np.isfinite(rep.meta["C_k"]))


def test_bad_configs(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"flow": "koebe", "bogus": 1}))
    assert main(["solve", "--config", str(bad)]) == 2
    assert main(["solve"]) == 2
    assert main(["solve", "--flow", "koebe", "--N", "0"]) == 2
    assert main(["grunsky", "--flow", "koebe", "--M", "40"]) == 2
    assert main(["moments", "--config", str(tmp_path / "missing.json")]) == 2
    with pytest.raises(ConfigError):
        run_campaign(ExperimentConfig(shape={"kind": "square"}), "moments")
    with pytest.raises(SystemExit):
        main(["nonsense"])
    assert "ward" in CAMPAIGNS
