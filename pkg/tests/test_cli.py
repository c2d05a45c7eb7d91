import csv
import json

import pytest

from hlslab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def le3(tmp_path):
    path = tmp_path / "le3.toml"
    path.write_text('kind = "lane-emden"\nn = 3\np = 2.0\nq = 2.0\n')
    return str(path)


@pytest.fixture
def sup5(tmp_path):
    path = tmp_path / "sup5.toml"
    path.write_text("n = 5\np = 3.0\nq = 3.0\n")
    return str(path)


def test_classify_examples(capsys):
    code, out, _ = run(capsys, "classify", "--n", "3", "--p", "3", "--q", "11")
    assert code == 0
    assert out.strip() == '{"regime":"critical","alpha":0.25,"beta":0.75}'
    code, out, _ = run(capsys, "classify", "--n", "5", "--p", "3", "--q", "3")
    assert code == 0 and json.loads(out)["regime"] == "supercritical"


def test_classify_not_applicable(capsys):
    code, out, err = run(capsys, "classify", "--n", "3", "--p", "1", "--q", "1")
    assert code == 2 and out == ""
    assert json.loads(err)["error"] == "NotApplicableError"


def test_shoot_writes_outputs(capsys, tmp_path, le3):
    out_dir = tmp_path / "o"
    code, out, _ = run(capsys, "shoot", "--config", le3, "--alpha", "1,1", "--out", str(out_dir))
    assert code == 0
    rep = json.loads((out_dir / "shoot.json").read_text())
    assert rep["outcome"]["tag"] == "crossed"
    assert rep["r0"] == pytest.approx(4.352874595939438, rel=1e-9)
    with open(out_dir / "shoot_profile.csv") as fh:
        header = next(csv.reader(fh))
    assert header == ["r", "u1", "du1", "u2", "du2"]
    man = json.loads((out_dir / "shoot_manifest.json").read_text())
    assert set(man["outputs"]) == {"shoot.json", "shoot_profile.csv", "shoot_manifest.json"}
    assert len(man["config_digest"]) == 64 and man["seed"] == 0
    assert not list(out_dir.glob("*.tmp"))


def test_env_out_dir(capsys, tmp_path, le3, monkeypatch):
    monkeypatch.setenv("HLS_LAB_OUT", str(tmp_path / "env"))
    assert run(capsys, "shoot", "--config", le3, "--alpha", "1,1")[0] == 0
    assert (tmp_path / "env" / "shoot.json").exists()


def test_bad_alpha_exit_2(capsys, tmp_path, le3):
    code, _, err = run(capsys, "shoot", "--config", le3, "--alpha", "1,1,1", "--out", str(tmp_path))
    assert code == 2 and "alpha" in json.loads(err)["message"]


def test_config_errors_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("n = 3\np = 1.0\nq = 1.0\n")
    code, _, err = run(capsys, "ground-state", "--config", str(bad), "--out", str(tmp_path))
    assert code == 2 and "pq>1" in json.loads(err)["message"]
    syn = tmp_path / "syn.toml"
    syn.write_text("n = 3\np = \n")
    code, _, err = run(capsys, "shoot", "--config", str(syn), "--alpha", "1,1")
    assert code == 2 and json.loads(err)["line"] == 2
    code, _, _ = run(capsys, "shoot", "--config", str(tmp_path / "missing.toml"), "--alpha", "1,1")
    assert code == 2


def test_runtime_failure_exit_1(capsys, tmp_path):
    budget = tmp_path / "budget.toml"
    budget.write_text("n = 5\np = 3.0\nq = 3.0\n[shot]\nmax_steps = 5\n")
    code, _, err = run(capsys, "shoot", "--config", str(budget), "--alpha", "1,1", "--out", str(tmp_path))
    assert code == 1
    assert json.loads(err)["error"] == "IntegrationError"


def test_verify_profile_from_shoot(capsys, tmp_path, sup5):
    out_dir = tmp_path / "s5"
    assert run(capsys, "shoot", "--config", sup5, "--alpha", "1,1", "--out", str(out_dir))[0] == 0
    code, out, _ = run(capsys, "verify", "--profile", str(out_dir / "shoot_profile.csv"), "--config", sup5,
                       "--out", str(out_dir))
    assert code == 0
    rep = json.loads(out)
    for s in rep["slopes"]["slopes"]:
        assert s == pytest.approx(-1.0, rel=0.05)
    assert rep["comparison_max_violation"] == 0.0


def test_ground_state_critical(capsys, tmp_path):
    crit = tmp_path / "crit3.toml"
    crit.write_text("n = 3\np = 3.0\nq = 11.0\n[search]\ntol = 1e-11\n")
    code, out, _ = run(capsys, "ground-state", "--config", str(crit), "--out", str(tmp_path))
    assert code == 0
    rep = json.loads(out)
    assert rep["bracket_width"] <= 1e-10
    assert rep["status"] == "ground_state"
    assert rep["t_star"] == pytest.approx(0.47063107114, abs=1e-9)


def test_sweep_subcritical_grid(capsys, tmp_path):
    code, out, _ = run(capsys, "sweep", "--n", "3", "--p", "2", "--q", "2", "--points", "10", "--out", str(tmp_path))
    assert code == 0
    summary = json.loads(out)
    assert summary["counts"] == {"crossed": 100} and summary["failures"] == 0
    rows = json.loads((tmp_path / "sweep.json").read_text())["rows"]
    assert [r["index"] for r in rows] == list(range(100))


def test_sweep_single_point_matches_shoot(capsys, tmp_path, le3):
    run(capsys, "shoot", "--config", le3, "--alpha", "1,1", "--out", str(tmp_path))
    shoot = json.loads((tmp_path / "shoot.json").read_text())
    run(capsys, "sweep", "--config", le3, "--points", "1", "--alpha-range", "1,1", "--out", str(tmp_path))
    row = json.loads((tmp_path / "sweep.json").read_text())["rows"][0]
    assert row["outcome"] == shoot["outcome"]["tag"]
    assert row["r0"] == shoot["r0"]
    assert row["component"] == shoot["outcome"]["component"]


def test_sweep_pq_flips_at_hyperbola(capsys, tmp_path):
    code, _, _ = run(capsys, "sweep", "--grid", "pq", "--n", "5", "--p-range", "1.5,4", "--q-range", "1.5,4",
                     "--points", "11", "--out", str(tmp_path))
    assert code == 0
    rows = json.loads((tmp_path / "sweep.json").read_text())["rows"]
    for r in rows:
        lhs = 1 / (r["p"] + 1) + 1 / (r["q"] + 1)
        if abs(lhs - 0.6) < 1e-12:
            assert r["regime"] == "critical"
        else:
            assert r["regime"] == ("subcritical" if lhs > 0.6 else "supercritical")
    assert {r["regime"] for r in rows} == {"subcritical", "critical", "supercritical"}


def test_sweep_records_row_failures(capsys, tmp_path):
    code, out, _ = run(capsys, "sweep", "--grid", "pq", "--n", "5", "--p-range", "0.5,2", "--q-range", "0.5,2",
                       "--points", "2", "--shoot-alpha", "1,1", "--out", str(tmp_path))
    assert code == 0
    rows = json.loads((tmp_path / "sweep.json").read_text())["rows"]
    assert rows[0]["regime"] == "not-applicable" and rows[0]["outcome"] is None


def _files(d):
    return {p.name: p.read_bytes() for p in d.iterdir() if not p.name.endswith("_manifest.json")}


def test_reports_bit_identical(capsys, tmp_path, le3):
    for name in ("a", "b"):
        run(capsys, "dirichlet-scan", "--config", le3, "--samples", "12", "--seed", "9", "--out", str(tmp_path / name))
        run(capsys, "check-assumptions", "--config", le3, "--seed", "9", "--out", str(tmp_path / name))
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_seed_changes_sampled_reports(capsys, tmp_path, le3):
    run(capsys, "dirichlet-scan", "--config", le3, "--samples", "5", "--seed", "1", "--out", str(tmp_path / "a"))
    run(capsys, "dirichlet-scan", "--config", le3, "--samples", "5", "--seed", "2", "--out", str(tmp_path / "b"))
    assert _files(tmp_path / "a") != _files(tmp_path / "b")


def test_sweep_independent_of_jobs(capsys, tmp_path, le3):
    for j in ("1", "3"):
        code, _, _ = run(capsys, "sweep", "--config", le3, "--points", "4", "--jitter", "0.1", "--seed", "5",
                         "--jobs", j, "--out", str(tmp_path / j))
        assert code == 0
    assert _files(tmp_path / "1") == _files(tmp_path / "3")
    m1 = json.loads((tmp_path / "1" / "sweep_manifest.json").read_text())
    m3 = json.loads((tmp_path / "3" / "sweep_manifest.json").read_text())
    assert m1["config_digest"] == m3["config_digest"]


def test_asymptotics_asymmetric(capsys, tmp_path):
    code, out, _ = run(capsys, "asymptotics", "--n", "5", "--p", "2", "--q", "5", "--out", str(tmp_path))
    assert code == 0
    rep = json.loads(out)
    for s, p in zip(rep["slopes"]["slopes"], rep["slopes"]["predicted"]):
        assert s == pytest.approx(p, rel=0.10)
    assert all(e["passed"] for e in rep["energy_exponents"].values())


def test_asymptotics_needs_positive_profile(capsys, tmp_path):
    code, _, err = run(capsys, "asymptotics", "--n", "3", "--p", "2", "--q", "2", "--alpha", "1,1",
                       "--out", str(tmp_path))
    assert code == 1 and "not positive" in json.loads(err)["message"]


def test_check_assumptions_decoupled(capsys, tmp_path):
    code, out, _ = run(capsys, "check-assumptions", "--kind", "decoupled", "--n", "3", "--p", "2", "--q", "2",
                       "--out", str(tmp_path))
    assert code == 0 and json.loads(out)["ok"] is False


def test_global_flags_on_every_subcommand():
    from hlslab.cli import COMMANDS, build_parser

    parser = build_parser()
    for name in COMMANDS:
        extra = {"shoot": ["--alpha", "1,1"], "verify": ["--alpha", "1,1"]}.get(name, [])
        args = parser.parse_args([name, "--config", "x.toml", "--out", "d", "--seed", "3", "--jobs", "2",
                                  "--rmax", "10", "--rtol", "1e-8", *extra])
        assert (args.config, args.out, args.seed, args.jobs, args.rmax, args.rtol) == ("x.toml", "d", 3, 2, 10.0, 1e-8)


def test_argparse_errors_exit_2(capsys):
    assert main(["shoot"]) == 2
    assert main(["nonsense"]) == 2
