import numpy as np
import pytest

from graphlb import load_edge_list
from graphlb.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_gen_families_round_trip(tmp_path, capsys):
    cases = [
        ("clique", ["--n", "8"], 8),
        ("ring", ["--n", "9"], 9),
        ("toric_grid", ["--n", "9"], 9),
        ("toric_grid", ["--width", "3", "--height", "4"], 12),
        ("erdos_renyi", ["--n", "30", "--p", "0.2", "--seed", "4"], 30),
        ("erased_regular", ["--n", "20", "--d", "4", "--seed", "4"], 20),
        ("rgg_torus", ["--n", "25", "--c", "3", "--seed", "4"], 25),
        ("rgg_torus", ["--n", "25", "--radius", "0.2", "--seed", "4"], 25),
        ("complete_bipartite", ["--n", "20", "--c", "0.3"], 20),
        ("isolated", ["--n", "6"], 6),
    ]
    for i, (family, extra, n) in enumerate(cases):
        path = tmp_path / f"g{i}.el"
        code, _, _ = run(capsys, "gen", "--family", family, *extra,
                         "-o", str(path))
        assert code == 0, family
        g = load_edge_list(path.read_text())
        assert g.n == n, family


def test_gen_to_stdout(capsys):
    code, out, _ = run(capsys, "gen", "--family", "ring", "--n", "5", "-o", "-")
    assert code == 0
    assert out.splitlines()[0] == "5 5"


def test_gen_errors(tmp_path, capsys):
    code, _, err = run(capsys, "gen", "--family", "toric_grid", "--n", "10",
                       "-o", str(tmp_path / "x.el"))
    assert code == 2 and "graphlb: error" in err  # 10 is not a square
    code, _, err = run(capsys, "gen", "--family", "rgg_torus", "--n", "10",
                       "--c", "2", "--radius", "0.1", "-o", "-")
    assert code == 2 and "error" in err  # both sizing flags
    code, _, err = run(capsys, "gen", "--family", "rgg_torus", "--n", "10",
                       "-o", "-")
    assert code == 2  # neither sizing flag
    with pytest.raises(SystemExit):
        main(["gen", "--family", "dodecahedron", "--n", "5", "-o", "-"])


def test_dis_and_audit(tmp_path, capsys):
    gpath = tmp_path / "two.el"
    edges = [(i, j) for part in (range(5), range(5, 10))
             for i in part for j in part if i < j]
    gpath.write_text(f"10 {len(edges)}\n"
                     + "".join(f"{i} {j}\n" for i, j in edges))

    code, out, _ = run(capsys, "dis", "--graph", str(gpath),
                       "--epsilon", "0.5", "--scale", "fluid",
                       "--mode", "exact")
    assert code == 0
    assert "exact=5" in out

    rpath = tmp_path / "dis.txt"
    code, _, _ = run(capsys, "dis", "--graph", str(gpath), "--epsilon", "0.5",
                     "--mode", "heuristic", "--effort", "200", "--seed", "1",
                     "--report", str(rpath))
    assert code == 0
    assert any(ln.startswith("value:") or ": " in ln
               for ln in rpath.read_text().splitlines())

    apath = tmp_path / "audit.txt"
    code, out, _ = run(capsys, "audit", "--graph", str(gpath),
                       "--epsilon", "0.2", "--epsilon", "0.5",
                       "--report", str(apath))
    assert code == 0
    assert "verdict:" in apath.read_text()


def test_dis_error_paths(tmp_path, capsys):
    code, _, err = run(capsys, "dis", "--graph", str(tmp_path / "missing.el"),
                       "--epsilon", "0.2")
    assert code == 2 and "graphlb: error" in err
    gpath = tmp_path / "ring.el"
    run(capsys, "gen", "--family", "ring", "--n", "12", "-o", str(gpath))
    code, _, err = run(capsys, "dis", "--graph", str(gpath),
                       "--epsilon", "1.5")
    assert code == 2


def test_simulate_and_scale(tmp_path, capsys):
    gpath = tmp_path / "iso.el"
    run(capsys, "gen", "--family", "isolated", "--n", "20", "-o", str(gpath))
    tpath = tmp_path / "trace.csv"
    code, _, _ = run(capsys, "simulate", "--graph", str(gpath),
                     "--lambda", "0.5", "--T", "30", "--seed", "2",
                     "--grid", "0.5", "-o", str(tpath))
    assert code == 0
    lines = tpath.read_text().splitlines()
    assert lines[0].startswith("t,q1")
    assert lines[0].endswith("arrivals,departures,discards")

    spath = tmp_path / "scaled.csv"
    code, _, _ = run(capsys, "scale", "--trace", str(tpath), "--N", "20",
                     "--lambdaN", "15", "-o", str(spath))
    assert code == 0
    srows = spath.read_text().splitlines()
    assert srows[0].startswith("t,qbar1")
    # all-empty start: centered idle count is -(N - 0)/sqrt(N) = -sqrt(N)
    first = float(srows[1].split(",")[1])
    assert first == pytest.approx(-np.sqrt(20), abs=1e-9)


def test_simulate_buffer_and_policy_flags(tmp_path, capsys):
    gpath = tmp_path / "ring.el"
    run(capsys, "gen", "--family", "ring", "--n", "15", "-o", str(gpath))
    code, _, _ = run(capsys, "simulate", "--graph", str(gpath),
                     "--lambda", "1.2", "--T", "20", "--b", "1",
                     "-o", str(tmp_path / "b1.csv"))
    assert code == 0
    code, _, _ = run(capsys, "simulate", "--graph", str(gpath),
                     "--lambda", "0.8", "--T", "20", "--b", "inf",
                     "--policy", "cjsq", "--cjsq-n", "2",
                     "-o", str(tmp_path / "cj.csv"))
    assert code == 0
    # argparse rejects the malformed buffer before the runner starts
    with pytest.raises(SystemExit):
        main(["simulate", "--graph", str(gpath), "--lambda", "0.8",
              "--T", "20", "--b", "0", "-o", "-"])
    capsys.readouterr()


def test_couple_and_fluid(tmp_path, capsys):
    gpath = tmp_path / "ring.el"
    run(capsys, "gen", "--family", "ring", "--n", "30", "-o", str(gpath))
    cpath = tmp_path / "coupled.csv"
    code, _, _ = run(capsys, "couple", "--graph", str(gpath), "--n", "3",
                     "--lambda", "0.8", "--T", "25", "--seed", "3",
                     "-o", str(cpath))
    assert code == 0
    header = cpath.read_text().splitlines()[0]
    assert "delta" in header and "bound_gap" in header

    fpath = tmp_path / "fluid.csv"
    code, _, _ = run(capsys, "fluid", "--lambda", "0.8", "--T", "5",
                     "--grid", "0.5", "-o", str(fpath))
    assert code == 0
    rows = fpath.read_text().splitlines()
    assert rows[0].startswith("t,q1")
    # closed form at the horizon
    last = rows[-1].split(",")
    assert float(last[1]) == pytest.approx(0.8 * (1 - np.exp(-5.0)), abs=1e-5)


def test_experiment_subcommand(tmp_path, capsys):
    cfg = tmp_path / "suite.cfg"
    cfg.write_text("[suite]\nbase_seed = 2\n\n[fig_topology_compare]\n")
    out = tmp_path / "results"
    code, _, _ = run(capsys, "experiment", "--config", str(cfg),
                     "--profile", "ci", "--out", str(out))
    assert code == 0
    assert (out / "summary.txt").exists()
    code, _, err = run(capsys, "experiment", "--config",
                       str(tmp_path / "nope.cfg"), "--profile", "ci",
                       "--out", str(out))
    assert code == 2 and "graphlb: error" in err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "graphlb" in capsys.readouterr().out
