import shutil

import numpy as np
import pytest

from ccg.cli import main
from ccg.zdd import count, load_zdd

from conftest import DATA


def normalize_csv(text):
    """Blank wall-clock and memory columns, the legitimately varying fields."""
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    drop = [i for i, name in enumerate(header) if "wall" in name or "memory" in name]
    if not drop:
        return text
    out = [lines[0]]
    for line in lines[1:]:
        cells = line.split(",")
        for i in drop:
            cells[i] = ""
        out.append(",".join(cells))
    return "\n".join(out)


class TestBasics:
    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        assert "build-zdd" in capsys.readouterr().out

    def test_subcommand_help(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["optimize", "--help"])
        assert exc.value.code == 0

    def test_unknown_flag_rejected(self):
        with pytest.raises(SystemExit) as exc:
            main(["oracle", "--example", "two_link", "--theta", "0.5", "--bogus"])
        assert exc.value.code == 2

    def test_missing_scenario_is_validation_error(self, tmp_path, capsys):
        code = main(["optimize", "--scenario", str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "t.csv")])
        assert code == 1
        assert "absent.json" in capsys.readouterr().err


class TestOracle:
    def test_two_link_prints_vector(self, capsys):
        assert main(["oracle", "--example", "two_link", "--theta", "0.5"]) == 0
        assert capsys.readouterr().out.strip() == "0.5,0.5"

    def test_parallel_kinks(self, capsys):
        code = main(["oracle", "--example", "parallel_kinks", "--theta", "1.5",
                     "--n", "5", "--M", "4"])
        assert code == 0
        assert capsys.readouterr().out.strip() == "0,1,0,0,0"

    def test_out_of_domain_exit_one(self):
        assert main(["oracle", "--example", "parallel_kinks", "--theta", "9.0"]) == 1


class TestBuildZdd:
    def test_builds_cache(self, tmp_path):
        out = tmp_path / "paths.zdd1"
        code = main(["build-zdd", "--net", str(DATA / "sixnode.tntp"),
                     "--family", "st_paths", "--s", "1", "--t", "6",
                     "--out", str(out)])
        assert code == 0
        z = load_zdd(out)
        assert count(z).exact > 0

    def test_missing_endpoints_exit_one(self, tmp_path):
        code = main(["build-zdd", "--net", str(DATA / "sixnode.tntp"),
                     "--family", "st_paths", "--out", str(tmp_path / "x.zdd1")])
        assert code == 1


class TestEquilibriumCommand:
    def test_trace_csv(self, tmp_path):
        out = tmp_path / "trace.csv"
        code = main(["equilibrium", "--scenario", str(DATA / "sixnode_paths.json"),
                     "--T", "50", "--gap-every", "10", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "iter,potential,gamma,gap,wall_ms"
        assert len(lines) == 52
        pots = [float(l.split(",")[1]) for l in lines[1:]]
        assert all(b <= a + 1e-12 for a, b in zip(pots, pots[1:]))

    def test_theta_file(self, tmp_path):
        scn_theta = tmp_path / "theta.csv"
        scn_theta.write_text(",".join(["1.0"] * 9))
        out = tmp_path / "trace.csv"
        code = main(["equilibrium", "--scenario", str(DATA / "sixnode_paths.json"),
                     "--T", "20", "--theta", str(scn_theta), "--out", str(out)])
        assert code == 0

    def test_subsampled_lmo_flag(self, tmp_path):
        out = tmp_path / "trace.csv"
        code = main(["equilibrium", "--scenario", str(DATA / "sixnode_paths.json"),
                     "--T", "30", "--lmo", "zdd_subsampled", "--scheme", "UL",
                     "--m", "8", "--seed", "5", "--out", str(out)])
        assert code == 0


class TestOptimizeCommand:
    def test_trace_and_determinism(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            code = main(["optimize", "--scenario", str(DATA / "example1_bench.json"),
                         "--K", "5", "--seed", "3", "--out", str(out)])
            assert code == 0
        assert normalize_csv(a.read_text()) == normalize_csv(b.read_text())
        header = a.read_text().splitlines()[0]
        assert header == "outer_iter,phi_hat,ghat_norm,grad_map_norm,wall_ms,max_inner_gap"

    def test_seed_changes_trace(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["optimize", "--scenario", str(DATA / "example1_bench.json"),
              "--K", "5", "--seed", "3", "--out", str(a)])
        main(["optimize", "--scenario", str(DATA / "example1_bench.json"),
              "--K", "5", "--seed", "4", "--out", str(b)])
        assert normalize_csv(a.read_text()) != normalize_csv(b.read_text())


class TestBenchCommand:
    def test_end_to_end(self, tmp_path):
        code = main(["bench", "--scenario", str(DATA / "example1_bench.json"),
                     "--reps", "2", "--workers", "2", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "summary.csv").exists()
        runs = sorted(p.name for p in tmp_path.glob("*-s*.csv"))
        assert len(runs) == 6

    def test_byte_identical_given_seeds(self, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        for out in (out1, out2):
            main(["bench", "--scenario", str(DATA / "example1_bench.json"),
                  "--reps", "2", "--workers", "1", "--out", str(out)])
        for name in ("exact-s0.csv", "US-m4-s1.csv", "summary.csv"):
            a = normalize_csv((out1 / name).read_text())
            b = normalize_csv((out2 / name).read_text())
            assert a == b, name
        shutil.rmtree(out1)
