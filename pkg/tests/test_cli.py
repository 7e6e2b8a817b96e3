
import numpy as np
import pytest

from bsemwave import cli
from bsemwave.couple import FieldSolution
from bsemwave.mesh import build_structured_mesh


def test_parse_examples():
    c = cli.parse_args("converge --case plane-wave --h 0.2 --p 2..12 --method sem".split())
    assert c.command == "converge" and c.p == list(range(2, 13)) and c.h == 0.2 and c.method == "sem"
    c = cli.parse_args("run --case circular-shoal --p 5 --ref-p 15".split())
    assert c.case == "circular-shoal" and c.p == 5 and c.ref_p == 15
    c = cli.parse_args("run --case elliptic-shoal --p 6".split())
    assert c.case == "elliptic-shoal" and c.p == 6
    c = cli.parse_args("converge --case plane-wave --h 1/15 --p 3,5".split())
    assert c.h == pytest.approx(1 / 15) and c.p == [3, 5]


@pytest.mark.parametrize("argv", [
    "run --case circular-shoal --bogus 1",
    "run --case circular-shoal --p five",
    "run --p 5",
    "converge --case plane-wave --p 0..3",
    "run --case nowhere",
    "run --case plane-wave",
    "converge --case plane-wave --section z=1",
    "",
])
def test_usage_errors_exit_2(argv, capsys):
    assert cli.main(argv.split()) == 2
    assert capsys.readouterr().err


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\ncase = circular-shoal\np = 7\nsection = y=1.2; x=2\nno-timing = yes\n", encoding="utf-8")
    c = cli.parse_args(["run", "--config", str(cfg), "--p", "4"])
    assert c.case == "circular-shoal" and c.p == 4 and c.section == [("y", 1.2), ("x", 2.0)] and c.no_timing
    bad = tmp_path / "bad.cfg"
    bad.write_text("case = circular-shoal\nwibble = 3\n", encoding="utf-8")
    with pytest.raises(cli.UsageError):
        cli.parse_args(["run", "--config", str(bad)])
    assert cli.main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2


def _solution(n, rng):
    z = rng.normal(size=n) + 1j * rng.normal(size=n)
    return FieldSolution(z, np.zeros(0), z / 3, np.abs(z), np.abs(z) / 2, 0.0)


def test_field_csv_roundtrip(tmp_path, rng):
    mesh = build_structured_mesh((0, 1, 0, 1), 2, 2, 3)
    sol = _solution(mesh.n_nodes, rng)
    path = tmp_path / "f.csv"
    cli.write_field_csv(sol, mesh, path)
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    header, rows = cli.read_csv(path)
    assert header == list(cli.FIELD_COLUMNS) and len(rows) == mesh.n_nodes
    rows = np.array(rows)
    assert np.array_equal(rows[:, 0], mesh.nodes[:, 0])
    assert np.array_equal(rows[:, 2] + 1j * rows[:, 3], sol.phi_hat)
    assert np.array_equal(rows[:, 7], sol.height_norm)


def test_empty_field_is_header_only(tmp_path):
    path = tmp_path / "e.csv"
    cli.write_field_csv(None, None, path)
    assert path.read_text() == ",".join(cli.FIELD_COLUMNS) + "\n"


def test_converge_command(tmp_path):
    argv = ["converge", "--case", "plane-wave", "--h", "1/5", "--p", "3..5", "--method", "sem",
            "--out", str(tmp_path), "--no-timing", "--threads", "1"]
    assert cli.main(argv) == 0
    header, rows = cli.read_csv(tmp_path / "convergence_plane_wave_sem_h0.2.csv")
    assert header == list(cli.CONVERGENCE_COLUMNS)
    assert [r[0] for r in rows] == [3, 4, 5] and all(r[5] == 0 for r in rows)
    assert rows[0][3] > rows[1][3] > rows[2][3]


def test_dump_mesh_and_kernel_check(tmp_path):
    assert cli.main(["dump-mesh", "--case", "plane-wave", "--p", "2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "mesh_plane_wave_p2.txt").read_text().startswith("# order 2")
    assert cli.main(["kernel-check", "--pairs", "20", "--out", str(tmp_path)]) == 0
    header, rows = cli.read_csv(tmp_path / "kernel_check_constant.csv")
    assert header == list(cli.KERNEL_COLUMNS) and len(rows) == 20
    assert max(r[-1] for r in rows) < 1e-6


def test_io_failure_exit_1(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    argv = ["dump-mesh", "--case", "plane-wave", "--p", "2", "--out", str(blocker)]
    assert cli.main(argv) == 1
