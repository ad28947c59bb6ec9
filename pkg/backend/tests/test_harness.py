"""
Catalogue runs, the convergence experiment and the command line
"""

import io
import json

import pandas as pd
import pytest

from backend.cli import EXIT_FAILURE, EXIT_INPUT, EXIT_OK, cli_main
from backend.services.catalogue_service import CATALOGUE, all_covers, run_catalogue, run_entry
from backend.services.convergence_service import (
    CSV_COLUMNS,
    ConvergenceSpec,
    marked_points,
    rows_to_csv,
    run_convergence,
    run_row,
    snap_puncture,
)
from backend.services.lattice_service import E, W, HalfEdge, build_domain, eta_of
from backend.services.qcyc import I_UNIT, Q8Number
from backend.utils.errors import MeshTooCoarse, PunctureOnBoundary, ToolkitInputError
from backend.utils.formatting import COEFFICIENT_COLUMNS, VALUE_COLUMNS


def test_catalogue_shape():
    assert len(CATALOGUE) == 8
    covers = sum(len(all_covers(len(build_domain(e.faces).holes))) for e in CATALOGUE)
    assert covers == 14


def test_single_entry_without_solver():
    out, count = run_entry(CATALOGUE[0], solver=False)
    assert count == 1
    assert out["pass"] is True
    assert out["covers"] == [[]]


def test_single_entry_with_solver():
    out, count = run_entry(CATALOGUE[3])
    assert count == 2
    assert out["pass"] is True, out
    assert out["checks"]["solver_agreement"]["checked"] == 2


def test_entry_detects_flipped_eta():
    out, _ = run_entry(CATALOGUE[0], flip_eta=True, solver=False)
    assert out["pass"] is False
    assert out["checks"]["spin_correlation"]["pass"] is False


@pytest.mark.slow
def test_full_catalogue_passes():
    report = run_catalogue()
    payload = report.to_dict()
    assert payload["pass"] is True, payload["first_failure"]
    assert payload["domains"] == 8
    assert payload["cover_instances"] == 14
    assert payload["first_failure"] is None


@pytest.mark.slow
def test_full_catalogue_flip_eta_fails():
    report = run_catalogue(flip_eta=True, solver=False, workers=2)
    failure = report.first_failure()
    assert not report.passed
    assert failure["check"] in ("spin_correlation", "positivity")


def test_snap_puncture():
    assert snap_puncture((0.5, 0.5), 8) == (4, 4)
    assert snap_puncture((0.3, 0.6), 10) == (3, 6)
    with pytest.raises(MeshTooCoarse):
        snap_puncture((0.5, 0.5), 2)
    with pytest.raises(MeshTooCoarse):
        snap_puncture((0.05, 0.5), 8)


def test_spec_validation():
    with pytest.raises(PunctureOnBoundary):
        ConvergenceSpec(puncture=(0.0, 0.5))
    with pytest.raises(PunctureOnBoundary):
        ConvergenceSpec(puncture=(0.5, 1.2))
    with pytest.raises(ToolkitInputError):
        ConvergenceSpec(method="monte-carlo")
    with pytest.raises(ToolkitInputError):
        ConvergenceSpec(sizes=(8, 0))
    with pytest.raises(ToolkitInputError):
        ConvergenceSpec(a_height=1.0)


def test_marked_points_sit_on_the_sides():
    a, b = marked_points(ConvergenceSpec(a_height=0.25, b_height=0.75), 8)
    assert a == HalfEdge((0, 2), W)
    assert b == HalfEdge((8, 6), E)


def test_default_marked_points_straddle_the_puncture_face():
    a, b = marked_points(ConvergenceSpec(), 8)
    assert a == HalfEdge((0, 4), W)
    assert b == HalfEdge((8, 5), E)
    a, b = marked_points(ConvergenceSpec(puncture=(0.5, 0.25)), 16)
    assert (a.vertex, b.vertex) == ((0, 4), (16, 5))


def test_enumeration_and_solver_rows_agree():
    exact = run_row(ConvergenceSpec(sizes=(3,), method="enumeration"), 3)
    numeric = run_row(ConvergenceSpec(sizes=(3,), method="solver"), 3)
    assert exact.ratio == pytest.approx(numeric.ratio, abs=1e-8)
    assert exact.theta == numeric.theta
    assert exact.snapped == (0.5, 0.5)
    assert -1.0 <= exact.ratio <= 1.0


def test_enumeration_refuses_large_meshes(monkeypatch):
    from backend.config.settings import settings

    monkeypatch.setattr(settings, "MAX_CYCLE_DIM", 4)
    with pytest.raises(ToolkitInputError):
        run_row(ConvergenceSpec(sizes=(3,), method="enumeration"), 3)


def test_csv_is_deterministic_without_timing(tmp_path):
    spec = ConvergenceSpec(puncture=(0.5, 0.5), sizes=(3, 4))
    first = rows_to_csv(run_convergence(spec), timing=False)
    second = rows_to_csv(run_convergence(spec, workers=2), tmp_path / "out" / "rows.csv", timing=False)
    assert first == second
    assert (tmp_path / "out" / "rows.csv").read_text() == first
    lines = first.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 3
    assert lines[1].startswith("3,")


def test_empty_csv_has_header():
    assert rows_to_csv([]).splitlines() == [",".join(CSV_COLUMNS)]


@pytest.mark.slow
def test_off_center_error_shrinks():
    rows = run_convergence(ConvergenceSpec(puncture=(0.5, 0.25), sizes=(8, 16, 32), a_height=0.5, b_height=0.5))
    assert [r.n for r in rows] == [8, 16, 32]
    assert rows[-1].abs_error < rows[0].abs_error
    assert rows[-1].abs_error < 0.1


@pytest.mark.slow
def test_centered_puncture_ratio_vanishes():
    rows = run_convergence(ConvergenceSpec(puncture=(0.5, 0.5), sizes=(8, 16, 32)))
    errors = [r.abs_error for r in rows]
    assert abs(rows[-1].ratio) <= 0.05
    assert errors == sorted(errors, reverse=True)


def test_cli_theta(capsys):
    assert cli_main(["theta", "--punctures", "1+1i"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["theta"] == pytest.approx(0.7071067811865476, abs=1e-15)
    assert payload["lambda"] == [0.0]


def test_cli_pfratio(capsys):
    assert cli_main(["pfratio", "--points", "-1", "1", "--punctures"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["ratio"] == pytest.approx(1.0)


def test_cli_partition_csv(capsys):
    request = {"domain": {"faces": [[0, 0]]}, "bc": {"kind": "plus"}, "components": [[0, 0]]}
    assert cli_main(["partition", "--json", json.dumps(request)]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "quantity,c0,c1,c2,c3,re,im"
    # 1 + x^4 = 18 - 12 sqrt2, expectation 2 sqrt2 / 3
    assert lines[1].startswith("partition,18/1,-12/1,0/1,12/1,1.029437251")
    assert lines[2].startswith("expectation,0/1,2/3,0/1,-2/3,0.942809041")
    assert len(lines) == 3


def test_cli_enumerate_csv(capsys):
    request = {"domain": {"faces": [[0, 0]]}}
    assert cli_main(["enumerate", "--json", json.dumps(request)]) == EXIT_OK
    frame = pd.read_csv(io.StringIO(capsys.readouterr().out), dtype=str, keep_default_na=False)
    assert list(frame.columns) == ["index", "edges", "half_edges", "size"] + VALUE_COLUMNS
    assert sorted(frame["size"]) == ["0", "4"]
    cycle = frame[frame["size"] == "4"].iloc[0]
    assert cycle["edges"].split() == ["(0;0)-(0;1)", "(0;0)-(1;0)", "(0;1)-(1;1)", "(1;0)-(1;1)"]
    assert list(cycle[COEFFICIENT_COLUMNS]) == ["17/1", "-12/1", "0/1", "12/1"]


def test_cli_obs_csv(capsys):
    request = {"domain": {"faces": [[0, 0]]}, "source": {"vertex": [0, 0], "dir": "W"}}
    assert cli_main(["obs", "--json", json.dumps(request)]) == EXIT_OK
    frame = pd.read_csv(io.StringIO(capsys.readouterr().out), dtype=str, keep_default_na=False)
    assert list(frame.columns) == ["point", "sheet"] + VALUE_COLUMNS
    assert len(frame) == 12
    at_source = frame[frame["point"] == "(0;0)W"].iloc[0]
    expected = I_UNIT * eta_of(HalfEdge((0, 0), W)) * Q8Number.from_sqrt2_form(18, -12)
    assert list(at_source[COEFFICIENT_COLUMNS]) == expected.to_payload()["coefficients"]


def test_cli_solve_csv_and_report(tmp_path, capsys):
    request = {"domain": {"faces": [[0, 0], [1, 0], [0, 1], [1, 1]]}, "source": {"vertex": [0, 0], "dir": "W"}}
    report = tmp_path / "report.json"
    assert cli_main(["solve", "--json", json.dumps(request), "--report", str(report)]) == EXIT_OK
    frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
    assert list(frame.columns) == ["point", "x", "y", "re", "im"]
    assert len(frame) == 24
    source = frame[frame["point"] == "(0;0)W"].iloc[0]
    assert (source["x"], source["y"]) == (-0.5, 0.0)
    payload = json.loads(report.read_text())
    assert payload["pass"] is True
    assert payload["h_checks"]["pass"] is True
    assert "csv" not in payload and "values" not in payload


def test_cli_config_file(tmp_path, capsys):
    config = tmp_path / "validate.json"
    config.write_text(json.dumps({"domain": {"faces": [[0, 0], [1, 0], [2, 0]]}}))
    assert cli_main(["validate", "--config", str(config)]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["valid"] is True
    assert payload["edges"] == 10


def test_cli_input_errors(capsys):
    assert cli_main(["theta", "--json", "{"]) == EXIT_INPUT
    assert cli_main(["theta", "--json", "[1, 2]"]) == EXIT_INPUT
    assert cli_main(["theta", "--punctures", "1-1i"]) == EXIT_INPUT
    assert cli_main(["validate", "--json", "{}"]) == EXIT_INPUT
    assert cli_main(["no-such-command"]) == EXIT_INPUT
    err = capsys.readouterr().err
    assert "NotInUpperHalfPlane" in err


def test_cli_identity_failure_exit_code(capsys):
    request = {"domain": {"faces": [[0, 0]]}, "source": {"vertex": [0, 0], "dir": "W"}, "flip_eta": True}
    assert cli_main(["check", "--json", json.dumps(request)]) == EXIT_FAILURE
    assert json.loads(capsys.readouterr().out)["pass"] is False


def test_cli_converge_writes_csv(tmp_path, capsys):
    output = tmp_path / "rows.csv"
    request = {"sizes": [3], "timing": False}
    assert cli_main(["converge", "--json", json.dumps(request), "--output", str(output)]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert output.read_text() == out


@pytest.mark.slow
def test_cli_catalogue(capsys):
    assert cli_main(["catalogue"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["pass"] is True
