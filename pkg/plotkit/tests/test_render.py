"""Rendering behavior: panel fan-out, scheme checks, error paths."""

from pathlib import Path

import pytest

from plotkit import PlotSpec, TableError, render

FIXTURE = Path(__file__).parent / "data" / "fixture_results.csv"


def test_one_panel_per_speed(tmp_path):
    spec = PlotSpec(table_paths=(str(FIXTURE),), metric="ber",
                    output_path=str(tmp_path / "ber.png"))
    written = render(spec)
    assert [p.name for p in written] == ["ber-v3.6kmh.png", "ber-v36kmh.png"]
    for p in written:
        assert p.stat().st_size > 2000


def test_single_scheme_three_points(tmp_path):
    table = tmp_path / "one.csv"
    table.write_text(
        "scheme,speed_kmh,esn0_db,ebn0_db,frames,bit_errors,ber,goodput,seed\n"
        "gs,36.0,4.0,4.0,10,400,0.2,2.1343749999999999,7\n"
        "gs,36.0,8.0,8.0,10,100,0.05,2.5345703125,7\n"
        "gs,36.0,12.0,12.0,10,10,0.005,2.6546289062500002,7\n"
    )
    spec = PlotSpec(table_paths=(str(table),), metric="goodput",
                    output_path=str(tmp_path / "gp.png"))
    written = render(spec)
    assert len(written) == 1


def test_missing_scheme_rejected_before_writing(tmp_path):
    out = tmp_path / "x.png"
    spec = PlotSpec(table_paths=(str(FIXTURE),), metric="ber",
                    schemes=("gs", "perfect-csi"), output_path=str(out))
    with pytest.raises(TableError, match="perfect-csi"):
        render(spec)
    assert not list(tmp_path.glob("*.png"))


def test_empty_table_writes_nothing(tmp_path):
    table = tmp_path / "empty.csv"
    table.write_text("scheme,speed_kmh,esn0_db,ebn0_db,frames,bit_errors,ber,goodput,seed\n")
    spec = PlotSpec(table_paths=(str(table),), output_path=str(tmp_path / "y.png"))
    with pytest.raises(TableError, match="no rows"):
        render(spec)
    assert not list(tmp_path.glob("*.png"))


def test_metric_validated():
    with pytest.raises(ValueError, match="metric"):
        PlotSpec(table_paths=("t.csv",), metric="throughput")


def test_cli_renders(tmp_path, capsys):
    from plotkit.cli import main
    out = tmp_path / "cli.png"
    assert main([str(FIXTURE), "--metric", "goodput", "--output", str(out),
                 "--scheme", "gs", "--scheme", "lmmse", "--label", "1P"]) == 0
    printed = capsys.readouterr().out.strip().splitlines()
    assert len(printed) == 2
    assert all(Path(p).exists() for p in printed)


def test_cli_reports_errors(tmp_path, capsys):
    from plotkit.cli import main
    bad = tmp_path / "bad.csv"
    bad.write_text("nope\n")
    assert main([str(bad)]) == 2
    assert "error:" in capsys.readouterr().err
