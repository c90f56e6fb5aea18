import json
import re

import pytest

from errors import InputError, InsufficientDataError
from plots import plot_scatter_fit, plot_trace, read_points_csv

ROWS = [(1, -4.0, -4.0, 0.0), (2, -3.5, -4.0, 0.0), (3, -6.0, -6.0, 0.0), (4, -7.5, -7.5, 0.0)]


def _description(svg: str) -> dict:
    match = re.search(r"<dc:description>(.*?)</dc:description>", svg, re.S)
    assert match is not None
    return json.loads(match.group(1).replace("&quot;", '"'))


def test_trace_figure(tmp_path):
    path = tmp_path / "trace.svg"
    plot_trace(ROWS, str(path), e0=-8.0, title="ring N=4")
    svg = path.read_text()
    assert 'id="best-so-far"' in svg
    assert 'id="ground-state"' in svg
    data = _description(svg)
    assert data["best"] == [-4.0, -4.0, -6.0, -7.5]
    assert data["e0"] == -8.0


def test_figures_are_byte_stable(tmp_path):
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    plot_trace(ROWS, str(first), log_x=True)
    plot_trace(ROWS, str(second), log_x=True)
    assert first.read_bytes() == second.read_bytes()


def test_empty_trace_is_rejected(tmp_path):
    with pytest.raises(InputError):
        plot_trace([], str(tmp_path / "empty.svg"))


def test_scatter_fit_on_a_line(tmp_path):
    path = tmp_path / "fit.svg"
    fit = plot_scatter_fit([(1, 2.0), (2, 4.0), (3, 6.0)], str(path), x_label="N", y_label="E")
    assert fit.slope == pytest.approx(2.0)
    svg = path.read_text()
    assert "residual = 0" in svg
    assert 'id="fit-line"' in svg
    assert _description(svg)["slope"] == pytest.approx(2.0)


def test_scatter_fit_needs_two_points(tmp_path):
    with pytest.raises(InsufficientDataError):
        plot_scatter_fit([(1, 2.0)], str(tmp_path / "one.svg"))


def test_points_csv(tmp_path):
    good = tmp_path / "points.csv"
    good.write_text("x,y\n1,2.5\n2,3.5\n\n")
    assert read_points_csv(str(good)) == [(1.0, 2.5), (2.0, 3.5)]
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,two\n")
    with pytest.raises(InputError, match="line 2"):
        read_points_csv(str(bad))
    with pytest.raises(InputError):
        read_points_csv(str(tmp_path / "missing.csv"))
    header = tmp_path / "header.csv"
    header.write_text("n,energy\n1,2\n")
    with pytest.raises(InputError):
        read_points_csv(str(header))
