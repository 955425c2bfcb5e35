import pytest

pytest.importorskip("matplotlib")

from idmc.cli import main as cli_main  # noqa: E402
from idmc.plotting import main as plot_main  # noqa: E402
from idmc.plotting import render_directory  # noqa: E402


def test_render_cli_outputs(tmp_path):
    out = str(tmp_path)
    assert cli_main(["simulate", "--out", out, "--set", "simulate.n_fields=3"]) == 0
    assert cli_main(["expand", "--out", out]) == 0
    written = render_directory(tmp_path, max_fields=2)
    names = {p.name for p in written}
    assert len([n for n in names if n.startswith("field_")]) == 2
    assert "expansion.png" in names
    assert all(p.stat().st_size > 0 for p in written)


def test_render_empty_directory(tmp_path):
    assert render_directory(tmp_path) == []
    assert plot_main([str(tmp_path)]) == 0
