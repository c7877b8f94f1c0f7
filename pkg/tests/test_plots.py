import subprocess
import sys

import numpy as np

from seeiirfit import plots
from seeiirfit.forecast import PredictiveSummary

from test_mcmc import make_draws


def band_summary():
    rng = np.random.default_rng(5)
    q = np.sort(rng.random((10, 5)) * 40, axis=1)
    return PredictiveSummary(quantiles=q,
                             phase=np.array(["fitted"] * 6 + ["forecast"] * 4),
                             week_labels=np.arange(40, 50))


def test_predictive_bands_returns_figure_without_path():
    fig = plots.predictive_bands(band_summary(), observed=np.arange(10.0))
    assert fig is not None
    assert fig.axes


def test_band_file_rendering(tmp_path):
    out = tmp_path / "bands.png"
    result = plots.predictive_bands(band_summary(), path=out)
    assert result is None
    assert out.stat().st_size > 0


def test_trace_renders_all_parameters(tmp_path):
    draws = make_draws(np.random.default_rng(0).random((50, 6)))
    out = tmp_path / "trace.png"
    plots.trace(draws, path=out)
    assert out.exists()


def test_module_entry_point_runs():
    result = subprocess.run([sys.executable, "-m", "seeiirfit", "--version"],
                            capture_output=True, text=True)
    assert result.returncode == 0
    assert result.stdout.strip()
