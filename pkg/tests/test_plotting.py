import numpy as np

from moistpe import plotting
from moistpe.energy import report
from moistpe.forcing import random_state
from moistpe.timestepper import StepConfig, run

PNG = b"\x89PNG"


def _is_png(path):
    return path.read_bytes()[:4] == PNG


def test_energy_and_state_figures(tmp_path, g8, forced):
    snaps = run(random_state(g8, forced, 0, 0.2), forced, g8, StepConfig(dt=0.02, t_end=0.1, snapshot_every=1),
                keep_snapshots=True).snapshots
    hist = [report(b, a, forced, g8) for a, b in zip([None] + snaps[:-1], snaps)]
    assert _is_png(plotting.energy_figure(hist, tmp_path / "e.png"))
    assert _is_png(plotting.state_figure(snaps[-1], g8, tmp_path / "sub" / "s.png", level=0))


def test_series_figure_pairs_times(tmp_path):
    t0, t1 = np.linspace(0, 1, 5), np.linspace(0, 1, 9)
    series = {"time_0": t0, "dH_0": np.exp(-t0), "time_1": t1, "dH_1": np.exp(-2 * t1), "orphan": np.ones(3)}
    assert _is_png(plotting.series_figure(series, tmp_path / "s.png", "x", logy=True))


def test_convergence_and_covering_figures(tmp_path):
    assert _is_png(plotting.convergence_figure([8, 16, 32], [1e-2, 2.5e-3, 6e-4], tmp_path / "c.png"))
    assert _is_png(plotting.covering_figure([(1.0, 1), (0.5, 2), (0.25, 4)], tmp_path / "k.png", 0.5))
