import numpy as np
import pytest

from dynephase import _accel
from dynephase.config import SimConfig
from dynephase.harness import run_ensemble, run_simulate
from dynephase.policies import ConstantEpsilon, Corrected, Heterodyne, MarkI, MarkII, TimeEpsilon
from dynephase.sde import TimeGrid, simulate_ensemble
from dynephase.squeezed import make_optimal_squeezed

POLICIES = [Heterodyne(), MarkI(), MarkII(), ConstantEpsilon(0.4), TimeEpsilon(), Corrected(lam=1e-3)]


@pytest.mark.parametrize("policy", POLICIES, ids=lambda p: p.name)
def test_numba_matches_numpy(policy):
    state = make_optimal_squeezed(1000)
    grid = TimeGrid.step_rule(1000)
    kw = dict(random_phase=True, checkpoints=(0.5,))
    a = simulate_ensemble(state, policy, grid, range(37), 21, backend="numba", **kw)
    b = simulate_ensemble(state, policy, grid, range(37), 21, backend="numpy", **kw)
    # both backends draw identical noise; only libm rounding differs
    assert np.max(np.abs(a.A - b.A)) < 1e-10
    assert np.max(np.abs(a.B - b.B)) < 1e-10
    assert np.max(np.abs(np.angle(np.exp(1j * (a.theta_hat - b.theta_hat))))) < 1e-10
    assert np.array_equal(a.status, b.status)


def test_backend_env(monkeypatch):
    monkeypatch.setenv(_accel.ENV_VAR, "numpy")
    assert _accel.default_backend() == "numpy"
    monkeypatch.setenv(_accel.ENV_VAR, "numba")
    assert _accel.default_backend() == "numba"
    monkeypatch.setenv(_accel.ENV_VAR, "fortran")
    with pytest.raises(ValueError):
        _accel.default_backend()


def test_chunking_does_not_change_trajectories():
    cfg = SimConfig(nbar=400, policy=TimeEpsilon(), n_trajectories=100, seed=4)
    whole = run_ensemble(cfg, 1)
    part = run_ensemble(cfg, 1, indices=range(50, 100))
    assert np.array_equal(whole.A[50:], part.A)
    assert np.array_equal(whole.true_phase[50:], part.true_phase)


def test_worker_count_invariance(tmp_path):
    outs = []
    for w in (1, 3):
        d = tmp_path / f"w{w}"
        run_simulate(SimConfig(nbar=400, policy=ConstantEpsilon(0.5), n_trajectories=150, seed=8,
                               out_dir=str(d)), w)
        outs.append({p.name: p.read_bytes() for p in d.glob("*.csv")})
    assert outs[0] == outs[1]
