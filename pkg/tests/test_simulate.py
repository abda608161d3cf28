"""Path simulator: exact heat decay, replay, blow-up, energy balance."""
import json
import math

import numpy as np
import pytest

from vortexlab.lattice import ForcingGeometry
from vortexlab.simulate import (BlowUpError, SimConfig, Trajectory,
                                enstrophy_residual, forcing_energy_rate,
                                noise_scale, simulate)
from vortexlab.spectral import Basis, SpectralField, TWO_PI_SQ

from conftest import Z_STAR, field_from_dict

EMPTY = ForcingGeometry(frozenset())
CANONICAL = ForcingGeometry(frozenset(Z_STAR))


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(nu=0.0, forcing=EMPTY)
    with pytest.raises(ValueError):
        SimConfig(nu=1.0, forcing=EMPTY, dt=2.0, t_final=1.0)
    with pytest.raises(ValueError):
        SimConfig(nu=1.0, forcing=ForcingGeometry(frozenset({(7, 0), (-7, 0)})),
                  radius=6.0)


def test_single_mode_heat_decay_is_exact():
    # No forcing, single mode: the integrator reproduces e^{-nu |k|^2 t}
    # exactly on every grid node (the linear part is integrated exactly and
    # a lone mode has no self-interaction).
    basis = Basis.build(4.0)
    init = SpectralField.single_mode(basis, (2, 1), 0.7)
    cfg = SimConfig(nu=0.3, forcing=EMPTY, dt=1e-2, t_final=0.5, initial=init)
    traj = simulate(cfg)
    idx = basis.index[(2, 1)]
    want = 0.7 * np.exp(-0.3 * 5.0 * traj.times)
    assert np.max(np.abs(traj.states[:, idx] - want)) < 1e-13
    others = np.delete(traj.states, idx, axis=1)
    assert np.max(np.abs(others)) == 0.0


def test_replay_is_bit_exact():
    cfg = SimConfig(nu=0.5, forcing=CANONICAL, radius=3.0,
                    dt=1e-3, t_final=0.1, seed=42)
    a = simulate(cfg, path_index=3)
    b = simulate(cfg, path_index=3, increments=a.increments)
    assert np.array_equal(a.states, b.states)
    # fresh draw from the same (seed, path) is also identical
    c = simulate(cfg, path_index=3)
    assert np.array_equal(a.states, c.states)
    # different path index decorrelates
    d = simulate(cfg, path_index=4)
    assert not np.array_equal(a.increments, d.increments)


def test_blow_up_raises():
    basis = Basis.build(3.0)
    rng = np.random.default_rng(1)
    init = SpectralField(basis, 1e6 * rng.standard_normal(len(basis)))
    cfg = SimConfig(nu=1e-6, forcing=EMPTY, dt=0.5, t_final=10.0, initial=init)
    with pytest.raises(BlowUpError):
        simulate(cfg)


def test_grid_index_rejects_off_grid_times():
    cfg = SimConfig(nu=1.0, forcing=CANONICAL, radius=2.0,
                    dt=1e-2, t_final=0.1)
    traj = simulate(cfg)
    assert traj.grid_index(0.05) == 5
    with pytest.raises(ValueError):
        traj.grid_index(0.0512)
    with pytest.raises(ValueError):
        traj.grid_index(-0.01)
    with pytest.raises(ValueError):
        traj.grid_index(0.2)


def test_wiener_path_is_cumulative_sum():
    cfg = SimConfig(nu=1.0, forcing=CANONICAL, radius=2.0,
                    dt=1e-2, t_final=0.2, seed=7)
    traj = simulate(cfg)
    W = traj.wiener_path()
    assert np.array_equal(W[0], np.zeros(4))
    assert np.allclose(np.diff(W, axis=0), traj.increments, atol=0)
    # increment variance should be about dt
    var = np.var(traj.increments)
    assert 0.3 * cfg.dt < var < 3.0 * cfg.dt


def test_noise_scale_matches_ou_variance():
    # Integrated OU variance over one step: (1 - e^{-2 nu lam dt})/(2 nu lam),
    # cross-checked against high-resolution quadrature of the kernel.
    nu, dt = 0.7, 1e-2
    lam = np.array([1.0, 5.0, 13.0])
    want = np.sqrt((1 - np.exp(-2 * nu * lam * dt)) / (2 * nu * lam))
    got = noise_scale(nu, lam, dt)
    assert np.allclose(got, want, rtol=0, atol=0)
    s = np.linspace(0.0, dt, 20001)
    for i, l in enumerate(lam):
        kernel = np.exp(-2 * nu * l * (dt - s))
        assert np.trapezoid(kernel, s) == pytest.approx(got[i] ** 2, rel=1e-6)


def test_forcing_energy_rate_counts_modes():
    cfg = SimConfig(nu=1.0, forcing=CANONICAL, radius=2.0,
                    dt=1e-2, t_final=0.1)
    traj = simulate(cfg)
    assert forcing_energy_rate(traj) == pytest.approx(4 * TWO_PI_SQ)


def test_deterministic_enstrophy_residual_small():
    # Zero noise: r(t) reduces to the O(dt) quadrature error of the exact
    # dissipation balance.
    basis = Basis.build(3.0)
    init = field_from_dict(basis, {(1, 0): 1.0, (1, 1): -0.5, (2, 1): 0.3})
    cfg = SimConfig(nu=0.5, forcing=EMPTY, dt=1e-3, t_final=0.5, initial=init)
    traj = simulate(cfg)
    r = enstrophy_residual(traj)
    drift_free = r + forcing_energy_rate(traj) * traj.times  # remove -E0 t
    assert np.max(np.abs(drift_free)) < 5e-3


def test_stochastic_residual_mean_near_zero():
    cfg = SimConfig(nu=0.5, forcing=CANONICAL, radius=3.0,
                    dt=1e-3, t_final=0.3, seed=11)
    finals = [enstrophy_residual(simulate(cfg, path_index=p))[-1]
              for p in range(60)]
    finals = np.array(finals)
    se = finals.std(ddof=1) / math.sqrt(len(finals))
    assert abs(finals.mean()) < 4.0 * se + 0.05


def test_control_steers_forced_modes():
    cfg = SimConfig(nu=1.0, forcing=CANONICAL, radius=2.0,
                    dt=1e-3, t_final=0.05)
    n = cfg.n_steps()
    control = np.ones((n, 4))
    zero_inc = np.zeros((n, 4))
    traj = simulate(cfg, increments=zero_inc, control=control)
    forced_vals = traj.states[-1][traj.forced_indices]
    assert np.all(forced_vals > 0.0)


def test_jsonl_roundtrip(tmp_path):
    cfg = SimConfig(nu=1.0, forcing=CANONICAL, radius=2.0,
                    dt=1e-2, t_final=0.05, seed=3)
    traj = simulate(cfg)
    path = tmp_path / "traj.jsonl"
    traj.to_jsonl(path)
    lines = path.read_text().strip().splitlines()
    header = json.loads(lines[0])["header"]
    assert header["nu"] == 1.0 and header["seed"] == 3
    recs = [json.loads(x) for x in lines[1:]]
    assert len(recs) == traj.n_steps() + 1
    states = np.array([r["coeffs"] for r in recs])
    assert np.array_equal(states, traj.states)
    incs = np.array([r["increments"] for r in recs[1:]])
    assert np.array_equal(incs, traj.increments)


def test_norms_csv(tmp_path):
    cfg = SimConfig(nu=1.0, forcing=CANONICAL, radius=2.0,
                    dt=1e-2, t_final=0.05, seed=3)
    traj = simulate(cfg)
    path = tmp_path / "norms.csv"
    traj.norms_to_csv(path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "time,enstrophy,h1_sq"
    values = np.array([[float(v) for v in row.split(",")] for row in rows[1:]])
    assert np.array_equal(values[:, 1], traj.enstrophy_series())
    assert np.array_equal(values[:, 2], traj.h1_series())
