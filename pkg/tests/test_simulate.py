import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gamma_quadrature_trajectory
from wcnet.connectivity import bi_ring, from_matrix, uni_ring
from wcnet.kernels import DiracShifted, Gamma, NoDelay, Uniform, strong_gamma, weak_gamma
from wcnet.model import preset_params, sigmoid
from wcnet.simulate import (History, SimConfig, StepSizeError, SweepConfig, Trajectory,
                            chain_jacobian, classify_sync, constant_history,
                            equilibrium_history, history_span, integrate,
                            perturbed_equilibrium_history, point_seed, simulate_point, sweep,
                            write_sweep_csv)
from wcnet.spectral import char_factor, polynomial_roots

ALL_KERNELS = [NoDelay(), DiracShifted(0.1), Uniform(0.1, 0.1), Uniform(0.3, 0.1), weak_gamma(0.1),
               strong_gamma(0.1)]


def slope_matched_history(params, conn, kernel, base):
    """Linear past ``e + v t`` with ``v`` equal to the right derivative at 0.

    Removes the derivative jump that a constant past puts at t = 0 and that
    delays carry to off-grid times.
    """
    v = np.zeros(conn.n)
    for _ in range(200):
        delayed = base.e - v * kernel.mean_delay()
        v = (-base.e + sigmoid(params.w_e * conn.matrix @ delayed - base.w_ei * base.i, params.a)) / params.tau1
    return History(base.e, base.i, base.w_ei, past=lambda t: base.e + v * t)


@pytest.mark.parametrize("kernel", ALL_KERNELS)
def test_equilibrium_is_preserved(kernel):
    params = preset_params(1.5, 2.2)
    traj = integrate(params, kernel, uni_ring(6), equilibrium_history(params, 6), 100.0, 0.01)
    eq = equilibrium_history(params, 6)
    assert np.max(np.abs(traj.e - eq.e)) < 1e-9
    assert np.max(np.abs(traj.i - eq.i)) < 1e-9
    assert np.max(np.abs(traj.w_ei - eq.w_ei)) < 1e-9


@pytest.mark.parametrize("kernel", ALL_KERNELS)
@pytest.mark.parametrize("conn", [uni_ring(7), bi_ring(8)], ids=["uni7", "bi8"])
def test_synchronous_subspace_is_invariant(kernel, conn):
    params = preset_params(1.0, 2.4)
    hist = constant_history(0.35, 0.6, 1.1, conn.n)
    traj = integrate(params, kernel, conn, hist, 200.0, 0.01)
    spread = np.max(traj.e, axis=1) - np.min(traj.e, axis=1)
    assert np.max(spread) < 1e-8
    # the run actually goes somewhere
    assert np.ptp(traj.e[:, 0]) > 0.1


def test_synchronous_subspace_with_random_row_stochastic_matrix():
    rng = np.random.default_rng(4)
    raw = rng.uniform(size=(6, 6))
    np.fill_diagonal(raw, 0.0)
    conn = from_matrix(raw / raw.sum(axis=1, keepdims=True))
    traj = integrate(preset_params(2.0, 2.3), weak_gamma(0.2), conn,
                     constant_history(0.1, 0.5, 0.7, 6), 200.0, 0.01)
    assert np.max(np.ptp(traj.e, axis=1)) < 1e-8


def test_chain_matches_truncated_quadrature_weak_gamma():
    conn = uni_ring(10)
    params = preset_params(1.0, 1.9)
    hist = perturbed_equilibrium_history(params, conn.n)
    kernel = weak_gamma(0.1)
    dt = 0.005
    traj = integrate(params, kernel, conn, hist, 50.0, dt)
    _, ref = gamma_quadrature_trajectory(params.p, params.a, params.tau1, params.tau2, params.w_ie,
                                         params.w_e, conn.matrix, kernel.m, kernel.gamma, hist.e,
                                         hist.i, hist.w_ei, 50.0, dt, cutoff=10.0, renormalize=False)
    assert np.max(np.abs(traj.e - ref[:, :conn.n])) <= 1e-4


@pytest.mark.parametrize("kernel", [weak_gamma(0.1), strong_gamma(0.1)])
def test_quadrature_converges_to_chain_on_oscillating_orbit(kernel):
    """On a large orbit the oracle's own O(dt^2) history interpolation dominates the gap.

    With a 30/gamma cutoff (tail mass < 1e-11) the gap must shrink about
    fourfold when the oracle's step and node spacing are halved.
    """
    conn = uni_ring(10)
    params = preset_params(1.2, 1.98)
    hist = perturbed_equilibrium_history(params, conn.n, 0.05, 3)
    gaps = []
    for dt, nodes in ((0.005, 601), (0.0025, 1201)):
        traj = integrate(params, kernel, conn, hist, 50.0, dt)
        assert np.ptp(traj.e) > 0.2
        _, ref = gamma_quadrature_trajectory(params.p, params.a, params.tau1, params.tau2,
                                             params.w_ie, params.w_e, conn.matrix, kernel.m,
                                             kernel.gamma, hist.e, hist.i, hist.w_ei, 50.0, dt,
                                             nodes=nodes, cutoff=30.0)
        gaps.append(np.max(np.abs(traj.e - ref[:, :conn.n])))
    assert gaps[1] < 2e-4
    assert gaps[0] / gaps[1] > 3.5


def _convergence_ratio(params, kernel, conn, hist, t_end, dt):
    ref = integrate(params, kernel, conn, hist, t_end, dt / 8).e[-1]
    coarse = integrate(params, kernel, conn, hist, t_end, dt).e[-1]
    fine = integrate(params, kernel, conn, hist, t_end, dt / 2).e[-1]
    return np.max(np.abs(coarse - ref)) / np.max(np.abs(fine - ref))


@pytest.mark.parametrize("kernel", [NoDelay(), weak_gamma(0.1), strong_gamma(0.1)])
def test_fourth_order_for_ordinary_systems(kernel):
    conn = uni_ring(10)
    params = preset_params(1.2, 1.98)
    hist = perturbed_equilibrium_history(params, conn.n, 0.05, 1)
    ratio = _convergence_ratio(params, kernel, conn, hist, 20.0, 0.02)
    assert ratio == pytest.approx(16.0, rel=0.15)


@pytest.mark.parametrize("kernel", [DiracShifted(0.1), Uniform(0.1, 0.05), Uniform(0.1, 0.1),
                                    Uniform(0.3, 0.1)])
def test_convergence_with_interpolated_history(kernel):
    conn = uni_ring(10)
    params = preset_params(1.2, 1.98)
    base = perturbed_equilibrium_history(params, conn.n, 0.05, 1)
    hist = slope_matched_history(params, conn, kernel, base)
    assert _convergence_ratio(params, kernel, conn, hist, 20.0, 0.02) >= 8.0


def test_step_size_guard():
    params = preset_params(1.0, 2.0)
    hist = equilibrium_history(params, 4)
    with pytest.raises(StepSizeError):
        integrate(params, DiracShifted(0.1), uni_ring(4), hist, 10.0, 0.03)
    with pytest.raises(StepSizeError):
        integrate(params, Uniform(0.2, 0.1), uni_ring(4), hist, 10.0, 0.06)
    integrate(params, Uniform(0.2, 0.1), uni_ring(4), hist, 1.0, 0.05)


def test_integrate_validates_inputs():
    params = preset_params(1.0, 2.0)
    with pytest.raises(ValueError):
        integrate(params, NoDelay(), uni_ring(4), equilibrium_history(params, 5), 10.0)
    with pytest.raises(ValueError):
        integrate(params, DiracShifted(1.0), uni_ring(4), equilibrium_history(params, 4), 0.5, 0.1)
    with pytest.raises(ValueError):
        integrate(params, NoDelay(), uni_ring(4), equilibrium_history(params, 4), 1.0, 0.0)


def test_history_spans():
    assert history_span(NoDelay()) == 0.0
    assert history_span(weak_gamma(0.5)) == 0.0
    assert history_span(DiracShifted(0.4)) == 0.4
    assert history_span(Uniform(0.4, 0.1)) == pytest.approx(0.5)


def test_chain_variables_start_from_past_moments():
    params = preset_params(1.0, 2.0)
    base = equilibrium_history(params, 3)
    hist = History(base.e, base.i, base.w_ei, past=lambda t: base.e + 0.1 * t)
    traj = integrate(params, Gamma(2, 5.0), uni_ring(3), hist, 1.0, 0.01)
    # E(-s) = e - 0.1 s, so the order-j moment is e - 0.1 j / gamma
    assert np.allclose(traj.chain[0, 0], base.e - 0.1 / 5.0, atol=1e-10)
    assert np.allclose(traj.chain[0, 1], base.e - 0.2 / 5.0, atol=1e-10)


@pytest.mark.parametrize("kernel", [weak_gamma(0.1), strong_gamma(0.1), Gamma(3, 7.0), NoDelay()])
@pytest.mark.parametrize("rk", [1.0, complex(math.cos(math.pi / 5), math.sin(math.pi / 5)), -0.5])
def test_chain_jacobian_spectrum_matches_cleared_polynomial(kernel, rk):
    for w_ie, w_e in ((0.5, 1.5), (2.0, 2.2), (4.0, 3.0)):
        params = preset_params(w_ie, w_e)
        eig = np.linalg.eigvals(chain_jacobian(params, kernel, rk))
        roots = polynomial_roots(char_factor(params, rk, kernel))
        assert eig.size == roots.size
        for z in roots:
            assert np.min(np.abs(eig - z)) < 1e-8


def test_classify_reports_equilibrium():
    params = preset_params(1.0, 1.0)
    traj = integrate(params, NoDelay(), uni_ring(5), equilibrium_history(params, 5), 120.0, 0.01)
    v = classify_sync(traj, settle_time=100.0)
    assert v.synchronized and v.pattern == "equilibrium" and v.a == 0.0


def test_classify_needs_window_after_settling():
    params = preset_params(1.0, 1.0)
    traj = integrate(params, NoDelay(), uni_ring(5), equilibrium_history(params, 5), 50.0, 0.01)
    with pytest.raises(ValueError):
        classify_sync(traj, settle_time=45.0)


def test_synchronous_oscillation_on_bidirectional_ring():
    params = preset_params(2.0, 2.3)
    v = simulate_point(params, NoDelay(), bi_ring(8), seed=5)
    assert v.synchronized and v.pattern == "synchronousPeriodic"


def test_splay_state_between_crossings():
    params = preset_params(1.2, 1.98)
    v = simulate_point(params, NoDelay(), uni_ring(10), seed=0)
    assert not v.synchronized
    assert v.pattern == "splayLike"


def test_classification_is_invariant_under_cyclic_relabeling():
    params = preset_params(1.2, 1.98)
    conn = uni_ring(10)
    hist = perturbed_equilibrium_history(params, conn.n, 0.01, 0)
    traj = integrate(params, NoDelay(), conn, hist, 600.0, 0.01)
    base = classify_sync(traj)
    for shift in (1, 3, 7):
        perm = np.roll(np.arange(conn.n), shift)
        hist_r = History(hist.e[perm], hist.i[perm], hist.w_ei[perm])
        traj_r = integrate(params, NoDelay(), conn, hist_r, 600.0, 0.01)
        # same solution with relabeled nodes
        assert np.max(np.abs(traj_r.e - traj.e[:, perm])) < 1e-12
        v = classify_sync(traj_r)
        assert v.synchronized == base.synchronized
        shifted = Trajectory(traj.times, traj.e[:, perm], traj.i[:, perm], traj.w_ei[:, perm],
                             traj.dt, traj.history_span)
        assert classify_sync(shifted).synchronized == base.synchronized


def test_desynchronization_measure_is_exactly_relabeling_invariant():
    rng = np.random.default_rng(0)
    t = np.linspace(0.0, 30.0, 3001)
    e = 0.2 + 0.1 * np.sin(t[:, None] - 2 * np.pi * np.arange(6) / 6) + 1e-3 * rng.normal(size=(1, 6))
    traj = Trajectory(t, e, e, e, 0.01, 0.0)
    a = classify_sync(traj, settle_time=10.0).a
    for shift in range(1, 6):
        perm = np.roll(np.arange(6), shift)
        # keep node 1 fixed as the reference: relabel the others cyclically
        rest = np.concatenate([[0], 1 + np.roll(np.arange(5), shift)])
        traj_r = Trajectory(t, e[:, rest], e, e, 0.01, 0.0)
        assert abs(classify_sync(traj_r, settle_time=10.0).a - a) < 1e-12
        assert perm.size == 6


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, 10_000))
def test_point_seeds_are_order_independent(master, index):
    assert point_seed(master, index) == point_seed(master, index)
    assert point_seed(master, index) != point_seed(master, index + 1)


def test_sweep_is_deterministic(tmp_path):
    cfg = SweepConfig(n_points=6, w_e_range=(1.25, 2.5), seed=11,
                      sim=SimConfig(settle_time=60.0, window=20.0))
    rows_a = sweep(preset_params(), NoDelay(), uni_ring(6), cfg)
    rows_b = sweep(preset_params(), NoDelay(), uni_ring(6), cfg)
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    write_sweep_csv(rows_a, pa, "# h")
    write_sweep_csv(rows_b, pb, "# h")
    assert pa.read_bytes() == pb.read_bytes()
    assert len(rows_a) == 6 and all(not r.stable for r in rows_a)
    assert all(r.verdict is not None for r in rows_a)


def test_parallel_sweep_matches_serial(tmp_path):
    sim = SimConfig(settle_time=40.0, window=20.0)
    serial = sweep(preset_params(), weak_gamma(0.1), uni_ring(5),
                   SweepConfig(n_points=4, w_e_range=(1.25, 2.5), seed=2, sim=sim))
    parallel = sweep(preset_params(), weak_gamma(0.1), uni_ring(5),
                     SweepConfig(n_points=4, w_e_range=(1.25, 2.5), seed=2, sim=sim, workers=2))
    assert [r.csv_fields() for r in serial] == [r.csv_fields() for r in parallel]


def test_trajectory_csv(tmp_path):
    params = preset_params(1.0, 2.0)
    traj = integrate(params, NoDelay(), uni_ring(3), equilibrium_history(params, 3), 1.0, 0.1)
    path = tmp_path / "t.csv"
    traj.to_csv(path, "# header")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[1] == "t,E_1,E_2,E_3,I_1,I_2,I_3,WEI_1,WEI_2,WEI_3"
    assert len(lines) == 2 + 11
    assert traj.final_state().e.shape == (3,)
