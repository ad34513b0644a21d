"""Nonlinear network integration and synchrony classification.

Each node evolves as::

    tau1 E_i' = -E_i + phi(w_e sum_j L_ij (g * E_j)(t) - W_i I_i)
         I_i' = -I_i + phi(w_ie E_i)
    tau2 W_i' = I_i (E_i - p)

The convolution ``(g * E)(t) = int g(s) E(t - s) ds`` is handled per kernel:
the current value (no delay), a Hermite interpolant of stored history
(discrete delay), trapezoid quadrature over that interpolant (uniform), or
auxiliary chain variables (gamma).  Time stepping is classical RK4.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit
from scipy.integrate import quad_vec
from scipy.signal import find_peaks

from .connectivity import Connectivity
from .kernels import DelayKernel, DiracShifted, Gamma, NoDelay, Uniform
from .model import ModelParams, equilibrium, lin_coeffs

DEFAULT_DT = 0.01
DEFAULT_SETTLE = 500.0
DEFAULT_WINDOW = 100.0
DEFAULT_QUAD_NODES = 33
SYNC_THRESHOLD = 1e-3

_KIND_NONE, _KIND_DIRAC, _KIND_UNIFORM, _KIND_GAMMA = 0, 1, 2, 3


class SimulationError(RuntimeError):
    pass


class StepSizeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# compiled core


@njit(cache=True)
def _sig(x, a):
    z = -a * x
    if z > 700.0:
        z = 700.0
    elif z < -700.0:
        z = -700.0
    return 1.0 / (1.0 + math.exp(z))


@njit(cache=True)
def _accumulate(s, weight, eh, deh, t0, dt, ncur, d_left, idx0, n, buf):
    """``buf += weight * E(s)`` for every node, E from the cubic Hermite history."""
    u = (s - t0) / dt
    k = int(math.floor(u))
    if k > ncur - 1:
        k = ncur - 1
    if k < 0:
        k = 0
    th = u - k
    th2 = th * th
    om = 1.0 - th
    h00 = (1.0 + 2.0 * th) * om * om
    h10 = th * om * om * dt
    h01 = th2 * (3.0 - 2.0 * th)
    h11 = th2 * (th - 1.0) * dt
    # the stored slope at t=0 is the right-hand one; the past side may differ
    left = k + 1 == idx0 and th <= 1.0
    for i in range(n):
        d1 = d_left[i] if left else deh[k + 1, i]
        buf[i] += weight * (h00 * eh[k, i] + h10 * deh[k, i] + h01 * eh[k + 1, i] + h11 * d1)


@njit(cache=True)
def _rhs(kind, t, y, dy, n, lmat, w_e, w_ie, p, a, tau1, tau2, m, gamma, tau, sigma,
         qx, qw, eh, deh, t0, dt, ncur, d_left, idx0, buf):
    if kind == 0:
        for i in range(n):
            buf[i] = y[i]
    elif kind == 3:
        off = 3 * n + (m - 1) * n
        for i in range(n):
            buf[i] = y[off + i]
    else:
        for i in range(n):
            buf[i] = 0.0
        if kind == 1:
            _accumulate(t - tau, 1.0, eh, deh, t0, dt, ncur, d_left, idx0, n, buf)
        else:
            for q in range(qx.size):
                _accumulate(t - tau + sigma * qx[q], qw[q], eh, deh, t0, dt, ncur, d_left, idx0, n, buf)
    for i in range(n):
        c = 0.0
        for j in range(n):
            c += lmat[i, j] * buf[j]
        e = y[i]
        inh = y[n + i]
        dy[i] = (-e + _sig(w_e * c - y[2 * n + i] * inh, a)) / tau1
        dy[n + i] = -inh + _sig(w_ie * e, a)
        dy[2 * n + i] = inh * (e - p) / tau2
    if kind == 3:
        for j in range(m):
            for i in range(n):
                prev = y[i] if j == 0 else y[3 * n + (j - 1) * n + i]
                idx = 3 * n + j * n + i
                dy[idx] = gamma * (prev - y[idx])


@njit(cache=True)
def _run(kind, n, lmat, w_e, w_ie, p, a, tau1, tau2, m, gamma, tau, sigma, qx, qw,
         y0, eh, deh, d_left, idx0, nsteps, dt, record_every, out):
    ny = y0.size
    y = y0.copy()
    k1 = np.empty(ny)
    k2 = np.empty(ny)
    k3 = np.empty(ny)
    k4 = np.empty(ny)
    tmp = np.empty(ny)
    buf = np.empty(n)
    t0 = -idx0 * dt
    out[0, :] = y
    rec = 1
    hist = kind == 1 or kind == 2
    for step in range(nsteps):
        t = step * dt
        cur = idx0 + step
        if hist:
            for i in range(n):
                eh[cur, i] = y[i]
                deh[cur, i] = d_left[i] if step == 0 else deh[cur - 1, i]
        _rhs(kind, t, y, k1, n, lmat, w_e, w_ie, p, a, tau1, tau2, m, gamma, tau, sigma,
             qx, qw, eh, deh, t0, dt, cur, d_left, idx0, buf)
        if hist:
            for i in range(n):
                deh[cur, i] = k1[i]
            if kind == 2 and tau - sigma < dt:
                # the uniform window can reach the newest piece, whose end slope is k1 itself
                _rhs(kind, t, y, k1, n, lmat, w_e, w_ie, p, a, tau1, tau2, m, gamma, tau, sigma,
                     qx, qw, eh, deh, t0, dt, cur, d_left, idx0, buf)
                for i in range(n):
                    deh[cur, i] = k1[i]
        for r in range(ny):
            tmp[r] = y[r] + 0.5 * dt * k1[r]
        _rhs(kind, t + 0.5 * dt, tmp, k2, n, lmat, w_e, w_ie, p, a, tau1, tau2, m, gamma, tau, sigma,
             qx, qw, eh, deh, t0, dt, cur, d_left, idx0, buf)
        for r in range(ny):
            tmp[r] = y[r] + 0.5 * dt * k2[r]
        _rhs(kind, t + 0.5 * dt, tmp, k3, n, lmat, w_e, w_ie, p, a, tau1, tau2, m, gamma, tau, sigma,
             qx, qw, eh, deh, t0, dt, cur, d_left, idx0, buf)
        for r in range(ny):
            tmp[r] = y[r] + dt * k3[r]
        _rhs(kind, t + dt, tmp, k4, n, lmat, w_e, w_ie, p, a, tau1, tau2, m, gamma, tau, sigma,
             qx, qw, eh, deh, t0, dt, cur, d_left, idx0, buf)
        ok = True
        for r in range(ny):
            y[r] += dt / 6.0 * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r])
            if not math.isfinite(y[r]):
                ok = False
        if not ok:
            return -(step + 1)
        if (step + 1) % record_every == 0:
            out[rec, :] = y
            rec += 1
    return rec


# ---------------------------------------------------------------------------
# state containers


@dataclass
class NetworkState:
    e: np.ndarray
    i: np.ndarray
    w_ei: np.ndarray
    chain: np.ndarray | None = None  # (m, N)


@dataclass
class History:
    """Initial data: values at t=0 plus an optional past for E on ``t < 0``.

    Without ``past`` the excitatory history is constant ``e``.  ``past`` maps
    a scalar time ``t <= 0`` to an array of N values and must agree with ``e``
    at 0.
    """

    e: np.ndarray
    i: np.ndarray
    w_ei: np.ndarray
    past: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        self.e = np.asarray(self.e, dtype=float).copy()
        self.i = np.asarray(self.i, dtype=float).copy()
        self.w_ei = np.asarray(self.w_ei, dtype=float).copy()
        if not (self.e.shape == self.i.shape == self.w_ei.shape) or self.e.ndim != 1:
            raise ValueError("history vectors must be 1-d with equal length")

    @property
    def n(self) -> int:
        return self.e.size

    def e_at(self, t: float) -> np.ndarray:
        if self.past is None or t >= 0.0:
            return self.e
        return np.asarray(self.past(t), dtype=float)


def constant_history(e, i, w_ei, n: int | None = None) -> History:
    if n is not None:
        e, i, w_ei = (np.full(n, float(v)) if np.ndim(v) == 0 else v for v in (e, i, w_ei))
    return History(e, i, w_ei)


def equilibrium_history(params: ModelParams, n: int) -> History:
    eq = equilibrium(params)
    return constant_history(eq.e_star, eq.i_star, eq.w_ei_star, n)


def perturbed_equilibrium_history(params: ModelParams, n: int, amplitude: float = 0.01,
                                  seed: int | np.random.Generator = 0) -> History:
    """Equilibrium plus independent ``U(-amplitude, amplitude)`` noise on every variable."""
    rng = np.random.default_rng(seed)
    eq = equilibrium(params)
    jitter = rng.uniform(-amplitude, amplitude, size=(3, n))
    return History(eq.e_star + jitter[0], eq.i_star + jitter[1], eq.w_ei_star + jitter[2])


@dataclass
class Trajectory:
    times: np.ndarray
    e: np.ndarray        # (T, N)
    i: np.ndarray
    w_ei: np.ndarray
    dt: float
    history_span: float
    chain: np.ndarray | None = None  # (T, m, N)

    @property
    def n(self) -> int:
        return self.e.shape[1]

    def __len__(self) -> int:
        return self.times.size

    def state(self, k: int) -> NetworkState:
        return NetworkState(self.e[k], self.i[k], self.w_ei[k],
                            None if self.chain is None else self.chain[k])

    def final_state(self) -> NetworkState:
        return self.state(-1)

    def to_csv(self, path, header: str | None = None) -> None:
        n = self.n
        cols = (["t"] + [f"E_{k + 1}" for k in range(n)] + [f"I_{k + 1}" for k in range(n)]
                + [f"WEI_{k + 1}" for k in range(n)])
        data = np.column_stack([self.times, self.e, self.i, self.w_ei])
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if header:
                fh.write(header.rstrip("\n") + "\n")
            fh.write(",".join(cols) + "\n")
            for row in data:
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")


# ---------------------------------------------------------------------------
# integration


def history_span(kernel: DelayKernel) -> float:
    if isinstance(kernel, DiracShifted):
        return kernel.tau_m
    if isinstance(kernel, Uniform):
        return kernel.tau_m + kernel.sigma
    return 0.0


def _erlang_moment(history: History, order: int, gamma: float) -> np.ndarray:
    """``int_0^inf E(-s) g_order(s) ds`` for a non-constant past."""
    dens = Gamma(order, gamma).density
    val, _ = quad_vec(lambda s: history.e_at(-s) * dens(s), 0.0, math.inf, epsabs=1e-13)
    return val


def integrate(params: ModelParams, kernel: DelayKernel, conn: Connectivity, history: History,
              t_end: float, dt: float = DEFAULT_DT, record_every: int = 1,
              quad_nodes: int = DEFAULT_QUAD_NODES) -> Trajectory:
    """RK4 integration on ``[0, t_end]`` with fixed step ``dt``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n = conn.n
    if history.n != n:
        raise ValueError(f"history has {history.n} nodes, connectivity has {n}")
    span = history_span(kernel)
    if not t_end > span:
        raise ValueError(f"t_end={t_end} must exceed the history span {span}")
    if isinstance(kernel, (DiracShifted, Uniform)) and dt > kernel.tau_m / 4.0 * (1 + 1e-12):
        raise StepSizeError(f"dt={dt} exceeds tau_m/4={kernel.tau_m / 4.0} for a delayed kernel")
    if quad_nodes < 3:
        raise ValueError("quad_nodes must be at least 3")
    nsteps = int(round(t_end / dt))
    record_every = max(1, int(record_every))

    m, gamma, tau, sigma = 1, 0.0, 0.0, 0.0
    qx = np.zeros(1)
    qw = np.ones(1)
    if isinstance(kernel, NoDelay):
        kind = _KIND_NONE
    elif isinstance(kernel, DiracShifted):
        kind, tau = _KIND_DIRAC, kernel.tau_m
    elif isinstance(kernel, Uniform):
        kind, tau, sigma = _KIND_UNIFORM, kernel.tau_m, kernel.sigma
        qx = np.linspace(-1.0, 1.0, quad_nodes)
        qw = np.full(quad_nodes, 1.0 / (quad_nodes - 1))
        qw[[0, -1]] *= 0.5
    elif isinstance(kernel, Gamma):
        kind, m, gamma = _KIND_GAMMA, int(kernel.m), kernel.gamma
    else:
        raise TypeError(f"unsupported kernel {kernel!r}")

    y0 = [history.e, history.i, history.w_ei]
    if kind == _KIND_GAMMA:
        for j in range(1, m + 1):
            y0.append(history.e.copy() if history.past is None else _erlang_moment(history, j, gamma))
    y0 = np.concatenate(y0)

    if kind in (_KIND_DIRAC, _KIND_UNIFORM):
        idx0 = int(math.ceil(span / dt)) + 2
        eh = np.empty((idx0 + nsteps + 1, n))
        deh = np.zeros_like(eh)
        past_t = (np.arange(idx0) - idx0) * dt
        for k, t in enumerate(past_t):
            eh[k] = history.e_at(t)
        if history.past is not None:
            h = 1e-6
            for k, t in enumerate(past_t):
                deh[k] = (history.e_at(t + h if t + h <= 0 else t) - history.e_at(t - h)) / (
                    2 * h if t + h <= 0 else h)
            d_left = (history.e_at(0.0) - history.e_at(-h)) / h
        else:
            d_left = np.zeros(n)
    else:
        idx0 = 1
        eh = np.zeros((2, n))
        deh = np.zeros((2, n))
        d_left = np.zeros(n)

    out = np.empty((nsteps // record_every + 1, y0.size))
    rec = _run(kind, n, np.ascontiguousarray(conn.matrix, dtype=float), params.w_e, params.w_ie,
               params.p, params.a, params.tau1, params.tau2, m, gamma, tau, sigma, qx, qw,
               y0, eh, deh, np.asarray(d_left, dtype=float), idx0, nsteps, dt, record_every, out)
    if rec < 0:
        raise SimulationError(f"non-finite state at step {-rec} (t={-rec * dt:.6g})")
    out = out[:rec]
    times = np.arange(rec) * dt * record_every
    chain = None
    if kind == _KIND_GAMMA:
        chain = out[:, 3 * n:].reshape(rec, m, n)
    return Trajectory(times, out[:, :n], out[:, n:2 * n], out[:, 2 * n:3 * n], dt, span, chain)


# ---------------------------------------------------------------------------
# linearization of the chain-augmented system


def chain_jacobian(params: ModelParams, kernel: Gamma | NoDelay, rk: complex) -> np.ndarray:
    """Jacobian of one connectivity mode of the chain-augmented system at equilibrium.

    Variables ``(e, i, w, u_1..u_m)``; its eigenvalues are the roots of the
    cleared characteristic factor for ``rk``.
    """
    c = lin_coeffs(params)
    m = kernel.m if isinstance(kernel, Gamma) else 0
    size = 3 + m
    jac = np.zeros((size, size), dtype=complex)
    t1, t2 = params.tau1, params.tau2
    coupling = params.w_e * rk * c.k1 / t1
    jac[0, 0] = -1.0 / t1
    jac[0, 1] = -c.w_ei_star * c.k1 / t1
    jac[0, 2] = -c.i_star * c.k1 / t1
    if m == 0:
        jac[0, 0] += coupling
    else:
        jac[0, 3 + m - 1] = coupling
    jac[1, 0] = c.k2
    jac[1, 1] = -1.0
    jac[2, 0] = c.i_star / t2
    for j in range(m):
        jac[3 + j, 3 + j] = -kernel.gamma
        jac[3 + j, 0 if j == 0 else 3 + j - 1] = kernel.gamma
    return jac


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class SyncVerdict:
    a: float
    synchronized: bool
    t_hat: float
    pattern: str
    period: float = math.nan


def _node_peaks(x: np.ndarray, prominence: float):
    idx, _ = find_peaks(x, prominence=prominence)
    return idx


def classify_sync(traj: Trajectory, settle_time: float = DEFAULT_SETTLE,
                  threshold: float = SYNC_THRESHOLD, min_window: float = 10.0) -> SyncVerdict:
    """Single-time-slice synchrony measure with a supplementary pattern label.

    ``a = max_k |E_1(t_hat) - E_k(t_hat)|`` where ``t_hat`` maximizes ``E_1``
    after ``settle_time``.
    """
    mask = traj.times >= settle_time - 1e-9
    if traj.times[-1] - settle_time < min_window or mask.sum() < 3:
        raise ValueError(f"trajectory ends at {traj.times[-1]:.6g}, needs at least "
                         f"{min_window} time units after settle time {settle_time}")
    t = traj.times[mask]
    e = traj.e[mask]
    k_hat = int(np.argmax(e[:, 0]))
    a = float(np.max(np.abs(e[k_hat, 0] - e[k_hat, :])))
    synchronized = a < threshold
    pattern, period = _pattern(t, e, synchronized)
    return SyncVerdict(a, synchronized, float(t[k_hat]), pattern, period)


def _pattern(t: np.ndarray, e: np.ndarray, synchronized: bool) -> tuple[str, float]:
    swing = float(np.max(e.max(axis=0) - e.min(axis=0)))
    if swing < 1e-6:
        return "equilibrium", math.nan
    x = e[:, 0]
    peaks = _node_peaks(x, 0.1 * swing)
    period = float(np.mean(np.diff(t[peaks]))) if peaks.size >= 2 else math.nan
    if synchronized:
        return "synchronousPeriodic", period
    if peaks.size < 3:
        return "unclassified", period
    troughs = _node_peaks(-x, 0.1 * swing)
    heights = x[peaks]
    amp = float(np.mean(heights) - (np.mean(x[troughs]) if troughs.size else x.min()))
    if heights.max() - heights.min() > 0.05 * amp:
        return "torusLike", period
    n = e.shape[1]
    lags = []
    for k in range(n):
        nxt = (k + 1) % n
        pk = _node_peaks(e[:, k], 0.1 * swing)
        pn = _node_peaks(e[:, nxt], 0.1 * swing)
        if pk.size == 0 or pn.size == 0:
            return "unclassified", period
        t0 = t[pk[0]]
        later = t[pn][t[pn] >= t0]
        if later.size == 0:
            return "unclassified", period
        lags.append((later[0] - t0) % period)
    step = period / n
    tol = 0.1 * step
    lags = np.asarray(lags)
    if np.all(np.abs(lags - step) < tol) or np.all(np.abs(lags - (period - step)) < tol):
        return "splayLike", period
    return "unclassified", period


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SimConfig:
    dt: float = DEFAULT_DT
    settle_time: float = DEFAULT_SETTLE
    window: float = DEFAULT_WINDOW
    perturbation: float = 0.01
    threshold: float = SYNC_THRESHOLD
    quad_nodes: int = DEFAULT_QUAD_NODES
    record_every: int = 1


@dataclass
class SweepConfig:
    n_points: int = 100
    w_ie_range: tuple[float, float] = (0.0, 6.0)
    w_e_range: tuple[float, float] = (0.0, 4.0)
    seed: int = 0
    unstable_only: bool = True
    max_draws: int = 100_000
    workers: int = 1
    sim: SimConfig = field(default_factory=SimConfig)


@dataclass
class SweepRow:
    w_ie: float
    w_e: float
    stable: bool
    max_re: float
    seed: int
    verdict: SyncVerdict | None = None
    error: str | None = None

    def csv_fields(self) -> list[str]:
        if self.verdict is not None:
            a = f"{self.verdict.a:.12g}"
            sync = str(self.verdict.synchronized).lower()
            pattern = self.verdict.pattern
        else:
            a, sync, pattern = "", "", ("error" if self.error else "")
        return [f"{self.w_ie:.12g}", f"{self.w_e:.12g}", str(self.stable).lower(),
                f"{self.max_re:.12g}", a, sync, pattern, str(self.seed)]


SWEEP_COLUMNS = "w_ie,w_e,stable,max_re,a,synchronized,pattern,seed"


def point_seed(master: int, index: int) -> int:
    """Sub-seed for sweep point ``index``, independent of evaluation order."""
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1)[0])


def simulate_point(params: ModelParams, kernel: DelayKernel, conn: Connectivity,
                   seed: int, sim: SimConfig = SimConfig()) -> SyncVerdict:
    hist = perturbed_equilibrium_history(params, conn.n, sim.perturbation, seed)
    traj = integrate(params, kernel, conn, hist, sim.settle_time + sim.window, sim.dt,
                     sim.record_every, sim.quad_nodes)
    return classify_sync(traj, sim.settle_time, sim.threshold)


def _simulate_job(args):
    params, kernel, conn, seed, sim = args
    try:
        return simulate_point(params, kernel, conn, seed, sim), None
    except (SimulationError, ValueError, FloatingPointError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def sweep(params: ModelParams, kernel: DelayKernel, conn: Connectivity,
          config: SweepConfig = SweepConfig(), progress: Callable[[int, int], None] | None = None
          ) -> list[SweepRow]:
    """Random points in a rectangle; unstable ones are simulated and classified.

    With ``unstable_only`` the sampler rejects stable draws until ``n_points``
    unstable points are collected (or ``max_draws`` is hit).
    """
    from .spectral import stability_test

    rng = np.random.default_rng(config.seed)
    rows: list[SweepRow] = []
    draws = 0
    while len(rows) < config.n_points and draws < config.max_draws:
        w_ie = float(rng.uniform(*config.w_ie_range))
        w_e = float(rng.uniform(*config.w_e_range))
        draws += 1
        point = params.with_weights(w_ie=w_ie, w_e=w_e)
        try:
            st = stability_test(point, kernel, conn)
        except (ValueError, RuntimeError) as exc:
            rows.append(SweepRow(w_ie, w_e, False, math.nan, point_seed(config.seed, len(rows)),
                                 error=f"{type(exc).__name__}: {exc}"))
            continue
        if config.unstable_only and st.stable:
            continue
        rows.append(SweepRow(w_ie, w_e, st.stable, st.max_real_part, point_seed(config.seed, len(rows))))

    jobs = [(i, (params.with_weights(w_ie=r.w_ie, w_e=r.w_e), kernel, conn, r.seed, config.sim))
            for i, r in enumerate(rows) if not r.stable and r.error is None]
    done = 0
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = pool.map(_simulate_job, [j for _, j in jobs])
            for (i, _), (verdict, err) in zip(jobs, results):
                rows[i].verdict, rows[i].error = verdict, err
                done += 1
                if progress:
                    progress(done, len(jobs))
    else:
        for i, job in jobs:
            rows[i].verdict, rows[i].error = _simulate_job(job)
            done += 1
            if progress:
                progress(done, len(jobs))
    return rows


def write_sweep_csv(rows: list[SweepRow], path, header: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header:
            fh.write(header.rstrip("\n") + "\n")
        fh.write(SWEEP_COLUMNS + "\n")
        for r in rows:
            fh.write(",".join(r.csv_fields()) + "\n")


def default_workers() -> int:
    env = os.environ.get("WCNET_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1
