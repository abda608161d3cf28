"""Linearized flows along a stored trajectory and the control probe.

The tangent flow propagates perturbations forward with the same
exponential-Euler stepping as the simulator; the adjoint flow integrates the
backward equation in reversed time (continuous-adjoint-then-discretize). A
discrete-transpose stepping mode is also provided: it is the exact transpose
of the forward one-step maps and is what the control-search gradient uses,
so that adjoint gradients match finite differences of the discrete objective
to roundoff rather than to O(dt).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulate import SimConfig, Trajectory, simulate
from .spectral import SpectralField, build_interaction_table


def _window(traj: Trajectory, s: float, t: float):
    i0 = traj.grid_index(s)
    i1 = traj.grid_index(t)
    if i0 > i1:
        raise ValueError("need s <= t")
    return i0, i1


def tangent_flow(traj: Trajectory, s: float, phi: SpectralField,
                 t: float) -> SpectralField:
    """J_{s,t} phi: forward linearization along the stored states."""
    V = tangent_flow_columns(traj, s, phi.coeffs[:, None], t)
    return SpectralField(traj.basis, V[:, 0])


def tangent_flow_columns(traj: Trajectory, s: float, phi_cols: np.ndarray,
                         t: float) -> np.ndarray:
    """Tangent flow applied to every column of phi_cols at once."""
    i0, i1 = _window(traj, s, t)
    table = build_interaction_table(traj.basis)
    lam = traj.basis.laplacian_symbol()
    dt = traj.config.dt
    decay = np.exp(-traj.config.nu * lam * dt)[:, None]
    V = np.array(phi_cols, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    for i in range(i0, i1):
        w = traj.states[i]
        LV = -table.apply_many_second(w, V) - table.apply_many_first(V, w)
        V = decay * (V + dt * LV)
    return V


def adjoint_flow(traj: Trajectory, t: float, phi: SpectralField,
                 s: float, discrete_transpose: bool = False) -> SpectralField:
    U = adjoint_flow_columns(traj, t, phi.coeffs[:, None], s,
                             discrete_transpose=discrete_transpose)
    return SpectralField(traj.basis, U[:, 0])


def adjoint_flow_columns(traj: Trajectory, t: float, phi_cols: np.ndarray,
                         s: float, discrete_transpose: bool = False,
                         record: bool = False):
    """Backward adjoint flow U^{t,phi}(s) applied columnwise.

    Default stepping integrates the backward equation in reversed time
    tau = t - s with the same exponential-Euler template (B(w,U) - C(U,w)
    explicit, viscous factor exact). With discrete_transpose=True each step
    applies the exact transpose of the forward tangent step instead.

    record=True returns the whole history (i1-i0+1, n, m), index 0 at s.
    """
    i0, i1 = _window(traj, s, t)
    table = build_interaction_table(traj.basis)
    lam = traj.basis.laplacian_symbol()
    dt = traj.config.dt
    decay = np.exp(-traj.config.nu * lam * dt)[:, None]
    U = np.array(phi_cols, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    hist = None
    if record:
        hist = np.empty((i1 - i0 + 1, U.shape[0], U.shape[1]))
        hist[i1 - i0] = U
    for i in range(i1 - 1, i0 - 1, -1):
        w = traj.states[i]
        if discrete_transpose:
            # transpose of V -> decay*(V + dt*L_i V) is
            # U -> U + dt * L_i^T (decay*U)
            DU = decay * U
            KU = table.apply_many_second(w, DU) - table.adjoint_apply_many(DU, w)
            U = DU + dt * KU
        else:
            KU = table.apply_many_second(w, U) - table.adjoint_apply_many(U, w)
            U = decay * (U + dt * KU)
        if record:
            hist[i - i0] = U
    return (U, hist) if record else U


def duality_drift(traj: Trajectory, k, s: float, t: float,
                  phi: SpectralField) -> float:
    """Max deviation from the mean of r -> <V_{k,s}(r), U^{t,phi}(r)>.

    The continuum pairing is exactly constant on [s, t]; the discrete drift
    decays at first order in dt.
    """
    from .spectral import TWO_PI_SQ
    i0, i1 = _window(traj, s, t)
    if i0 >= i1:
        raise ValueError("need s < t")
    ek = SpectralField.single_mode(traj.basis, tuple(k))
    # V history forward from s, U history backward from t
    table = build_interaction_table(traj.basis)
    lam = traj.basis.laplacian_symbol()
    dt = traj.config.dt
    decay = np.exp(-traj.config.nu * lam * dt)
    V = ek.coeffs.copy()
    v_hist = np.empty((i1 - i0 + 1, len(V)))
    v_hist[0] = V
    for i in range(i0, i1):
        w = traj.states[i]
        LV = -table.apply(w, V) - table.apply(V, w)
        V = decay * (V + dt * LV)
        v_hist[i + 1 - i0] = V
    _, u_hist = adjoint_flow_columns(traj, t, phi.coeffs[:, None], s, record=True)
    pairing = TWO_PI_SQ * np.einsum("in,in->i", v_hist, u_hist[:, :, 0])
    return float(np.max(np.abs(pairing - pairing.mean())))


def second_variation(traj: Trajectory, s1: float, phi1: SpectralField,
                     s2: float, phi2: SpectralField, t: float) -> SpectralField:
    """Mixed second derivative of the pathwise solution map.

    Solves the tangent-type equation forced by the symmetrized bilinear
    source of the two first-order flows, by variation of constants on the
    grid; zero up to max(s1, s2).
    """
    basis = traj.basis
    table = build_interaction_table(basis)
    lam = basis.laplacian_symbol()
    dt = traj.config.dt
    decay = np.exp(-traj.config.nu * lam * dt)
    j1 = traj.grid_index(s1)
    j2 = traj.grid_index(s2)
    it = traj.grid_index(t)
    start = max(j1, j2)
    if it <= start:
        return SpectralField(basis)
    V1 = SpectralField(basis, phi1.coeffs.copy())
    V2 = SpectralField(basis, phi2.coeffs.copy())
    v1 = V1.coeffs
    v2 = V2.coeffs
    # bring both first variations up to the start of the second-order window
    for i in range(j1, start):
        w = traj.states[i]
        v1 = decay * (v1 + dt * (-table.apply(w, v1) - table.apply(v1, w)))
    for i in range(j2, start):
        w = traj.states[i]
        v2 = decay * (v2 + dt * (-table.apply(w, v2) - table.apply(v2, w)))
    psi = np.zeros(len(basis))
    for i in range(start, it):
        w = traj.states[i]
        source = -(table.apply(v1, v2) + table.apply(v2, v1))
        psi = decay * (psi + dt * (-table.apply(w, psi) - table.apply(psi, w)
                                   + source))
        v1 = decay * (v1 + dt * (-table.apply(w, v1) - table.apply(v1, w)))
        v2 = decay * (v2 + dt * (-table.apply(w, v2) - table.apply(v2, w)))
    return SpectralField(basis, psi)


@dataclass
class ControlResult:
    control: np.ndarray       # (n_steps, n_forced) piecewise-constant rates
    achieved: np.ndarray      # projected endpoint
    residual: float
    iterations: int
    converged: bool
    history: list


def _controlled_endpoint(config: SimConfig, control: np.ndarray,
                         proj_idx: np.ndarray):
    traj = simulate(config, increments=np.zeros_like(control), control=control)
    return traj, traj.states[-1][proj_idx]


def control_gradient(traj: Trajectory, residual_proj: np.ndarray,
                     proj_idx: np.ndarray) -> np.ndarray:
    """Exact gradient of 0.5*|P w(T) - x|^2 wrt the control rates.

    Backpropagates through the discrete forward steps (discrete transpose),
    so the gradient matches central finite differences to roundoff.
    """
    basis = traj.basis
    table = build_interaction_table(basis)
    lam = basis.laplacian_symbol()
    dt = traj.config.dt
    decay = np.exp(-traj.config.nu * lam * dt)
    n_steps = traj.n_steps()
    forced = traj.forced_indices
    lam_T = np.zeros(len(basis))
    lam_T[proj_idx] = residual_proj
    grad = np.zeros((n_steps, len(forced)))
    adj = lam_T
    for i in range(n_steps - 1, -1, -1):
        w = traj.states[i]
        dadj = decay * adj
        grad[i] = dt * dadj[forced]
        # transpose of w -> decay*(w + dt*(N(w) + Q h)): N'(w)^T applied
        adj = dadj + dt * (table.apply_many_second(w, dadj[:, None])[:, 0]
                           - table.adjoint_apply_many(dadj[:, None], w)[:, 0])
    return grad


def control_search(config: SimConfig, projection, target, s: float, t: float,
                   max_iters: int = 200, tol: float = 1e-8,
                   step0: float = 1.0) -> ControlResult:
    """Gradient descent with backtracking on the endpoint-matching objective.

    projection: list of modes spanning the target subspace; target: the
    desired projected coefficient vector at time t. Controls are
    piecewise-constant rates on the forced modes over [s, t]; zero noise.
    """
    basis = config.basis()
    proj_idx = np.array([basis.index[tuple(k)] for k in projection], dtype=np.intp)
    target = np.asarray(target, dtype=float)
    if len(target) != len(proj_idx):
        raise ValueError("target length does not match projection")
    n_steps = config.n_steps()
    n_forced = len(config.forcing.z_star)
    i0 = int(round(s / config.dt))
    control = np.zeros((n_steps, n_forced))

    def objective(ctrl):
        traj, end = _controlled_endpoint(config, ctrl, proj_idx)
        r = end - target
        return 0.5 * float(np.dot(r, r)), traj, end, r

    J, traj, end, r = objective(control)
    history = [J]
    step = step0
    it = 0
    converged = np.sqrt(2 * J) <= tol
    while it < max_iters and not converged:
        grad = control_gradient(traj, r, proj_idx)
        grad[:i0] = 0.0  # control acts on [s, t] only
        gnorm2 = float(np.sum(grad ** 2))
        if gnorm2 == 0.0:
            # flat (typically a saddle at zero control when the targets sit
            # outside the forced set); kick the control deterministically and
            # let the nonlinearity open a descent direction
            if np.any(control[i0:]):
                break
            ramp = np.linspace(0.5, 1.0, n_steps - i0)
            control = control.copy()
            control[i0:] = 0.1 * ramp[:, None]
            J, traj, end, r = objective(control)
            history.append(J)
            it += 1
            continue
        while step > 1e-14:
            trial = control - step * grad
            Jt, traj_t, end_t, r_t = objective(trial)
            if Jt < J:
                control, J, traj, end, r = trial, Jt, traj_t, end_t, r_t
                step *= 1.5
                break
            step *= 0.5
        else:
            break
        history.append(J)
        it += 1
        converged = np.sqrt(2 * J) <= tol
    return ControlResult(control=control, achieved=end,
                         residual=float(np.sqrt(2 * J)), iterations=it,
                         converged=bool(converged), history=history)
