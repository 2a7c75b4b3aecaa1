"""Polynomial nonlinear state-space models.

The model is a linear state-space core extended with polynomial terms:

    x(k+1) = A x(k) + B u(k) + E zeta(x(k), u(k))
    y(k)   = C x(k) + D u(k) + F eta(x(k), u(k))

zeta and eta are monomial vectors in the states and inputs. Individual
monomial columns of E and F can be switched off; inactive columns are
stored as exact zeros and never touched by parameter updates.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .basis import (
    MonomialBasis,
    basis_state_jacobian_many,
    build_basis,
    evaluate_basis_many,
    select_active,
)
from .exceptions import ConfigurationError, NumericalError
from .linear import LinearStateSpace

#: simulation stops and flags divergence once any |x_i| exceeds this
DIVERGENCE_LIMIT = 1e10


@dataclass(frozen=True)
class PnlssModel:
    """Linear state-space core plus active polynomial terms."""

    linear: LinearStateSpace
    E: np.ndarray
    F: np.ndarray
    basis_state: MonomialBasis
    basis_output: MonomialBasis
    active_state: np.ndarray
    active_output: np.ndarray
    x0: np.ndarray = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        lin = self.linear
        E = np.asarray(self.E, dtype=float)
        F = np.asarray(self.F, dtype=float)
        a_s = np.asarray(self.active_state, dtype=bool)
        a_o = np.asarray(self.active_output, dtype=bool)
        if self.basis_state.n_states != lin.n or self.basis_state.n_inputs != lin.m:
            raise ConfigurationError("state basis does not match model dimensions")
        if self.basis_output.n_states != lin.n or self.basis_output.n_inputs != lin.m:
            raise ConfigurationError("output basis does not match model dimensions")
        if E.shape != (lin.n, len(self.basis_state)):
            raise ConfigurationError(
                f"E must be {(lin.n, len(self.basis_state))}, got {E.shape}"
            )
        if F.shape != (lin.p, len(self.basis_output)):
            raise ConfigurationError(
                f"F must be {(lin.p, len(self.basis_output))}, got {F.shape}"
            )
        if a_s.shape != (len(self.basis_state),):
            raise ConfigurationError("active_state mask length must equal basis size")
        if a_o.shape != (len(self.basis_output),):
            raise ConfigurationError("active_output mask length must equal basis size")
        if E[:, ~a_s].size and np.any(E[:, ~a_s] != 0.0):
            raise ConfigurationError("inactive state-term columns of E must be zero")
        if F[:, ~a_o].size and np.any(F[:, ~a_o] != 0.0):
            raise ConfigurationError("inactive output-term columns of F must be zero")
        x0 = self.x0
        if x0 is None:
            x0 = np.zeros(lin.n)
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if x0.shape != (lin.n,):
            raise ConfigurationError(f"x0 must have length {lin.n}")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "active_state", a_s)
        object.__setattr__(self, "active_output", a_o)
        object.__setattr__(self, "x0", x0)

    @property
    def n(self):
        return self.linear.n

    @property
    def m(self):
        return self.linear.m

    @property
    def p(self):
        return self.linear.p

    @property
    def fs(self):
        return self.linear.fs

    @property
    def n_active_state(self):
        return int(self.active_state.sum())

    @property
    def n_active_output(self):
        return int(self.active_output.sum())

    @property
    def n_parameters(self):
        n, m, p = self.n, self.m, self.p
        return n * n + n * m + p * n + p * m + n * self.n_active_state + p * self.n_active_output

    def parameter_vector(self):
        """All free parameters: A, B, C, D row-major, then active E, F columns."""
        lin = self.linear
        return np.concatenate(
            [
                lin.A.ravel(),
                lin.B.ravel(),
                lin.C.ravel(),
                lin.D.ravel(),
                self.E[:, self.active_state].ravel(),
                self.F[:, self.active_output].ravel(),
            ]
        )

    def with_parameters(self, theta):
        """Model with the same structure and the given parameter vector."""
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape != (self.n_parameters,):
            raise ConfigurationError(
                f"expected {self.n_parameters} parameters, got {theta.shape[0]}"
            )
        n, m, p = self.n, self.m, self.p
        kE, kF = self.n_active_state, self.n_active_output
        pos = 0

        def take(rows, cols):
            nonlocal pos
            block = theta[pos : pos + rows * cols].reshape(rows, cols)
            pos += rows * cols
            return block

        A, B, C, D = take(n, n), take(n, m), take(p, n), take(p, m)
        E = np.zeros_like(self.E)
        E[:, self.active_state] = take(n, kE)
        F = np.zeros_like(self.F)
        F[:, self.active_output] = take(p, kF)
        lin = LinearStateSpace(A=A, B=B, C=C, D=D, fs=self.fs, meta=dict(self.linear.meta))
        return replace(self, linear=lin, E=E, F=F)


def init_from_linear(lin, state_degrees, output_degrees, state_rule="full",
                     output_rule="full"):
    """Wrap a linear model as a polynomial model with all-zero E and F.

    The simulated response is identical to the linear model until the
    optimizer moves the active nonlinear coefficients away from zero.
    """
    basis_state = build_basis(lin.n, lin.m, state_degrees)
    basis_output = build_basis(lin.n, lin.m, output_degrees)
    return PnlssModel(
        linear=lin,
        E=np.zeros((lin.n, len(basis_state))),
        F=np.zeros((lin.p, len(basis_output))),
        basis_state=basis_state,
        basis_output=basis_output,
        active_state=select_active(basis_state, state_rule),
        active_output=select_active(basis_output, output_rule),
    )


@dataclass(frozen=True)
class SimulationResult:
    """Simulated trajectory; y and x carry NaN past a divergence point."""

    y: np.ndarray
    x: np.ndarray
    diverged: bool = False
    divergence_index: int = None


def simulate(model, u, x0=None):
    """Run the state recursion over an input sequence.

    Returns a :class:`SimulationResult` with y (T, p) and x (T, n), where
    x[k] is the state entering step k. If a state component leaves
    [-DIVERGENCE_LIMIT, DIVERGENCE_LIMIT] the recursion stops, the result
    is flagged, and the remaining samples are NaN; no exception is raised
    so optimizers can treat the trial as a failed step.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.ndim != 2 or u.shape[1] != model.m:
        raise ConfigurationError(f"u must be (T, {model.m})")
    T = u.shape[0]
    n, p = model.n, model.p
    A, B = model.linear.A, model.linear.B
    C, D = model.linear.C, model.linear.D
    if x0 is None:
        x0 = model.x0
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (n,):
        raise ConfigurationError(f"x0 must have length {n}")

    act = model.active_state
    E_act = model.E[:, act]
    exp_state = model.basis_state.exponents[act] if act.any() else None

    x = np.full((T, n), np.nan)
    xk = x0.copy()
    diverged = False
    div_index = None
    for k in range(T):
        if not np.all(np.abs(xk) <= DIVERGENCE_LIMIT):
            diverged = True
            div_index = k
            break
        x[k] = xk
        xk = A @ xk + B @ u[k]
        if exp_state is not None:
            v = np.concatenate([x[k], u[k]])
            zeta = np.prod(v[None, :] ** exp_state, axis=1)
            xk = xk + E_act @ zeta

    valid = T if not diverged else div_index
    y = np.full((T, p), np.nan)
    if valid:
        xv, uv = x[:valid], u[:valid]
        y[:valid] = xv @ C.T + uv @ D.T
        if model.active_output.any():
            eta = evaluate_basis_many(
                model.basis_output, xv, uv,
                exponents=model.basis_output.exponents[model.active_output],
            )
            y[:valid] += eta @ model.F[:, model.active_output].T
    return SimulationResult(y=y, x=x, diverged=diverged, divergence_index=div_index)


def jacobian(model, u, x0=None):
    """Sensitivity of every output sample to every free parameter.

    Returns (T, p, n_parameters) ordered as the parameter vector:
    A, B, C, D row-major, then active columns of E and F. State
    sensitivities follow the recursion S(k+1) = (A + E dzeta/dx) S(k)
    plus the explicit derivative of the state update; output rows add
    the explicit derivative of the output map.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    sim = simulate(model, u, x0=x0)
    if sim.diverged:
        raise NumericalError(
            f"cannot differentiate a divergent trajectory (sample {sim.divergence_index})"
        )
    x = sim.x
    T = u.shape[0]
    n, m, p = model.n, model.m, model.p
    A, C = model.linear.A, model.linear.C
    kE, kF = model.n_active_state, model.n_active_output

    exp_s = model.basis_state.exponents[model.active_state]
    exp_o = model.basis_output.exponents[model.active_output]
    E_act = model.E[:, model.active_state]
    F_act = model.F[:, model.active_output]

    if kE:
        zeta = evaluate_basis_many(model.basis_state, x, u, exponents=exp_s)
        dzeta = basis_state_jacobian_many(model.basis_state, x, u, exponents=exp_s)
        A_eff = A[None] + np.einsum("ij,tjk->tik", E_act, dzeta)
    else:
        zeta = np.zeros((T, 0))
        A_eff = np.broadcast_to(A, (T, n, n))
    if kF:
        eta = evaluate_basis_many(model.basis_output, x, u, exponents=exp_o)
        deta = basis_state_jacobian_many(model.basis_output, x, u, exponents=exp_o)
        C_eff = C[None] + np.einsum("ij,tjk->tik", F_act, deta)
    else:
        eta = np.zeros((T, 0))
        C_eff = np.broadcast_to(C, (T, p, n))

    # one state-parameter block per state row: [A_i | B_i | E_i,active]
    K0 = n + m + kE
    xtilde = np.concatenate([x, u, zeta], axis=1)
    S = np.zeros((T, n, n * K0))
    for k in range(T - 1):
        nxt = A_eff[k] @ S[k]
        for i in range(n):
            nxt[i, i * K0 : i * K0 + K0] += xtilde[k]
        S[k + 1] = nxt

    J_state = np.einsum("tpn,tns->tps", C_eff, S)

    K0y = n + m + kF
    ytilde = np.concatenate([x, u, eta], axis=1)
    J_out = np.zeros((T, p, p * K0y))
    for i in range(p):
        J_out[:, i, i * K0y : i * K0y + K0y] = ytilde

    # scatter the block-local columns into parameter-vector order
    nA, nB, nC, nD = n * n, n * m, p * n, p * m
    offE = nA + nB + nC + nD
    offF = offE + n * kE
    idx_state = np.empty(n * K0, dtype=int)
    for i in range(n):
        idx_state[i * K0 : i * K0 + n] = np.arange(i * n, i * n + n)
        idx_state[i * K0 + n : i * K0 + n + m] = nA + np.arange(i * m, i * m + m)
        idx_state[i * K0 + n + m : (i + 1) * K0] = offE + np.arange(i * kE, i * kE + kE)
    idx_out = np.empty(p * K0y, dtype=int)
    for i in range(p):
        idx_out[i * K0y : i * K0y + n] = nA + nB + np.arange(i * n, i * n + n)
        idx_out[i * K0y + n : i * K0y + n + m] = nA + nB + nC + np.arange(i * m, i * m + m)
        idx_out[i * K0y + n + m : (i + 1) * K0y] = offF + np.arange(i * kF, i * kF + kF)

    J = np.zeros((T, p, model.n_parameters))
    J[:, :, idx_state] = J_state
    J[:, :, idx_out] += J_out
    return J
