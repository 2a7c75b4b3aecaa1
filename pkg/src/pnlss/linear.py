"""Discrete-time linear state-space models and their frequency responses."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, NumericalError
from .validation import check_matrix, check_positive


@dataclass(frozen=True)
class LinearStateSpace:
    """Discrete-time model x(k+1) = A x(k) + B u(k), y(k) = C x(k) + D u(k).

    ``meta`` carries estimation by-products (singular values, fit cost,
    warnings) and never participates in equality or serialization identity.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    fs: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A = check_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape[1] != n or n < 1:
            raise ConfigurationError(f"A must be square and non-empty, got {A.shape}")
        B = check_matrix(self.B, "B")
        if B.shape[0] != n:
            raise ConfigurationError("B row count must match the state dimension")
        C = check_matrix(self.C, "C")
        if C.shape[1] != n:
            raise ConfigurationError("C column count must match the state dimension")
        D = check_matrix(self.D, "D", shape=(C.shape[0], B.shape[1]))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "fs", check_positive(self.fs, "fs"))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    @property
    def stable(self):
        return self.spectral_radius < 1.0


def frf_of_model(model, lines, n_samples):
    """Transfer function D + C (z I - A)^-1 B at z = exp(2j*pi*line/N).

    Returns a complex (n_lines, p, m) array. Raises
    :class:`NumericalError` when an eigenvalue of A sits on an evaluated
    unit-circle point.
    """
    lines = np.asarray(lines)
    z = np.exp(2j * np.pi * lines / float(n_samples))
    n = model.n
    frf = np.empty((lines.size, model.p, model.m), dtype=complex)
    eye = np.eye(n)
    for i, zi in enumerate(z):
        try:
            x = np.linalg.solve(zi * eye - model.A, model.B)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"z I - A is singular at line {lines[i]}"
            ) from exc
        frf[i] = model.C @ x + model.D
    return frf


def simulate_linear(model, u, x0=None):
    """Filter ``u`` (T, m) through the state-space model.

    Returns ``(y, x)`` with shapes (T, p) and (T, n); ``x[k]`` is the state
    entering step k, so ``x[0] = x0``.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[1] != model.m:
        raise ConfigurationError(
            f"input has {u.shape[1]} channels, model expects {model.m}"
        )
    t_len = u.shape[0]
    n = model.n
    x = np.zeros((t_len, n))
    y = np.empty((t_len, model.p))
    state = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n)
    A, B, C, D = model.A, model.B, model.C, model.D
    for k in range(t_len):
        x[k] = state
        y[k] = C @ state + D @ u[k]
        state = A @ state + B @ u[k]
    return y, x
