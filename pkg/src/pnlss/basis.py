"""Multivariate monomial bases over stacked state and input variables."""

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError
from .validation import check_index_array, check_nonnegative_int


@dataclass(frozen=True)
class MonomialBasis:
    """Monomial basis in the stacked variable vector ``[x_1..x_n, u_1..u_m]``.

    ``exponents[i, j]`` is the power of variable ``j`` in monomial ``i``.
    Monomials are ordered by ascending total degree and, within one degree,
    by descending lexicographic exponent order, so that for ``n=2, m=1`` and
    degree 2 the order is ``x1^2, x1*x2, x1*u, x2^2, x2*u, u^2``. Degree 0
    contributes the constant monomial.
    """

    n_states: int
    n_inputs: int
    degrees: tuple
    exponents: np.ndarray

    def __len__(self):
        return self.exponents.shape[0]

    @property
    def n_vars(self):
        return self.n_states + self.n_inputs


def build_basis(n_states, n_inputs, degrees):
    """Enumerate all monomials with total degree in ``degrees``.

    Parameters
    ----------
    n_states, n_inputs : int
        Number of state and input variables (states come first).
    degrees : iterable of int
        Allowed total powers, each >= 0. Duplicates are removed and the
        degree blocks are emitted in ascending order.
    """
    n_states = check_nonnegative_int(n_states, "n_states")
    n_inputs = check_nonnegative_int(n_inputs, "n_inputs")
    degs = sorted({check_nonnegative_int(d, "degree") for d in degrees})
    if not degs:
        raise ConfigurationError("degrees must be non-empty")
    if 1 in degs:
        warnings.warn(
            "degree-1 monomials duplicate the linear state/input terms",
            stacklevel=2,
        )
    n_vars = n_states + n_inputs
    if n_vars == 0:
        raise ConfigurationError("basis needs at least one variable")

    rows = []
    for d in degs:
        # combinations_with_replacement of variable indices yields exactly
        # the graded order with x1 > ... > xn > u1 > ... > um
        for combo in itertools.combinations_with_replacement(range(n_vars), d):
            expo = np.zeros(n_vars, dtype=np.int64)
            for idx in combo:
                expo[idx] += 1
            rows.append(expo)
    exponents = np.array(rows, dtype=np.int64).reshape(len(rows), n_vars)
    return MonomialBasis(n_states, n_inputs, tuple(degs), exponents)


def select_active(basis, rule):
    """Boolean mask of the basis columns enabled by ``rule``.

    ``rule`` is one of ``"full"``, ``"statesonly"``, ``"inputsonly"``,
    ``"none"``, or an explicit sequence of monomial indices. ``statesonly``
    keeps monomials whose input exponents are all zero (the constant
    monomial qualifies), ``inputsonly`` the mirror image.
    """
    n_terms = len(basis)
    if isinstance(rule, str):
        key = rule.lower()
        if key == "full":
            return np.ones(n_terms, dtype=bool)
        if key == "statesonly":
            return ~np.any(basis.exponents[:, basis.n_states:] > 0, axis=1)
        if key == "inputsonly":
            return ~np.any(basis.exponents[:, : basis.n_states] > 0, axis=1)
        if key == "none":
            return np.zeros(n_terms, dtype=bool)
        raise ConfigurationError(f"unknown activation rule {rule!r}")
    idx = check_index_array(rule, "explicit active indices", upper=n_terms)
    mask = np.zeros(n_terms, dtype=bool)
    mask[idx] = True
    return mask


def evaluate_basis(basis, x, u):
    """Evaluate every monomial at one point, with 0**0 == 1."""
    v = np.concatenate(
        [np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(u, dtype=float))]
    )
    if v.size != basis.n_vars:
        raise ConfigurationError(
            f"expected {basis.n_vars} variables, got {v.size}"
        )
    return np.prod(v[None, :] ** basis.exponents, axis=1)


def evaluate_basis_many(basis, x, u, exponents=None):
    """Evaluate the basis on a whole trajectory.

    ``x`` is (T, n_states), ``u`` is (T, n_inputs); returns (T, n_terms).
    ``exponents`` may restrict evaluation to a row subset of the exponent
    matrix (used to skip inactive columns).
    """
    expo = basis.exponents if exponents is None else exponents
    v = np.hstack([x, u]).astype(float)
    return np.prod(v[:, None, :] ** expo[None, :, :], axis=2)


def basis_state_jacobian_many(basis, x, u, exponents=None):
    """Partial derivatives of each monomial w.r.t. each state variable.

    Returns (T, n_terms, n_states). Exponents are clipped at zero before
    exponentiation so variables at 0 never produce 0**-1.
    """
    expo = basis.exponents if exponents is None else exponents
    v = np.hstack([x, u]).astype(float)
    t_len, n_terms = v.shape[0], expo.shape[0]
    out = np.empty((t_len, n_terms, basis.n_states))
    for j in range(basis.n_states):
        coef = expo[:, j].astype(float)
        expo_dj = expo.copy()
        expo_dj[:, j] = np.maximum(expo_dj[:, j] - 1, 0)
        out[:, :, j] = coef[None, :] * np.prod(
            v[:, None, :] ** expo_dj[None, :, :], axis=2
        )
    return out
