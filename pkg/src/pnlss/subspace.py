"""Frequency-domain subspace identification with weighted LM refinement.

The FRF samples are arranged into block data matrices evaluated at
z_k = exp(2j*pi*line_k/N); after removing the input contribution with an
LQ factorization, the SVD of the remainder spans the observability range,
from which A and C follow by shift invariance and B and D by linear least
squares. A damped Gauss-Newton pass then refines all matrices against the
weighted FRF fit.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, NumericalError
from .linear import LinearStateSpace, frf_of_model
from .optimize import _lm_loop

WEIGHTINGS = ("total", "uniform")

#: covariance eigenvalues are floored at this fraction of the per-line trace
EIG_FLOOR = 1e-14

#: relative gap under which the singular-value spectrum does not pin the order
ORDER_GAP = 1e-12

#: relative cost improvement under which the linear refinement stops
REFINE_REL_TOL = 1e-12


@dataclass(frozen=True)
class SubspaceConfig:
    """Candidate orders and shared settings for the linear pipeline."""

    orders: tuple
    block_rows: int = None
    lm_iterations: int = 100
    weighting: str = "total"

    def __post_init__(self):
        orders = tuple(int(n) for n in np.atleast_1d(self.orders))
        if len(orders) == 0:
            raise ConfigurationError("orders must be non-empty")
        if any(n < 1 for n in orders):
            raise ConfigurationError("every order must be >= 1")
        object.__setattr__(self, "orders", orders)
        r = self.block_rows if self.block_rows is not None else max(orders) + 2
        if not (isinstance(r, (int, np.integer)) and r > max(orders)):
            raise ConfigurationError("block_rows must exceed the largest order")
        object.__setattr__(self, "block_rows", int(r))
        if self.weighting not in WEIGHTINGS:
            raise ConfigurationError(f"weighting must be one of {WEIGHTINGS}")
        if not (isinstance(self.lm_iterations, (int, np.integer)) and self.lm_iterations >= 1):
            raise ConfigurationError("lm_iterations must be an integer >= 1")


def _inverse_sqrt_weights(covGML):
    """Per-line covGML^(-1/2) via eigendecomposition with a floor.

    Eigenvalues are floored at EIG_FLOOR times the line's trace; an
    all-zero covariance (noiseless synthetic data) yields the identity.
    """
    covGML = np.asarray(covGML, dtype=complex)
    L, q, _ = covGML.shape
    W = np.empty((L, q, q), dtype=complex)
    for k in range(L):
        tr = float(np.trace(covGML[k]).real)
        if tr <= 0.0:
            W[k] = np.eye(q)
            continue
        lam, V = np.linalg.eigh(covGML[k])
        lam = np.maximum(lam, EIG_FLOOR * tr)
        W[k] = (V / np.sqrt(lam)) @ V.conj().T
    return W


def _scalar_weights(covGML):
    """Per-line scalar 1/sqrt(mean diagonal power), identity when zero.

    The block data matrices need one weight per line; for multi-channel
    FRFs the matrix weight is reduced to this scalar there, while the
    B/D stage and the refinement keep the full matrix.
    """
    covGML = np.asarray(covGML, dtype=complex)
    tr = np.einsum("kii->k", covGML).real / covGML.shape[1]
    w = np.ones(covGML.shape[0])
    pos = tr > 0.0
    w[pos] = 1.0 / np.sqrt(tr[pos])
    return w


def subspace_estimate(frf, n, block_rows=None, weighting="total"):
    """One state-space model of order n from FRF samples.

    A rank-n observability basis is read off the SVD of the weighted,
    realified data matrices; B and D then minimize the weighted FRF error
    over the lines. Unstable results are returned as-is with their
    `stable` property false; a weak singular-value gap at order n is
    reported both as a warning and in model.meta["ambiguous_order"].
    """
    if weighting not in WEIGHTINGS:
        raise ConfigurationError(f"weighting must be one of {WEIGHTINGS}")
    n = int(n)
    if n < 1:
        raise ConfigurationError("order must be >= 1")
    r = int(block_rows) if block_rows is not None else n + 2
    if r <= n:
        raise ConfigurationError("block_rows must exceed the order")
    lines = np.asarray(frf.lines, dtype=int)
    L = lines.size
    G = np.asarray(frf.G, dtype=complex)
    p, m = G.shape[1], G.shape[2]
    if L < r + n:
        raise ConfigurationError(
            f"need at least block_rows + order = {r + n} lines, got {L}"
        )
    if 2 * L * m < r * (m + p):
        raise ConfigurationError("too few lines for the requested block rows")

    z = np.exp(2j * np.pi * lines / frf.n_samples)
    w = _scalar_weights(frf.covGML) if weighting == "total" else np.ones(L)
    zp = z[None, :] ** np.arange(r)[:, None]

    Gw = G * w[:, None, None]
    Gmat = np.einsum("rk,kpm->rpkm", zp, Gw).reshape(r * p, L * m)
    Umat = (
        zp[:, None, :, None] * w[None, None, :, None] * np.eye(m)[None, :, None, :]
    ).reshape(r * m, L * m)

    M = np.vstack(
        [
            np.hstack([Umat.real, Umat.imag]),
            np.hstack([Gmat.real, Gmat.imag]),
        ]
    )
    R = np.linalg.qr(M.T, mode="r")
    Lmat = R.T
    L22 = Lmat[r * m :, r * m :]

    Us, s, _ = np.linalg.svd(L22)
    ambiguous = False
    if n < s.size and (s[n - 1] - s[n]) <= ORDER_GAP * s[n - 1]:
        ambiguous = True
        warnings.warn(
            f"singular values {n} and {n + 1} are not separated; "
            "the order is not determined by the data"
        )
    O = Us[:, :n] * np.sqrt(s[:n])

    A = np.linalg.lstsq(O[: (r - 1) * p], O[p:], rcond=None)[0]
    C = O[:p].copy()

    B, D = _solve_bd(A, C, G, z, frf.covGML, weighting)
    return LinearStateSpace(
        A=A, B=B, C=C, D=D, fs=frf.fs,
        meta={"ambiguous_order": ambiguous, "singular_values": s.tolist(),
              "block_rows": r, "weighting": weighting},
    )


def _weight_matrices(covGML, weighting, L, q):
    if weighting == "total":
        return _inverse_sqrt_weights(covGML)
    return np.broadcast_to(np.eye(q, dtype=complex), (L, q, q))


def _solve_bd(A, C, G, z, covGML, weighting):
    """B, D minimizing the weighted FRF error for fixed A and C."""
    n = A.shape[0]
    L, p, m = G.shape
    W = _weight_matrices(covGML, weighting, L, p * m)
    zIA = z[:, None, None] * np.eye(n) - A
    CPhi = np.linalg.solve(
        np.transpose(zIA, (0, 2, 1)), np.broadcast_to(C.T.astype(complex), (L, n, p))
    ).transpose(0, 2, 1)
    rows = []
    rhs = []
    Im = np.eye(m)
    Ipm = np.eye(p * m)
    for k in range(L):
        design = np.hstack([np.kron(CPhi[k], Im), Ipm])
        design = W[k] @ design
        rows.append(design)
        rhs.append(W[k] @ G[k].reshape(-1))
    Mc = np.concatenate(rows)
    vc = np.concatenate(rhs)
    Mr = np.vstack([Mc.real, Mc.imag])
    vr = np.concatenate([vc.real, vc.imag])
    beta = np.linalg.lstsq(Mr, vr, rcond=None)[0]
    B = beta[: n * m].reshape(n, m)
    D = beta[n * m :].reshape(p, m)
    return B, D


def _pack_linear(model):
    return np.concatenate(
        [model.A.ravel(), model.B.ravel(), model.C.ravel(), model.D.ravel()]
    )


def _unpack_linear(theta, n, m, p, fs, meta=None):
    nA, nB, nC = n * n, n * m, p * n
    A = theta[:nA].reshape(n, n)
    B = theta[nA : nA + nB].reshape(n, m)
    C = theta[nA + nB : nA + nB + nC].reshape(p, n)
    D = theta[nA + nB + nC :].reshape(p, m)
    return LinearStateSpace(A=A, B=B, C=C, D=D, fs=fs, meta=meta or {})


def frf_cost(model, frf, weighting="total"):
    """Weighted squared FRF error of a linear model; +inf when the model
    cannot be evaluated on a line."""
    lines = np.asarray(frf.lines, dtype=int)
    G = np.asarray(frf.G, dtype=complex)
    L, p, m = G.shape
    W = _weight_matrices(frf.covGML, weighting, L, p * m)
    try:
        Gm = frf_of_model(model, lines, frf.n_samples)
    except NumericalError:
        return np.inf
    res = np.einsum("kij,kj->ki", W, (Gm - G).reshape(L, p * m))
    return float(np.sum(res.real**2 + res.imag**2))


def _linear_jacobian(model, z):
    """d vec(G) / d [A,B,C,D] per line; vec and parameters row-major."""
    A, B, C, D = model.A, model.B, model.C, model.D
    n, m, p = model.n, model.m, model.p
    L = z.size
    zIA = z[:, None, None] * np.eye(n) - A
    PhiB = np.linalg.solve(zIA, np.broadcast_to(B.astype(complex), (L, n, m)))
    CPhi = np.linalg.solve(
        np.transpose(zIA, (0, 2, 1)), np.broadcast_to(C.T.astype(complex), (L, n, p))
    ).transpose(0, 2, 1)
    n_par = n * n + n * m + p * n + p * m
    J = np.zeros((L, p * m, n_par), dtype=complex)
    col = 0
    for i in range(n):
        for j in range(n):
            # d(C Phi B)/dA_ij = (C Phi)_:,i (Phi B)_j,:
            J[:, :, col] = np.einsum("ka,kl->kal", CPhi[:, :, i], PhiB[:, j, :]).reshape(L, p * m)
            col += 1
    for j in range(n):
        for l in range(m):
            block = np.zeros((L, p, m), dtype=complex)
            block[:, :, l] = CPhi[:, :, j]
            J[:, :, col] = block.reshape(L, p * m)
            col += 1
    for a in range(p):
        for i in range(n):
            block = np.zeros((L, p, m), dtype=complex)
            block[:, a, :] = PhiB[:, i, :]
            J[:, :, col] = block.reshape(L, p * m)
            col += 1
    eye = np.eye(p * m)
    J[:, :, col:] = eye[None, :, :]
    return J


def lm_refine_linear(model, frf, iterations=100, weighting="total", lambda0=100.0):
    """Refine A, B, C, D against the weighted FRF fit.

    Runs up to `iterations` damped Gauss-Newton attempts, stopping early
    once an accepted step improves the cost by less than a relative
    1e-12. The returned model's meta carries the accepted cost sequence.
    """
    if weighting not in WEIGHTINGS:
        raise ConfigurationError(f"weighting must be one of {WEIGHTINGS}")
    lines = np.asarray(frf.lines, dtype=int)
    G = np.asarray(frf.G, dtype=complex)
    L, p, m = G.shape
    if (p, m) != (model.p, model.m):
        raise ConfigurationError("model and FRF channel counts differ")
    W = _weight_matrices(frf.covGML, weighting, L, p * m)
    z = np.exp(2j * np.pi * lines / frf.n_samples)
    n, fs = model.n, model.fs

    def cost_fn(theta):
        return frf_cost(_unpack_linear(theta, n, m, p, fs), frf, weighting)

    def normal_fn(theta):
        mdl = _unpack_linear(theta, n, m, p, fs)
        Gm = frf_of_model(mdl, lines, frf.n_samples)
        res = np.einsum("kij,kj->ki", W, (Gm - G).reshape(L, p * m))
        J = np.einsum("kij,kjs->kis", W, _linear_jacobian(mdl, z))
        H = np.einsum("kis,kit->st", J.conj(), J).real
        g = np.einsum("kis,ki->s", J.conj(), res).real
        return H, g

    thetas, costs, lambdas, successes, stopped_early = _lm_loop(
        _pack_linear(model), cost_fn, normal_fn, lambda0, iterations, REFINE_REL_TOL,
    )
    meta = dict(model.meta)
    meta.update(
        fit_costs=costs, iterations_run=len(successes), stopped_early=stopped_early,
        lambdas=lambdas,
    )
    return _unpack_linear(thetas[-1], n, m, p, fs, meta=meta)


@dataclass(frozen=True)
class OrderFit:
    """Result of one candidate order: a model with its weighted fit cost,
    or the error that prevented it."""

    model: LinearStateSpace = None
    cost: float = np.inf
    error: str = None


def loop_orders(frf, config):
    """Subspace + refinement for every candidate order.

    Failures are isolated: a bad order yields an OrderFit carrying the
    error message while the remaining orders still run. Selection among
    the returned models is up to the caller.
    """
    results = {}
    for n in config.orders:
        try:
            model = subspace_estimate(
                frf, n, block_rows=config.block_rows, weighting=config.weighting
            )
            model = lm_refine_linear(
                model, frf, iterations=config.lm_iterations, weighting=config.weighting
            )
            results[n] = OrderFit(model=model, cost=frf_cost(model, frf, config.weighting))
        except (ConfigurationError, NumericalError, np.linalg.LinAlgError) as exc:
            results[n] = OrderFit(error=str(exc))
    return results
