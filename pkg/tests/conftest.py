"""Shared builders and independent oracles for the test suite.

Oracles here are intentionally naive (plain loops, closed forms) so they
cannot share bugs with the vectorized library code they check.
"""

import functools
import itertools

import numpy as np
import pytest

import pnlss as P


@pytest.fixture(scope="session")
def duffing_benchmark():
    """One shared oscillator dataset; generation costs a few seconds."""
    params = P.DuffingParams()
    train, validation = P.make_benchmark(params, P.default_train_config())
    return params, train, validation


@pytest.fixture(scope="session")
def case_study_run(tmp_path_factory):
    """One full pipeline run shared by the CLI and acceptance tests.

    Returns (workdir, report, elapsed_seconds).
    """
    import time

    workdir = tmp_path_factory.mktemp("case_study")
    start = time.time()
    report = P.run_case_study(str(workdir), preset="duffing", seed=0)
    return workdir, report, time.time() - start


@functools.lru_cache(maxsize=None)
def _degree_block(n_vars, degree):
    """All exponent vectors of one total degree, descending lexicographic."""
    block = [
        v for v in itertools.product(range(degree + 1), repeat=n_vars)
        if sum(v) == degree
    ]
    block.sort(reverse=True)
    return np.array(block, dtype=np.int64).reshape(len(block), n_vars)


def brute_force_exponents(n_vars, degrees):
    """Filter-by-sum enumeration, independent of the library's generator."""
    blocks = [_degree_block(n_vars, d) for d in sorted(set(degrees))]
    return np.concatenate(blocks, axis=0)


def stable_linear(seed=0, n=2, m=1, p=1, fs=1.0, radius=0.8):
    """Random linear model with spectral radius scaled below `radius`."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    rho = max(abs(np.linalg.eigvals(A)))
    A *= radius / rho
    B = rng.normal(size=(n, m))
    C = rng.normal(size=(p, n))
    D = 0.1 * rng.normal(size=(p, m))
    return P.LinearStateSpace(A=A, B=B, C=C, D=D, fs=fs)


def tame_pnlss(seed=0, n=2, m=1, p=1, state_degrees=(2, 3),
               output_degrees=(2, 3), state_rule="full", output_rule="full",
               scale=0.01):
    """Random nonlinear model small enough to stay bounded on rms~0.5 input."""
    lin = stable_linear(seed, n=n, m=m, p=p)
    model = P.init_from_linear(lin, state_degrees, output_degrees,
                               state_rule=state_rule, output_rule=output_rule)
    rng = np.random.default_rng(seed + 1000)
    theta = model.parameter_vector()
    n_lin = n * n + n * m + p * n + p * m
    theta[n_lin:] = scale * rng.normal(size=theta.size - n_lin)
    return model.with_parameters(theta)


def naive_monomials(exponents, x, u):
    """Product-by-product basis evaluation, one monomial at a time."""
    v = list(x) + list(u)
    out = []
    for row in exponents:
        term = 1.0
        for base, e in zip(v, row):
            term *= float(base) ** int(e)
        out.append(term)
    return np.array(out)


def naive_pnlss_sim(model, u):
    """Step-by-step recursion with scalar arithmetic only."""
    A, B = model.linear.A, model.linear.B
    C, D = model.linear.C, model.linear.D
    E, F = model.E, model.F
    x = np.zeros(model.n) if model.x0 is None else np.array(model.x0, dtype=float)
    ys, xs = [], []
    for k in range(u.shape[0]):
        xs.append(x.copy())
        zeta = naive_monomials(model.basis_state.exponents, x, u[k])
        eta = naive_monomials(model.basis_output.exponents, x, u[k])
        ys.append(C @ x + D @ u[k] + F @ eta)
        x = A @ x + B @ u[k] + E @ zeta
    return np.array(ys), np.array(xs)


def analytic_frf(lin, lines, n_samples):
    """D + C (zI - A)^-1 B evaluated line by line with plain solves."""
    out = np.empty((len(lines), lin.p, lin.m), dtype=complex)
    I = np.eye(lin.n)
    for i, k in enumerate(lines):
        z = np.exp(2j * np.pi * k / n_samples)
        out[i] = lin.D + lin.C @ np.linalg.solve(z * I - lin.A, lin.B)
    return out


def steady_linear_record(lin, config, settle=30, noise_std=0.0, noise_seed=1):
    """Periodic record of a linear system driven by multisine realizations.

    Runs `settle` warm-up periods per realization so the retained periods
    are steady state, then stacks P identical (plus optional noisy) copies.
    """
    signals = P.generate_multisine(config)
    R, Pn, N = config.realizations, config.periods, config.n_samples
    m, p = lin.m, lin.p
    u = np.empty((R, Pn, N, m))
    y = np.empty((R, Pn, N, p))
    rng = np.random.default_rng(noise_seed)
    for r, sig in enumerate(signals):
        period = sig.samples[:N, None] * np.ones((1, m))
        ext = np.tile(period, (settle + Pn, 1))
        yy, _ = P.simulate_linear(lin, ext)
        u[r] = np.tile(period, (Pn, 1)).reshape(Pn, N, m)
        y[r] = yy[settle * N:].reshape(Pn, N, p)
    if noise_std > 0:
        y = y + noise_std * rng.standard_normal(y.shape)
    return P.DataRecord(u=u, y=y, fs=config.fs,
                        excited_lines=signals[0].excited_lines, periodic=True)


def multisine_concat(model, seeds, n_samples=1024, rms=0.5, t2=100,
                     fs=None, periods=1):
    """Simulate a nonlinear model over fresh multisine segments and join them."""
    fs = float(n_samples) if fs is None else fs
    recs = []
    for seed in seeds:
        cfg = P.MultisineConfig(n_samples=n_samples, fs=fs, grid="odd",
                                realizations=1, periods=1, rms=rms, seed=seed)
        sig = P.generate_multisine(cfg)[0]
        u = np.tile(sig.samples[:, None], (periods, 1))
        sim = P.simulate(model, u)
        assert not sim.diverged
        recs.append(P.DataRecord(
            u=u[None, None], y=sim.y[None, None], fs=fs,
            excited_lines=sig.excited_lines,
        ))
    return P.concatenate(recs, prepend=0, t2=t2)


def replay_lambdas(lambda0, step_successes):
    lam = lambda0
    out = [lam]
    for ok in step_successes:
        if ok:
            out.append(lam)
            lam = P.lambda_update(lam, True)
        else:
            lam = P.lambda_update(lam, False)
    return out
