"""Levenberg-Marquardt estimation of polynomial state-space models.

One damped Gauss-Newton engine drives both the linear FRF refinement and
the full nonlinear time-domain optimization. Each iteration solves

    (J'WJ + lambda * diag(J'WJ)) step = -J'W e

and accepts the step only if the cost strictly decreases; the damping
parameter is halved after a success and multiplied by sqrt(10) after a
failure. Time-domain costs can be weighted per frequency line with an
inverse noise covariance.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import relative_rms_error
from .exceptions import ConfigurationError, NumericalError
from .model import jacobian, simulate

#: accepted-step relative cost improvements below this end the optimization
REL_COST_FLOOR = 1e-14


def lambda_update(lam, success):
    """Next damping value: 0.5*lambda on success, lambda*sqrt(10) on failure."""
    if not lam > 0:
        raise ConfigurationError("lambda must be positive")
    return 0.5 * lam if success else lam * math.sqrt(10.0)


@dataclass(frozen=True)
class FrequencyWeighting:
    """Per-line inverse covariance weighting of the time-domain error.

    ``lines`` index the DFT grid of one period of ``period_length``
    samples; ``inverse_covariance`` holds one (p, p) Hermitian weight per
    line. The retained part of every segment must span whole periods for
    the weighting to apply.
    """

    lines: np.ndarray
    inverse_covariance: np.ndarray
    period_length: int

    def __post_init__(self):
        lines = np.asarray(self.lines, dtype=int)
        W = np.asarray(self.inverse_covariance, dtype=complex)
        if lines.ndim != 1 or lines.size == 0:
            raise ConfigurationError("lines must be a non-empty integer vector")
        if W.ndim != 3 or W.shape[0] != lines.size or W.shape[1] != W.shape[2]:
            raise ConfigurationError(
                "inverse_covariance must be (n_lines, p, p)"
            )
        if not (isinstance(self.period_length, (int, np.integer)) and self.period_length > 0):
            raise ConfigurationError("period_length must be a positive integer")
        if np.any(lines < 0) or np.any(lines >= self.period_length):
            raise ConfigurationError("lines must lie in [0, period_length)")
        object.__setattr__(self, "lines", lines)
        object.__setattr__(self, "inverse_covariance", W)


@dataclass(frozen=True)
class LmConfig:
    """Settings of one optimization run; the algorithm itself is
    deterministic, there is no randomness to seed."""

    max_iterations: int = 100
    lambda0: float = 100.0
    weighting: FrequencyWeighting = None

    def __post_init__(self):
        if not (isinstance(self.max_iterations, (int, np.integer)) and self.max_iterations >= 1):
            raise ConfigurationError("max_iterations must be an integer >= 1")
        if not self.lambda0 > 0:
            raise ConfigurationError("lambda0 must be positive")
        if self.weighting is not None and not isinstance(self.weighting, FrequencyWeighting):
            raise ConfigurationError(
                "weighting must be None (uniform) or a FrequencyWeighting"
            )


@dataclass(frozen=True)
class OptimizationTrace:
    """Models accepted along the way, oldest first (entry 0 is the start).

    ``lambdas[i]`` is the damping in effect when ``models[i]`` was
    accepted (``lambdas[0]`` is the initial value); ``step_successes``
    records the outcome of every attempted iteration, so the lambda
    sequence can be replayed exactly.
    """

    models: list
    costs: list
    lambdas: list
    step_successes: list
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.models)


def _usable_weighting(weighting, data):
    """Check whole-period alignment; fall back to uniform with a warning."""
    if weighting is None:
        return None
    N = weighting.period_length
    for start, stop in data.segment_bounds:
        retained = stop - (start + data.t1[0] + data.t2)
        if retained <= 0 or retained % N != 0:
            warnings.warn(
                "retained segment length is not a whole number of periods; "
                "falling back to uniform weighting"
            )
            return None
    return weighting


def _segment_spectra(arr, data, weighting):
    """DFT of the retained part of each segment at the weighted lines.

    Yields (n_lines, ...) complex blocks, one per segment; line k of the
    one-period grid maps to bin q*k of a q-period DFT.
    """
    N = weighting.period_length
    for start, stop in data.segment_bounds:
        begin = start + data.t1[0] + data.t2
        q = (stop - begin) // N
        spec = np.fft.fft(arr[begin:stop], axis=0)
        yield spec[weighting.lines * q]


def _cost_of_error(err, data, weighting):
    """Weighted squared-error cost of a residual array (T, p)."""
    if weighting is None:
        mask = data.cost_mask()
        return float(np.sum(err[mask] ** 2))
    total = 0.0
    W = weighting.inverse_covariance
    for Ef in _segment_spectra(err, data, weighting):
        total += float(np.einsum("ki,kij,kj->", Ef.conj(), W, Ef).real)
    return total


def weighted_cost(model, data, weighting=None):
    """Cost of a model on concatenated data; +inf if simulation diverges."""
    weighting = _usable_weighting(weighting, data)
    sim = simulate(model, data.u)
    if sim.diverged:
        return np.inf
    return _cost_of_error(sim.y - data.y, data, weighting)


def _normal_equations(model, data, weighting):
    """Gauss-Newton H = J'WJ and gradient g = J'We at the current model."""
    sim = simulate(model, data.u)
    if sim.diverged:
        raise NumericalError("divergent simulation at an accepted point")
    err = sim.y - data.y
    J = jacobian(model, data.u)
    mask = data.cost_mask()
    err = np.where(mask[:, None], err, 0.0)
    J = np.where(mask[:, None, None], J, 0.0)
    if weighting is None:
        J2 = J.reshape(-1, J.shape[2])
        e2 = err.reshape(-1)
        return J2.T @ J2, J2.T @ e2
    W = weighting.inverse_covariance
    n_par = J.shape[2]
    H = np.zeros((n_par, n_par))
    g = np.zeros(n_par)
    err_spectra = _segment_spectra(err, data, weighting)
    jac_spectra = _segment_spectra(J, data, weighting)
    for Ef, Jf in zip(err_spectra, jac_spectra):
        WJ = np.einsum("kij,kjs->kis", W, Jf)
        H += np.einsum("kis,kit->st", Jf.conj(), WJ).real
        g += np.einsum("kis,ki->s", Jf.conj(), np.einsum("kij,kj->ki", W, Ef)).real
    return H, g


def _solve_step(H, g, lam):
    """Damped step, or None when the system is singular or non-finite."""
    d = np.diag(H).copy()
    d[d == 0.0] = 1.0
    try:
        step = np.linalg.solve(H + lam * np.diag(d), -g)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(step)):
        return None
    return step


def _lm_loop(theta0, cost_fn, normal_fn, lambda0, max_iterations, rel_tol):
    """Shared Levenberg-Marquardt iteration.

    Returns (thetas, costs, lambdas, successes, stopped_early): one entry
    per accepted point (the start included), plus the per-attempt
    success record. Every iteration is one attempted step.
    """
    theta = np.asarray(theta0, dtype=float)
    cost = cost_fn(theta)
    if not np.isfinite(cost):
        raise NumericalError("initial cost is not finite")
    lam = float(lambda0)
    thetas, costs, lambdas = [theta], [cost], [lam]
    successes = []
    H, g = normal_fn(theta)
    stopped_early = False
    for _ in range(max_iterations):
        step = _solve_step(H, g, lam)
        if step is None:
            trial_cost = np.inf
        else:
            trial = theta + step
            trial_cost = cost_fn(trial)
        if np.isfinite(trial_cost) and trial_cost < cost:
            successes.append(True)
            theta = trial
            thetas.append(theta)
            costs.append(trial_cost)
            lambdas.append(lam)
            rel_drop = (cost - trial_cost) / cost if cost > 0 else np.inf
            cost = trial_cost
            lam = lambda_update(lam, True)
            if rel_drop < rel_tol:
                stopped_early = True
                break
            H, g = normal_fn(theta)
        else:
            successes.append(False)
            lam = lambda_update(lam, False)
    return thetas, costs, lambdas, successes, stopped_early


def optimize(model0, data, config=None):
    """Fit all active parameters of a model to concatenated data.

    Returns an :class:`OptimizationTrace` whose first entry is the
    starting model; costs over accepted models decrease strictly.
    Samples excluded by the data's cost mask influence neither the cost
    nor the Jacobian.
    """
    if config is None:
        config = LmConfig()
    weighting = _usable_weighting(config.weighting, data)
    if data.u.shape[1] != model0.m or data.y.shape[1] != model0.p:
        raise ConfigurationError("data channel counts do not match the model")

    def cost_fn(theta):
        return weighted_cost(model0.with_parameters(theta), data, weighting)

    def normal_fn(theta):
        return _normal_equations(model0.with_parameters(theta), data, weighting)

    thetas, costs, lambdas, successes, stopped_early = _lm_loop(
        model0.parameter_vector(), cost_fn, normal_fn,
        config.lambda0, config.max_iterations, REL_COST_FLOOR,
    )
    return OptimizationTrace(
        models=[model0.with_parameters(t) for t in thetas],
        costs=costs,
        lambdas=lambdas,
        step_successes=successes,
        meta={"stopped_early": stopped_early, "iterations_run": len(successes)},
    )


def select_best(trace, validation):
    """Model from a trace with the lowest pooled validation error.

    Every stored model is simulated over the validation record; masked
    (transient) samples are excluded from the error. Ties go to the model
    accepted later. Returns (model, pooled_rel_rmse).
    """
    if len(trace) == 0:
        raise ConfigurationError("empty optimization trace")
    mask = validation.cost_mask()
    best_idx, best_err = None, np.inf
    for i, model in enumerate(trace.models):
        sim = simulate(model, validation.u)
        if sim.diverged:
            continue
        err = relative_rms_error(validation.y, sim.y, mask).pooled
        if err <= best_err:
            best_idx, best_err = i, err
    if best_idx is None:
        raise NumericalError("every stored model diverges on the validation data")
    return trace.models[best_idx], best_err
