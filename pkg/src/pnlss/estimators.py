"""Estimator-style wrappers around the identification pipeline.

These classes follow the scikit-learn conventions (constructor stores
hyperparameters untouched, fit sets trailing-underscore attributes,
get_params/set_params/clone work) so the pipeline can be driven the same
way as any other estimator. The functional modules remain the primary
API; the wrappers just sequence them.
"""

import numpy as np
from sklearn.base import BaseEstimator

from .dataset import DataRecord, average_periods, concatenate, relative_rms_error
from .exceptions import ConfigurationError
from .frf import estimate_bla
from .linear import simulate_linear
from .model import init_from_linear, simulate
from .optimize import LmConfig, optimize, select_best
from .subspace import SubspaceConfig, loop_orders


class SubspaceLinearEstimator(BaseEstimator):
    """Linear state-space estimation from periodic data via the FRF.

    fit(u, y) expects (R, P, N, m) and (R, P, N, p) tensors; the averaged
    FRF is computed internally. After fitting, `model_` holds the model of
    `order` (or of the best-fitting candidate when order is None) and
    `results_` the per-order outcome map.
    """

    def __init__(self, orders=(2,), order=None, block_rows=None, iterations=100,
                 weighting="total", fs=1.0, excited_lines=None):
        self.orders = orders
        self.order = order
        self.block_rows = block_rows
        self.iterations = iterations
        self.weighting = weighting
        self.fs = fs
        self.excited_lines = excited_lines

    def fit(self, u, y):
        if self.excited_lines is None:
            raise ConfigurationError("excited_lines must be set before fitting")
        rec = DataRecord(
            u=np.asarray(u, dtype=float), y=np.asarray(y, dtype=float),
            fs=self.fs, excited_lines=np.asarray(self.excited_lines, dtype=int),
        )
        self.frf_ = estimate_bla(rec)
        config = SubspaceConfig(
            orders=tuple(np.atleast_1d(self.orders)),
            block_rows=self.block_rows,
            lm_iterations=self.iterations,
            weighting=self.weighting,
        )
        self.results_ = loop_orders(self.frf_, config)
        if self.order is not None:
            fit = self.results_.get(int(self.order))
            if fit is None or fit.model is None:
                raise ConfigurationError(
                    f"order {self.order} was not estimated successfully"
                )
            self.model_, self.cost_ = fit.model, fit.cost
        else:
            ok = {n: f for n, f in self.results_.items() if f.model is not None}
            if not ok:
                raise ConfigurationError("no candidate order succeeded")
            best = min(ok, key=lambda n: ok[n].cost)
            self.model_, self.cost_ = ok[best].model, ok[best].cost
        return self

    def predict(self, u):
        y, _ = simulate_linear(self.model_, np.asarray(u, dtype=float))
        return y


class PnlssEstimator(BaseEstimator):
    """Full nonlinear identification: FRF, subspace, then LM optimization.

    fit(u, y) takes the same (R, P, N, channel) tensors; periods are
    averaged, realizations concatenated with one period of transient
    prepend, and the polynomial model is optimized from the linear
    initialization. `model_` is the final model (validated against a
    held-out record when validation data is supplied to fit).
    """

    def __init__(self, order=2, state_degrees=(2, 3), output_degrees=(2, 3),
                 state_rule="full", output_rule="full", max_iterations=100,
                 lambda0=100.0, block_rows=None, subspace_iterations=100,
                 weighting="total", t2=0, fs=1.0, excited_lines=None):
        self.order = order
        self.state_degrees = state_degrees
        self.output_degrees = output_degrees
        self.state_rule = state_rule
        self.output_rule = output_rule
        self.max_iterations = max_iterations
        self.lambda0 = lambda0
        self.block_rows = block_rows
        self.subspace_iterations = subspace_iterations
        self.weighting = weighting
        self.t2 = t2
        self.fs = fs
        self.excited_lines = excited_lines

    def fit(self, u, y, validation=None):
        linear = SubspaceLinearEstimator(
            orders=(int(self.order),), order=int(self.order),
            block_rows=self.block_rows, iterations=self.subspace_iterations,
            weighting=self.weighting, fs=self.fs, excited_lines=self.excited_lines,
        ).fit(u, y)
        self.linear_model_ = linear.model_
        self.frf_ = linear.frf_

        rec = DataRecord(
            u=np.asarray(u, dtype=float), y=np.asarray(y, dtype=float),
            fs=self.fs, excited_lines=np.asarray(self.excited_lines, dtype=int),
        )
        averaged = average_periods(rec)
        data = concatenate([averaged], prepend=averaged.n_samples, t2=int(self.t2))
        self.train_data_ = data

        model0 = init_from_linear(
            self.linear_model_, self.state_degrees, self.output_degrees,
            state_rule=self.state_rule, output_rule=self.output_rule,
        )
        self.trace_ = optimize(
            model0, data,
            LmConfig(max_iterations=int(self.max_iterations), lambda0=self.lambda0),
        )
        if validation is not None:
            self.model_, self.validation_error_ = select_best(self.trace_, validation)
        else:
            self.model_ = self.trace_.models[-1]
            self.validation_error_ = None
        return self

    def predict(self, u):
        sim = simulate(self.model_, np.asarray(u, dtype=float))
        return sim.y

    def score(self, u, y):
        """Negative pooled relative RMS error (higher is better)."""
        err = relative_rms_error(np.asarray(y, dtype=float), self.predict(u))
        return -err.pooled
