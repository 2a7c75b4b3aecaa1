"""Estimator wrappers: sklearn conventions plus end-to-end behaviour."""

import numpy as np
import pytest
from sklearn.base import clone

import pnlss as P
from conftest import (
    analytic_frf,
    multisine_concat,
    stable_linear,
    steady_linear_record,
    tame_pnlss,
)


def periodic_tensors(model, seeds, n_samples=512, rms=0.5, settle=30,
                     periods=2):
    """Steady-state (R, P, N, ch) tensors of a nonlinear model."""
    R = len(seeds)
    u = np.empty((R, periods, n_samples, model.m))
    y = np.empty((R, periods, n_samples, model.p))
    excited = None
    for r, seed in enumerate(seeds):
        cfg = P.MultisineConfig(n_samples=n_samples, fs=float(n_samples),
                                grid="odd", realizations=1, periods=1,
                                rms=rms, seed=seed)
        sig = P.generate_multisine(cfg)[0]
        excited = sig.excited_lines
        period = np.tile(sig.samples[:n_samples, None], (1, model.m))
        sim = P.simulate(model, np.tile(period, (settle + periods, 1)))
        assert not sim.diverged
        u[r] = np.tile(period, (periods, 1)).reshape(periods, n_samples, model.m)
        y[r] = sim.y[settle * n_samples:].reshape(periods, n_samples, model.p)
    return u, y, excited


class TestSklearnConventions:
    def test_get_params_and_clone(self):
        est = P.PnlssEstimator(order=3, max_iterations=7, fs=2048.0)
        params = est.get_params()
        assert params["order"] == 3
        assert params["max_iterations"] == 7
        twin = clone(est)
        assert twin.get_params() == params
        est.set_params(order=2, lambda0=10.0)
        assert est.order == 2 and est.lambda0 == 10.0

    def test_subspace_estimator_params(self):
        est = P.SubspaceLinearEstimator(orders=(1, 2), iterations=5)
        assert clone(est).get_params() == est.get_params()


class TestSubspaceLinearEstimator:
    def test_recovers_a_linear_system(self):
        lin = stable_linear(seed=17, n=2)
        cfg = P.MultisineConfig(n_samples=256, fs=256.0, grid="odd",
                                realizations=2, periods=2, rms=1.0, seed=3)
        rec = steady_linear_record(lin, cfg, settle=40)
        est = P.SubspaceLinearEstimator(
            orders=(2,), order=2, iterations=30,
            fs=rec.fs, excited_lines=rec.excited_lines)
        est.fit(rec.u, rec.y)
        G_true = analytic_frf(lin, rec.excited_lines, 256)
        G_fit = P.frf_of_model(est.model_, rec.excited_lines, 256)
        assert np.max(np.abs(G_fit - G_true)) < 1e-7 * np.max(np.abs(G_true))
        assert est.cost_ == est.results_[2].cost
        assert isinstance(est.results_[2], P.OrderFit)

    def test_picks_the_cheapest_order_when_unset(self):
        lin = stable_linear(seed=17, n=2)
        cfg = P.MultisineConfig(n_samples=256, fs=256.0, grid="odd",
                                realizations=2, periods=2, rms=1.0, seed=3)
        rec = steady_linear_record(lin, cfg, settle=40)
        est = P.SubspaceLinearEstimator(
            orders=(1, 2), iterations=30, fs=rec.fs,
            excited_lines=rec.excited_lines)
        est.fit(rec.u, rec.y)
        assert est.model_.n == 2
        assert est.results_[1].cost > est.results_[2].cost

    def test_predict_shape(self):
        lin = stable_linear(seed=17, n=2)
        cfg = P.MultisineConfig(n_samples=256, fs=256.0, grid="odd",
                                realizations=2, periods=2, rms=1.0, seed=3)
        rec = steady_linear_record(lin, cfg, settle=40)
        est = P.SubspaceLinearEstimator(
            orders=(2,), order=2, iterations=10,
            fs=rec.fs, excited_lines=rec.excited_lines).fit(rec.u, rec.y)
        assert est.predict(np.ones((50, 1))).shape == (50, 1)

    def test_missing_lines_or_order_rejected(self):
        est = P.SubspaceLinearEstimator()
        with pytest.raises(P.ConfigurationError):
            est.fit(np.zeros((2, 2, 16, 1)), np.zeros((2, 2, 16, 1)))
        lin = stable_linear(seed=17, n=2)
        cfg = P.MultisineConfig(n_samples=256, fs=256.0, grid="odd",
                                realizations=2, periods=2, rms=1.0, seed=3)
        rec = steady_linear_record(lin, cfg, settle=40)
        bad = P.SubspaceLinearEstimator(
            orders=(2,), order=3, fs=rec.fs, excited_lines=rec.excited_lines)
        with pytest.raises(P.ConfigurationError):
            bad.fit(rec.u, rec.y)


@pytest.fixture(scope="module")
def fitted():
    truth = tame_pnlss(seed=81, scale=0.005)
    u, y, excited = periodic_tensors(truth, [10, 11])
    validation = multisine_concat(truth, [33], n_samples=512, t2=60)
    est = P.PnlssEstimator(order=2, max_iterations=30,
                           subspace_iterations=30, fs=512.0,
                           excited_lines=excited)
    est.fit(u, y, validation=validation)
    return truth, validation, est


class TestPnlssEstimator:
    def test_beats_its_linear_initialization(self, fitted):
        truth, validation, est = fitted
        assert est.validation_error_ < 1e-2
        y_lin, _ = P.simulate_linear(est.linear_model_, validation.u)
        lin_err = P.relative_rms_error(validation.y, y_lin,
                                       validation.cost_mask()).pooled
        assert est.validation_error_ < lin_err

    def test_exposes_the_pipeline_artifacts(self, fitted):
        _, _, est = fitted
        assert isinstance(est.frf_, P.FrfEstimate)
        assert est.linear_model_.n == 2
        assert est.trace_.costs[0] > est.trace_.costs[-1]
        assert any(est.model_ is m for m in est.trace_.models)

    def test_score_is_negative_pooled_error(self, fitted):
        truth, validation, est = fitted
        score = est.score(validation.u, validation.y)
        expected = P.relative_rms_error(validation.y,
                                        est.predict(validation.u)).pooled
        assert score == -expected

    def test_fit_without_validation_keeps_last(self):
        truth = tame_pnlss(seed=82, scale=0.005)
        u, y, excited = periodic_tensors(truth, [12, 13], n_samples=256)
        est = P.PnlssEstimator(order=2, max_iterations=5,
                               subspace_iterations=10, fs=256.0,
                               excited_lines=excited)
        est.fit(u, y)
        assert est.validation_error_ is None
        assert est.model_ is est.trace_.models[-1]
