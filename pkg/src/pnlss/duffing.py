"""Forced Duffing oscillator: integration oracle and benchmark datasets.

The system  m*y'' + c*y' + (alpha + beta*y^2)*y = u(t)  is integrated
with fixed-step RK4 under a zero-order-hold input, providing a known
nonlinear plant to exercise the whole identification pipeline: odd
multisine training records and a growing-amplitude noise sequence for
validation, both with seeded measurement noise.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .dataset import DataRecord, concatenate
from .exceptions import ConfigurationError, DivergenceError, NumericalError
from .multisine import MultisineConfig, generate_multisine

#: retained training periods must agree to this fraction of the output RMS
PERIODICITY_TOL = 1e-6

#: periods integrated and discarded before data is retained
SETTLE_PERIODS = 3


@dataclass(frozen=True)
class DuffingParams:
    """Physical constants of the oscillator plus measurement noise.

    Defaults put the resonance at 50 Hz with a 5% damping ratio so that
    three excitation periods are enough to reach steady state; beta makes
    the cubic restoring force a noticeable fraction of the linear one at
    the default excitation level.
    """

    mass: float = 1.0
    damping: float = 10.0 * math.pi
    alpha: float = (2.0 * math.pi * 50.0) ** 2
    beta: float = 3.7e9
    fs: float = 1024.0
    noise_std: float = 4.0e-6
    seed: int = 0

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigurationError("mass must be positive")
        if not self.damping > 0:
            raise ConfigurationError("damping must be positive")
        if not self.fs > 0:
            raise ConfigurationError("fs must be positive")
        if self.noise_std < 0:
            raise ConfigurationError("noise_std must be >= 0")


def default_train_config(rms=50.0, seed=0, grid="odd"):
    """Desk-scale training excitation: 4 realizations of 4 retained periods
    of a 2048-sample odd multisine exciting 0.5 Hz to 149.5 Hz."""
    return MultisineConfig(
        n_samples=2048,
        fs=1024.0,
        grid=grid,
        f_max_ratio=150.0 / 512.0,
        realizations=4,
        periods=4,
        rms=rms,
        seed=seed,
    )


def simulate_duffing(params, u, substeps=10):
    """Sampled displacement response to a sampled force input.

    The input is held constant over each sample while the continuous
    dynamics are integrated with `substeps` RK4 steps per sample;
    y[k] is the displacement at sample instant k starting from rest.
    Measurement noise of std `params.noise_std` (seeded) is added after
    integration.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    if not (isinstance(substeps, (int, np.integer)) and substeps >= 1):
        raise ConfigurationError("substeps must be an integer >= 1")
    if not np.all(np.isfinite(u)):
        raise ConfigurationError("input contains non-finite samples")
    T = u.size
    h = 1.0 / (params.fs * substeps)
    inv_m = 1.0 / params.mass
    c, alpha, beta = params.damping, params.alpha, params.beta

    y = np.empty(T)
    pos, vel = 0.0, 0.0
    for k in range(T):
        y[k] = pos
        # plain float: keeps inf/nan propagation silent until the check below
        uk = float(u[k])
        for _ in range(substeps):
            a1 = (uk - c * vel - (alpha + beta * pos * pos) * pos) * inv_m
            p2 = pos + 0.5 * h * vel
            v2 = vel + 0.5 * h * a1
            a2 = (uk - c * v2 - (alpha + beta * p2 * p2) * p2) * inv_m
            p3 = pos + 0.5 * h * v2
            v3 = vel + 0.5 * h * a2
            a3 = (uk - c * v3 - (alpha + beta * p3 * p3) * p3) * inv_m
            p4 = pos + h * v3
            v4 = vel + h * a3
            a4 = (uk - c * v4 - (alpha + beta * p4 * p4) * p4) * inv_m
            pos = pos + h * (vel + 2.0 * (v2 + v3) + v4) / 6.0
            vel = vel + h * (a1 + 2.0 * (a2 + a3) + a4) / 6.0
        if not (math.isfinite(pos) and math.isfinite(vel)):
            raise DivergenceError(
                f"integration left the finite range at sample {k}", sample_index=k
            )
    if params.noise_std > 0:
        rng = np.random.default_rng(np.random.SeedSequence(params.seed))
        y = y + params.noise_std * rng.standard_normal(T)
    return y


def _bandlimited_noise(rng, length, keep_bins):
    """Unit-RMS Gaussian noise with energy only on the kept DFT bins."""
    spectrum = np.fft.rfft(rng.standard_normal(length))
    mask = np.zeros(spectrum.size, dtype=bool)
    mask[keep_bins] = True
    spectrum[~mask] = 0.0
    w = np.fft.irfft(spectrum, n=length)
    return w / np.sqrt(np.mean(w**2))


def make_benchmark(params, train_config, val_amplitude_growth=None,
                   substeps=10, val_length=8192, val_t2=256):
    """Training record and growing-amplitude validation data.

    Training drives every multisine realization through the oscillator,
    drops SETTLE_PERIODS periods, verifies the retained periods repeat to
    within PERIODICITY_TOL of the output RMS, then adds noise. Validation
    is band-limited Gaussian noise (the training band) whose amplitude
    ramps linearly between the given bounds, the upper one above the
    training level so the data probes beyond what training showed.
    """
    if train_config.fs != params.fs:
        raise ConfigurationError("train_config.fs must match params.fs")
    if val_amplitude_growth is None:
        val_amplitude_growth = (0.1 * train_config.rms, 1.4 * train_config.rms)
    a_start, a_end = float(val_amplitude_growth[0]), float(val_amplitude_growth[1])
    noiseless = replace(params, noise_std=0.0)
    signals = generate_multisine(train_config)
    R = train_config.realizations
    P = train_config.periods
    N = train_config.n_samples
    # tagged entropy keeps these streams disjoint from the multisine's own
    # spawn tree even when params.seed == train_config.seed
    seeds = np.random.SeedSequence([params.seed, 0xD0FF]).spawn(R + 2)

    u = np.empty((R, P, N, 1))
    y = np.empty((R, P, N, 1))
    for r, sig in enumerate(signals):
        period = sig.samples[:N]
        ext = np.tile(period, SETTLE_PERIODS + P)
        try:
            resp = simulate_duffing(noiseless, ext, substeps=substeps)
        except DivergenceError as exc:
            raise NumericalError(
                "oscillator diverged on the training signal; lower the "
                "excitation rms or the amplitude bounds"
            ) from exc
        steady = resp[SETTLE_PERIODS * N :].reshape(P, N)
        rms_y = np.sqrt(np.mean(steady**2))
        spread = np.max(np.abs(steady - steady.mean(axis=0)))
        if spread > PERIODICITY_TOL * rms_y:
            raise NumericalError(
                f"retained periods differ by {spread:.3e} "
                f"(limit {PERIODICITY_TOL * rms_y:.3e}); not at steady state"
            )
        if params.noise_std > 0:
            rng = np.random.default_rng(seeds[2 + r])
            steady = steady + params.noise_std * rng.standard_normal(steady.shape)
        u[r, :, :, 0] = np.tile(period, P).reshape(P, N)
        y[r, :, :, 0] = steady

    train = DataRecord(
        u=u, y=y, fs=params.fs, excited_lines=signals[0].excited_lines,
        periodic=True,
        meta={
            "system": "duffing",
            "mass": params.mass, "damping": params.damping,
            "alpha": params.alpha, "beta": params.beta,
            "noise_std": params.noise_std, "seed": params.seed,
            "settle_periods": SETTLE_PERIODS, "substeps": substeps,
            "rms": train_config.rms, "grid": train_config.grid,
        },
    )

    k_max = int(signals[0].excited_lines.max())
    keep = np.arange(1, int(round(k_max * val_length / N)) + 1)
    rng_in = np.random.default_rng(seeds[0])
    w = _bandlimited_noise(rng_in, val_length, keep)
    ramp = np.linspace(a_start, a_end, val_length)
    u_val = ramp * w
    try:
        y_val = simulate_duffing(noiseless, u_val, substeps=substeps)
    except DivergenceError as exc:
        raise NumericalError(
            "oscillator diverged on the validation ramp; lower a_end"
        ) from exc
    if params.noise_std > 0:
        rng_out = np.random.default_rng(seeds[1])
        y_val = y_val + params.noise_std * rng_out.standard_normal(val_length)
    val_rec = DataRecord(
        u=u_val[None, None, :, None], y=y_val[None, None, :, None],
        fs=params.fs, periodic=False,
        meta={"system": "duffing", "amplitude_growth": (a_start, a_end)},
    )
    validation = concatenate([val_rec], prepend=0, t2=val_t2)
    validation = replace(validation, meta={
        **validation.meta,
        "system": "duffing",
        "amplitude_growth": (a_start, a_end),
    })
    return train, validation
