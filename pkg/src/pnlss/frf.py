"""Nonparametric frequency response estimation from periodic data.

Implements the robust averaging scheme for multi-realization, multi-period
multisine measurements: the frequency response function is averaged over
periods within each realization and then over realizations, which splits
the residual variability into a noise covariance (period-to-period) and a
total covariance (realization-to-realization) that also captures stochastic
nonlinear distortions. All spectra use the plain unnormalized forward DFT.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import ConfigurationError

#: excited input lines whose magnitude falls below RELATIVE_INPUT_FLOOR
#: times rms(u) times N are dropped from the estimate and reported in meta
RELATIVE_INPUT_FLOOR = 1e-12


@dataclass(frozen=True)
class FrfEstimate:
    """Averaged FRF with noise and total distortion covariances.

    G has shape (L, p, m). Both covariances are (L, p*m, p*m) Hermitian
    PSD matrices of the vectorized (row-major) FRF at each line: covGn
    reflects period-to-period noise only, covGML also includes the
    realization-to-realization variability caused by nonlinear distortion.
    Covariances quantify the uncertainty of the final mean G.
    """

    lines: np.ndarray
    G: np.ndarray
    covGML: np.ndarray
    covGn: np.ndarray
    dof: tuple
    n_samples: int
    fs: float
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_outputs(self):
        return self.G.shape[1]

    @property
    def n_inputs(self):
        return self.G.shape[2]


class LineClass(Enum):
    """Label of a spectral line in an odd-multisine distortion analysis."""

    EXCITED_ODD = "excited-odd"
    UNEXCITED_ODD = "unexcited-odd"
    UNEXCITED_EVEN = "unexcited-even"


@dataclass(frozen=True)
class DistortionSpectrum:
    """Per-line output level with odd/even nonlinearity labels."""

    lines: np.ndarray
    line_class: list
    level: np.ndarray


def _exact_mean(a):
    """Mean over axis 0 with exactly rounded accumulation.

    Exact rounding makes the reduction independent of the order of the
    entries, so estimates do not change when realizations are permuted.
    """
    a = np.asarray(a)
    flat = a.reshape(a.shape[0], -1)
    cols = flat.shape[1]
    if np.iscomplexobj(a):
        out = np.empty(cols, dtype=complex)
        for j in range(cols):
            out[j] = math.fsum(flat[:, j].real) + 1j * math.fsum(flat[:, j].imag)
    else:
        out = np.empty(cols, dtype=float)
        for j in range(cols):
            out[j] = math.fsum(flat[:, j])
    return (out / a.shape[0]).reshape(a.shape[1:])


def _sample_cov(x, mean):
    """Sample covariance (ddof=1) of vectors x: (n, d) around ``mean``.

    Accumulated with exact rounding so the result does not depend on the
    order of the rows (see _exact_mean).
    """
    d = x - mean
    n, dim = d.shape
    out = np.empty((dim, dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            prods = d[:, i] * d[:, j].conj()
            out[i, j] = math.fsum(prods.real) + 1j * math.fsum(prods.imag)
    return out / (n - 1)


def _hermitize(c):
    return 0.5 * (c + np.conj(np.swapaxes(c, -1, -2)))


def estimate_bla(rec):
    """Best linear approximation of a periodic single-input record.

    Per realization the FRF is the period-averaged ratio Y(k)/U(k) on the
    excited lines; the overall G averages those over realizations. The
    returned covariances are those of the mean: covGn from within-realization
    period scatter divided by R*P, covGML from between-realization scatter
    divided by R.
    """
    if not rec.periodic:
        raise ConfigurationError("robust FRF estimation needs periodic data")
    if rec.excited_lines.size == 0:
        raise ConfigurationError("record has no excited lines")
    R, P = rec.n_realizations, rec.n_periods
    if R < 2 or P < 2:
        raise ConfigurationError(
            f"need at least 2 realizations and 2 periods, got R={R}, P={P}"
        )
    m, p = rec.n_inputs, rec.n_outputs
    if m != 1:
        raise ConfigurationError(
            "multi-input records need multiple experiments per realization "
            "block, which is not supported; expected m=1"
        )
    n = rec.n_samples
    lines = np.asarray(rec.excited_lines, dtype=int)

    # (R, P, L, channels) spectra on the excited lines
    U = np.fft.fft(rec.u, axis=2)[:, :, lines, :]
    Y = np.fft.fft(rec.y, axis=2)[:, :, lines, :]

    u_rms = np.sqrt(np.mean(rec.u**2))
    floor = RELATIVE_INPUT_FLOOR * u_rms * n
    weak = np.min(np.abs(U[..., 0]), axis=(0, 1)) < floor
    excluded = lines[weak]
    if weak.any():
        lines = lines[~weak]
        U = U[:, :, ~weak, :]
        Y = Y[:, :, ~weak, :]
    if lines.size == 0:
        raise ConfigurationError("all excited lines fell below the input floor")

    # per-period FRF, shape (R, P, L, p); m=1 so the input spectrum is scalar
    G_rp = Y / U[..., :1]
    G_r = G_rp.mean(axis=1)
    G = _exact_mean(G_r)

    L = lines.size
    covGn = np.empty((L, p * m, p * m), dtype=complex)
    covGML = np.empty((L, p * m, p * m), dtype=complex)
    for k in range(L):
        per_real = np.stack(
            [_sample_cov(G_rp[r, :, k, :].reshape(P, -1), G_r[r, k].reshape(-1)) for r in range(R)]
        )
        covGn[k] = _exact_mean(per_real) / (R * P)
        covGML[k] = _sample_cov(G_r[:, k, :].reshape(R, -1), G[k].reshape(-1)) / R
    return FrfEstimate(
        lines=lines,
        G=G.reshape(L, p, m),
        covGML=_hermitize(covGML),
        covGn=_hermitize(covGn),
        dof=(R, P),
        n_samples=n,
        fs=rec.fs,
        meta={"excluded_lines": excluded},
    )


def output_noise_covariance(rec, lines=None):
    """Noise covariance of the period-averaged output spectrum.

    For each line the sample covariance of the per-period output spectra
    is divided by P (covariance of the mean) and averaged over
    realizations. Shape (L, p, p).
    """
    if rec.n_periods < 2:
        raise ConfigurationError("noise is not identifiable from a single period")
    if lines is None:
        if rec.excited_lines.size:
            lines = rec.excited_lines
        else:
            lines = np.arange(1, (rec.n_samples - 1) // 2 + 1)
    lines = np.asarray(lines, dtype=int)
    Y = np.fft.fft(rec.y, axis=2)[:, :, lines, :]
    R, P = rec.n_realizations, rec.n_periods
    Ym = Y.mean(axis=1)
    per_real = np.empty((R, lines.size, rec.n_outputs, rec.n_outputs), dtype=complex)
    for r in range(R):
        for k in range(lines.size):
            per_real[r, k] = _sample_cov(Y[r, :, k, :], Ym[r, k]) / P
    return _hermitize(_exact_mean(per_real))


def classify_distortions(rec):
    """Label output lines as excited, odd-distortion, or even-distortion.

    Requires an odd multisine with detection gaps: every excited line odd,
    and at least one odd line inside the band left unexcited. The level is
    the magnitude of the period-averaged output spectrum, averaged over
    realizations, for all lines from 1 up to the highest excited line.
    """
    if not rec.periodic:
        raise ConfigurationError("distortion analysis needs periodic data")
    excited = np.asarray(rec.excited_lines, dtype=int)
    if excited.size == 0:
        raise ConfigurationError("record has no excited lines")
    if np.any(excited % 2 == 0):
        raise ConfigurationError(
            "distortion analysis needs an odd multisine with detection lines; "
            "found even excited lines"
        )
    band = np.arange(1, excited.max() + 1)
    excited_set = set(excited.tolist())
    detection = [k for k in band if k % 2 == 1 and k not in excited_set]
    if not detection:
        raise ConfigurationError(
            "distortion analysis needs unexcited odd detection lines inside the band"
        )
    Y = np.fft.fft(rec.y, axis=2)[:, :, band, :]
    level = np.abs(Y.mean(axis=1)).mean(axis=0).mean(axis=-1)
    classes = []
    for k in band:
        if k in excited_set:
            classes.append(LineClass.EXCITED_ODD)
        elif k % 2 == 1:
            classes.append(LineClass.UNEXCITED_ODD)
        else:
            classes.append(LineClass.UNEXCITED_EVEN)
    return DistortionSpectrum(lines=band, line_class=classes, level=level)
