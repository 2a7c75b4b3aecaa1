"""Containers for multi-realization, multi-period input/output data.

A :class:`DataRecord` stores raw periodic measurements as a
(realizations, periods, samples, channels) tensor pair. Records are
averaged over periods and concatenated into a single long experiment
before estimation; the concatenation keeps track of which samples are
prepended transient handling and which are masked out of error metrics.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, NumericalError


@dataclass(frozen=True)
class DataRecord:
    """Input/output data on a (R, P, N, channels) grid.

    u : (R, P, N, m) inputs, y : (R, P, N, p) outputs. ``excited_lines``
    is empty for non-periodic data; non-periodic records must have P=1.
    """

    u: np.ndarray
    y: np.ndarray
    fs: float
    excited_lines: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    periodic: bool = True
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if u.ndim != 4 or y.ndim != 4:
            raise ConfigurationError(
                "u and y must be 4-D (realizations, periods, samples, channels)"
            )
        if u.shape[:3] != y.shape[:3]:
            raise ConfigurationError(
                f"u and y disagree on (R, P, N): {u.shape[:3]} vs {y.shape[:3]}"
            )
        if not self.periodic and u.shape[1] != 1:
            raise ConfigurationError("non-periodic records must have exactly one period")
        if not self.fs > 0:
            raise ConfigurationError("fs must be positive")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)
        object.__setattr__(
            self, "excited_lines", np.asarray(self.excited_lines, dtype=int)
        )

    @property
    def n_realizations(self):
        return self.u.shape[0]

    @property
    def n_periods(self):
        return self.u.shape[1]

    @property
    def n_samples(self):
        return self.u.shape[2]

    @property
    def n_inputs(self):
        return self.u.shape[3]

    @property
    def n_outputs(self):
        return self.y.shape[3]


@dataclass(frozen=True)
class ConcatenatedRecord:
    """Several experiments joined end to end with transient bookkeeping.

    ``segment_starts[i]`` is where segment i begins in ``u``/``y``; each
    segment consists of ``t1[0]`` prepended samples followed by the
    original data. The cost mask excludes the prepended samples and the
    first ``t2`` samples of each original segment.
    """

    u: np.ndarray
    y: np.ndarray
    segment_starts: np.ndarray
    t1: tuple
    t2: int
    fs: float
    excited_lines: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    period_length: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        starts = np.asarray(self.segment_starts, dtype=int)
        if starts.size == 0 or starts[0] != 0 or np.any(np.diff(starts) <= 0):
            raise ConfigurationError(
                "segment_starts must be strictly increasing and start at 0"
            )
        object.__setattr__(self, "segment_starts", starts)
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        object.__setattr__(
            self, "excited_lines", np.asarray(self.excited_lines, dtype=int)
        )

    @property
    def n_samples(self):
        return self.u.shape[0]

    @property
    def n_inputs(self):
        return self.u.shape[1]

    @property
    def n_outputs(self):
        return self.y.shape[1]

    @property
    def segment_bounds(self):
        """(start, stop) pairs of the prepend-extended segments."""
        stops = np.append(self.segment_starts[1:], self.n_samples)
        return list(zip(self.segment_starts.tolist(), stops.tolist()))

    def cost_mask(self):
        """Boolean vector, True on samples that count toward error metrics."""
        prepend = self.t1[0]
        mask = np.ones(self.n_samples, dtype=bool)
        for start, stop in self.segment_bounds:
            cut = min(start + prepend + self.t2, stop)
            mask[start:cut] = False
        return mask


def average_periods(rec, discard_first=0):
    """Average a periodic record over its periods, discarding the first few.

    Returns a record with P=1 whose samples are the mean of periods
    ``discard_first``..P-1. Non-periodic data has nothing to average over.
    """
    if not rec.periodic:
        raise ConfigurationError("cannot average periods of a non-periodic record")
    if not isinstance(discard_first, (int, np.integer)) or discard_first < 0:
        raise ConfigurationError("discard_first must be a non-negative integer")
    if discard_first >= rec.n_periods:
        raise ConfigurationError(
            f"discard_first={discard_first} leaves no periods out of {rec.n_periods}"
        )
    u = rec.u[:, discard_first:].mean(axis=1, keepdims=True)
    y = rec.y[:, discard_first:].mean(axis=1, keepdims=True)
    return DataRecord(
        u=u,
        y=y,
        fs=rec.fs,
        excited_lines=rec.excited_lines,
        periodic=rec.periodic,
        meta=dict(rec.meta),
    )


def concatenate(records, prepend=0, t2=0):
    """Join P=1 records end to end, one segment per realization.

    Each segment is prefixed with its own last ``prepend`` samples, which
    is a faithful warm-up only for periodic steady-state data; the cost
    mask excludes those samples and the first ``t2`` samples of each
    original segment.
    """
    if isinstance(records, DataRecord):
        records = [records]
    if len(records) == 0:
        raise ConfigurationError("need at least one record to concatenate")
    if not isinstance(prepend, (int, np.integer)) or prepend < 0:
        raise ConfigurationError("prepend must be a non-negative integer")
    if not isinstance(t2, (int, np.integer)) or t2 < 0:
        raise ConfigurationError("t2 must be a non-negative integer")
    first = records[0]
    for rec in records:
        if rec.n_periods != 1:
            raise ConfigurationError("concatenate expects period-averaged records (P=1)")
        if rec.n_inputs != first.n_inputs or rec.n_outputs != first.n_outputs:
            raise ConfigurationError("records disagree on channel counts")
        if rec.fs != first.fs:
            raise ConfigurationError("records disagree on fs")

    u_parts, y_parts, starts = [], [], []
    offset = 0
    for rec in records:
        n = rec.n_samples
        if prepend > n:
            raise ConfigurationError(
                f"prepend={prepend} exceeds segment length {n}"
            )
        for r in range(rec.n_realizations):
            useg = rec.u[r, 0]
            yseg = rec.y[r, 0]
            if prepend:
                useg = np.concatenate([useg[n - prepend:], useg])
                yseg = np.concatenate([yseg[n - prepend:], yseg])
            starts.append(offset)
            u_parts.append(useg)
            y_parts.append(yseg)
            offset += useg.shape[0]

    starts = np.asarray(starts, dtype=int)
    period_length = first.n_samples if first.periodic else 0
    return ConcatenatedRecord(
        u=np.concatenate(u_parts, axis=0),
        y=np.concatenate(y_parts, axis=0),
        segment_starts=starts,
        t1=(int(prepend), starts.copy()),
        t2=int(t2),
        fs=first.fs,
        excited_lines=first.excited_lines,
        period_length=period_length,
        meta={"n_segments": len(starts)},
    )


@dataclass(frozen=True)
class RelativeError:
    """Relative RMS error per output channel plus a pooled scalar."""

    per_output: np.ndarray
    pooled: float


def relative_rms_error(y_true, y_model, mask=None):
    """rms(y_true - y_model) / rms(y_true), over the masked samples.

    Normalizes by the RMS of ``y_true`` itself (not of its deviation from
    the mean). The pooled value is the root of the mean of the squared
    per-channel errors.
    """
    y_true = np.atleast_2d(np.asarray(y_true, dtype=float))
    y_model = np.atleast_2d(np.asarray(y_model, dtype=float))
    if y_true.ndim == 2 and y_true.shape[0] == 1 and y_true.shape[1] > 1:
        # 1-D inputs arrive as a row; treat them as a single channel
        y_true = y_true.T
        y_model = y_model.T
    if y_true.shape != y_model.shape:
        raise ConfigurationError(
            f"shape mismatch: y_true {y_true.shape} vs y_model {y_model.shape}"
        )
    if mask is None:
        mask = np.ones(y_true.shape[0], dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (y_true.shape[0],):
        raise ConfigurationError("mask must be a boolean vector over samples")
    if not mask.any():
        raise ConfigurationError("mask selects no samples")
    err = y_true[mask] - y_model[mask]
    denom = np.sqrt(np.mean(y_true[mask] ** 2, axis=0))
    if np.any(denom == 0.0):
        raise NumericalError("relative error undefined: reference channel is all zero")
    per_output = np.sqrt(np.mean(err**2, axis=0)) / denom
    return RelativeError(per_output=per_output, pooled=float(np.sqrt(np.mean(per_output**2))))
