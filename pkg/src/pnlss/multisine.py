"""Random-phase multisine excitation on full, odd, and random-odd grids."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError
from .validation import (
    check_in_unit_interval,
    check_positive,
    check_positive_int,
)

GRIDS = ("full", "odd", "random-odd")

#: PRNG recorded in signal metadata; realization r uses the child seed
#: spawned at index r+1, child 0 drives the detection-line draw.
PRNG_NAME = "numpy-pcg64"


@dataclass(frozen=True)
class MultisineConfig:
    """Design of a periodic random-phase multisine.

    ``n_samples`` is the samples-per-period N; the excited band runs from
    line 1 up to ``floor(f_max_ratio * N / 2)``, always excluding DC and
    Nyquist. ``grid`` selects all lines ("full"), odd lines only ("odd"),
    or odd lines with one detection line removed per consecutive group of
    ``group_size`` odd lines ("random-odd").
    """

    n_samples: int
    fs: float
    grid: str = "odd"
    group_size: int = 4
    f_max_ratio: float = 0.9
    realizations: int = 1
    periods: int = 1
    rms: float = 1.0
    seed: int = 0

    def __post_init__(self):
        check_positive_int(self.n_samples, "n_samples")
        check_positive(self.fs, "fs")
        if self.grid not in GRIDS:
            raise ConfigurationError(f"grid must be one of {GRIDS}, got {self.grid!r}")
        if self.grid == "random-odd" and (
            not isinstance(self.group_size, int) or self.group_size < 2
        ):
            raise ConfigurationError("group_size must be an integer >= 2")
        check_in_unit_interval(self.f_max_ratio, "f_max_ratio")
        check_positive_int(self.realizations, "realizations")
        check_positive_int(self.periods, "periods")
        check_positive(self.rms, "rms")
        if not isinstance(self.seed, (int, np.integer)):
            raise ConfigurationError("seed must be an integer")


@dataclass(frozen=True)
class ExcitationSignal:
    """One multisine realization: P identical periods of N samples."""

    samples: np.ndarray
    excited_lines: np.ndarray
    phases: np.ndarray
    amplitude: float
    n_samples: int
    fs: float
    meta: dict = field(default_factory=dict, compare=False)


def excited_line_set(config):
    """Sorted excited line indices for ``config``; deterministic in the seed."""
    half = config.n_samples // 2
    k_max = int(np.floor(config.f_max_ratio * config.n_samples / 2))
    # DC and the Nyquist line are never excited
    k_max = min(k_max, (config.n_samples - 1) // 2 if config.n_samples % 2 else half - 1)
    if config.grid == "full":
        lines = np.arange(1, k_max + 1)
    else:
        lines = np.arange(1, k_max + 1, 2)
        if config.grid == "random-odd":
            lines = _drop_detection_lines(lines, config)
    if lines.size == 0:
        raise ConfigurationError(
            f"no excitable lines: f_max_ratio={config.f_max_ratio} is too small "
            f"for n_samples={config.n_samples}"
        )
    return lines


def _drop_detection_lines(odd_lines, config):
    # one uniformly chosen line is removed from every complete group of
    # group_size consecutive odd lines; a trailing partial group keeps all
    # its lines
    rng = np.random.default_rng(_line_seed(config.seed))
    keep = np.ones(odd_lines.size, dtype=bool)
    g = config.group_size
    for start in range(0, odd_lines.size - g + 1, g):
        keep[start + rng.integers(g)] = False
    return odd_lines[keep]


def _line_seed(seed):
    return np.random.SeedSequence(seed).spawn(1)[0]


def generate_multisine(config):
    """Generate ``config.realizations`` independent multisine realizations.

    Each realization draws its phases uniformly on [0, 2*pi) from its own
    deterministic child seed, carries a flat amplitude on the excited lines
    scaled so the time-domain RMS equals ``config.rms``, and repeats one
    synthesized period ``config.periods`` times, so the output is exactly
    N-periodic and exactly zero (to round-off) at non-excited lines.
    """
    lines = excited_line_set(config)
    n = config.n_samples
    seeds = np.random.SeedSequence(config.seed).spawn(config.realizations + 1)
    signals = []
    for r in range(config.realizations):
        rng = np.random.default_rng(seeds[r + 1])
        phases = rng.uniform(0.0, 2.0 * np.pi, size=lines.size)
        amplitude = config.rms * np.sqrt(2.0 / lines.size)
        spectrum = np.zeros(n // 2 + 1, dtype=complex)
        # A*sin(2*pi*k*t/N + phi) synthesized through the inverse DFT
        spectrum[lines] = (n / 2.0) * amplitude * np.exp(1j * (phases - np.pi / 2.0))
        period = np.fft.irfft(spectrum, n=n)
        measured = np.sqrt(np.mean(period**2))
        scale = config.rms / measured
        period = period * scale
        amplitude = amplitude * scale
        signals.append(
            ExcitationSignal(
                samples=np.tile(period, config.periods),
                excited_lines=lines.copy(),
                phases=phases,
                amplitude=float(amplitude),
                n_samples=n,
                fs=config.fs,
                meta={"prng": PRNG_NAME, "realization": r, "seed": config.seed},
            )
        )
    return signals
