"""Random objects of the full-duplex signal model.

Sparse on/off signals, multipath channels, the public codebook, additive
noise, and the circular convolution that ties them together. Every
generator takes an explicit ``numpy.random.Generator`` so that a trial is a
pure function of its seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ParameterError",
    "SparseSignal",
    "Channel",
    "Codebook",
    "NoiseSpec",
    "gen_sparse_signal",
    "gen_channel",
    "gen_codebook",
    "circular_convolve",
    "add_awgn",
    "noise_power_ratio",
    "complex_normal",
]

VALUE_DISTS = ("normal", "real_normal", "uniform")


class ParameterError(ValueError):
    """Raised when an operation receives inconsistent or illegal parameters."""


def complex_normal(rng: np.random.Generator, size, scale: float = 1.0) -> np.ndarray:
    """Circular complex Gaussian samples with ``E|z|^2 = scale**2``."""
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return (re + 1j * im) * (scale / np.sqrt(2.0))


def _nonzero(draw, rng, size):
    # exact zeros have probability zero but would break the support invariant
    vals = draw(rng, size)
    bad = vals == 0
    while np.any(bad):
        vals[bad] = draw(rng, int(bad.sum()))
        bad = vals == 0
    return vals


def _draw_values(value_dist: str, rng, size) -> np.ndarray:
    if value_dist == "normal":
        return _nonzero(lambda r, m: complex_normal(r, m), rng, size)
    if value_dist == "real_normal":
        return _nonzero(lambda r, m: r.standard_normal(m), rng, size)
    if value_dist == "uniform":
        # numpy draws from [0, 1); reflect to (0, 1]
        return _nonzero(lambda r, m: 1.0 - r.random(m), rng, size)
    raise ParameterError(f"unknown value distribution {value_dist!r}")


@dataclass(frozen=True)
class SparseSignal:
    """A k-sparse vector given by its support and nonzero values."""

    n: int
    support: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        values = np.asarray(self.values)
        if support.shape != values.shape or support.ndim != 1:
            raise ParameterError("support and values must be 1-D and aligned")
        if len(np.unique(support)) != len(support):
            raise ParameterError("support indices must be distinct")
        if len(support) and (support.min() < 0 or support.max() >= self.n):
            raise ParameterError("support index out of range")
        if np.any(values == 0):
            raise ParameterError("sparse signal values must be nonzero")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    @property
    def k(self) -> int:
        return len(self.support)

    def dense(self) -> np.ndarray:
        x = np.zeros(self.n, dtype=np.result_type(self.values, np.float64))
        x[self.support] = self.values
        return x

    @classmethod
    def from_dense(cls, x) -> "SparseSignal":
        x = np.asarray(x)
        idx = np.flatnonzero(x)
        return cls(len(x), idx, x[idx])


@dataclass(frozen=True)
class Channel:
    """An s-path channel impulse response of length ``mu``."""

    mu: int
    support: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        if len(np.unique(support)) != len(support) or len(support) > self.mu:
            raise ParameterError("channel support must be distinct indices in [0, mu)")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=complex))

    @property
    def s(self) -> int:
        return len(self.support)

    def dense(self) -> np.ndarray:
        h = np.zeros(self.mu, dtype=complex)
        h[self.support] = self.gains
        return h


@dataclass(frozen=True)
class Codebook:
    """Public coding matrix ``Q`` of shape ``(mu, n)``."""

    matrix: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.matrix)
        if Q.ndim != 2:
            raise ParameterError("codebook must be a matrix")
        if Q.shape[0] > Q.shape[1]:
            raise ParameterError(f"codebook needs mu <= n, got shape {Q.shape}")
        if not np.all(np.isfinite(Q)):
            raise ParameterError("codebook entries must be finite")
        object.__setattr__(self, "matrix", Q)

    @property
    def mu(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    """Noise level in dB; ``inf`` means noiseless.

    ``kind`` is ``"measurement"`` for receiver noise or ``"channel"`` for the
    deviation of the eavesdropper's channels from the reciprocal one.
    """

    snr_db: float = np.inf
    kind: str = "measurement"
    convention: str = "power"

    def __post_init__(self):
        if np.isnan(self.snr_db) or self.snr_db == -np.inf:
            raise ParameterError("snr_db must be finite or +inf")
        if self.kind not in ("measurement", "channel"):
            raise ParameterError(f"unknown noise kind {self.kind!r}")

    @property
    def noiseless(self) -> bool:
        return self.snr_db == np.inf

    @property
    def power_ratio(self) -> float:
        """Noise-to-signal power ratio implied by ``snr_db``."""
        return noise_power_ratio(self.snr_db, self.convention)


def gen_sparse_signal(n: int, k: int, value_dist: str = "normal",
                      rng: np.random.Generator | None = None) -> SparseSignal:
    """Draw a k-sparse signal with uniformly random support.

    ``value_dist`` is ``"normal"`` (standard circular complex normal),
    ``"real_normal"`` or ``"uniform"`` on (0, 1].
    """
    if not 0 < k <= n:
        raise ParameterError(f"need 0 < k <= n, got k={k}, n={n}")
    rng = np.random.default_rng() if rng is None else rng
    support = np.sort(rng.choice(n, size=k, replace=False))
    return SparseSignal(n, support, _draw_values(value_dist, rng, k))


def gen_channel(mu: int, s: int, rng: np.random.Generator | None = None) -> Channel:
    """Draw an s-path channel with complex Gaussian gains at distinct taps."""
    if not 0 < s <= mu:
        raise ParameterError(f"need 0 < s <= mu, got s={s}, mu={mu}")
    rng = np.random.default_rng() if rng is None else rng
    support = np.sort(rng.choice(mu, size=s, replace=False))
    gains = _nonzero(lambda r, m: complex_normal(r, m), rng, s)
    return Channel(mu, support, gains)


def gen_codebook(mu: int, n: int, rng: np.random.Generator | None = None,
                 complex_valued: bool = True) -> Codebook:
    """I.i.d. Gaussian codebook with per-entry variance ``1/mu``."""
    if mu > n or mu < 1:
        raise ParameterError(f"need 1 <= mu <= n, got mu={mu}, n={n}")
    rng = np.random.default_rng() if rng is None else rng
    scale = 1.0 / np.sqrt(mu)
    if complex_valued:
        Q = complex_normal(rng, (mu, n), scale)
    else:
        Q = rng.standard_normal((mu, n)) * scale
    return Codebook(Q)


def circular_convolve(a, b) -> np.ndarray:
    """Circular convolution ``(a*b)_i = sum_j a_j b_{(i-j) mod N}`` via FFT."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ParameterError(f"length mismatch: {a.shape} vs {b.shape}")
    return np.fft.ifft(np.fft.fft(a) * np.fft.fft(b))


def noise_power_ratio(snr_db: float, convention: str = "power") -> float:
    """Noise-to-signal power ratio for a nominal SNR.

    ``"power"`` is the usual ``10**(-snr/10)``. ``"amplitude"`` reads the
    nominal value as an amplitude scale: a unit-SNR noise vector multiplied by
    ``10**(-snr/10)``, so the power ratio is ``10**(-snr/5)``.
    """
    if convention == "power":
        return 10.0 ** (-snr_db / 10.0)
    if convention == "amplitude":
        return 10.0 ** (-snr_db / 5.0)
    raise ParameterError(f"unknown SNR convention {convention!r}")


def add_awgn(x, snr_db: float, rng: np.random.Generator | None = None,
             convention: str = "power") -> np.ndarray:
    """Add circular complex Gaussian noise at ``snr_db`` relative to ``||x||^2``."""
    x = np.asarray(x)
    if snr_db == np.inf:
        return x.copy()
    energy = float(np.vdot(x, x).real)
    if energy == 0.0:
        raise ParameterError("cannot set an SNR against a zero signal")
    rng = np.random.default_rng() if rng is None else rng
    noise_var = energy / x.size * noise_power_ratio(snr_db, convention)
    return x + complex_normal(rng, x.shape, np.sqrt(noise_var))
