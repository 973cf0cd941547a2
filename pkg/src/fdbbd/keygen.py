"""Shared-secret computation and the round-based key agreement protocol.

Each party recovers ``h (x) beta_other`` by HiHTP, then multiplies its DFT
with the DFT of its own upsampled signal. By the identity
``vec(h (x) beta) = h_up * beta_up`` both products equal
``DFT(h_up) DFT(beta_A_up) DFT(beta_B_up)``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import matmul_toeplitz
from scipy.special import comb

from .hihtp import HihtpConfig, NumericalDivergence, solve
from .lifting import MeasurementOp, lift, vec
from .signals import (
    ParameterError,
    SparseSignal,
    add_awgn,
    circular_convolve,
    gen_channel,
    gen_codebook,
    gen_sparse_signal,
)

__all__ = [
    "DegenerateSecret",
    "Secret",
    "KeyMaterial",
    "ProtocolConfig",
    "upsample_h",
    "upsample_beta",
    "tensor_vec_identity_check",
    "compute_secret",
    "true_secret",
    "normalize_secret",
    "normalize_unit_interval",
    "rmse",
    "quantize",
    "hash_key",
    "derive_key",
    "run_protocol",
    "support_entropy_bits",
    "transcript_json",
]

HASH_FAMILIES = ("toeplitz", "multiply_shift", "shake256")
DEFAULT_HASH_SEED = 0x5EC12E7


class DegenerateSecret(ValueError):
    """The secret vanished and cannot be normalised."""


@dataclass(frozen=True)
class Secret:
    c: np.ndarray
    round_index: int = 0

    def __post_init__(self):
        c = np.asarray(self.c, dtype=complex)
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ParameterError("secret must be a finite 1-D vector")
        object.__setattr__(self, "c", c)


@dataclass(frozen=True)
class KeyMaterial:
    bits: np.ndarray
    key: np.ndarray
    theta: int
    m: int
    family: str
    clip: float


@dataclass(frozen=True)
class ProtocolConfig:
    n: int = 128
    mu: int = 100
    k: int = 4
    s: int = 4
    m: int = 1
    snr_db: float = np.inf
    value_dist: str = "normal"
    hihtp: HihtpConfig | None = None
    theta: int = 8
    key_len: int = 128
    static_channel: bool = False
    hash_family: str = "toeplitz"
    hash_seed: int = DEFAULT_HASH_SEED
    snr_convention: str = "power"

    def __post_init__(self):
        if self.mu > self.n:
            raise ParameterError("need mu <= n")
        if not (0 < self.k <= self.n and 0 < self.s <= self.mu):
            raise ParameterError("sparsity out of range")
        if self.m < 1:
            raise ParameterError("need at least one round")
        if self.theta < 2 or self.theta % 2:
            raise ParameterError("theta must be even and >= 2")
        if self.hihtp is None:
            object.__setattr__(self, "hihtp", HihtpConfig(self.s, self.k))


def upsample_h(h, n: int) -> np.ndarray:
    """Zero-pad ``h`` from length ``mu`` to ``n*mu``."""
    h = np.asarray(h)
    out = np.zeros(h.size * n, dtype=np.result_type(h, complex))
    out[: h.size] = h
    return out


def upsample_beta(beta, mu: int) -> np.ndarray:
    """Spread ``beta`` to stride ``mu`` in length ``n*mu``."""
    beta = np.asarray(beta)
    out = np.zeros(beta.size * mu, dtype=np.result_type(beta, complex))
    out[::mu] = beta
    return out


def tensor_vec_identity_check(h, beta, rtol: float = 1e-11) -> bool:
    """Check ``vec(h (x) beta) == h_up * beta_up`` numerically."""
    h = np.asarray(h)
    beta = np.asarray(beta)
    lhs = vec(lift(h, beta))
    rhs = circular_convolve(upsample_h(h, beta.size), upsample_beta(beta, h.size))
    scale = max(np.linalg.norm(lhs), np.finfo(float).tiny)
    return bool(np.linalg.norm(lhs - rhs) <= rtol * scale)


def compute_secret(recovered, own_beta, round_index: int = 0) -> Secret:
    """``DFT(vec(recovered)) * DFT(vec(e_0 (x) own_beta))``."""
    W = np.asarray(recovered)
    beta = own_beta.dense() if isinstance(own_beta, SparseSignal) else np.asarray(own_beta)
    mu, n = W.shape
    if beta.shape != (n,):
        raise ParameterError(f"own signal length {beta.shape} does not match tensor {W.shape}")
    c = np.fft.fft(vec(W)) * np.fft.fft(upsample_beta(beta, mu))
    return Secret(c, round_index)


def true_secret(h, beta_a, beta_b) -> np.ndarray:
    """Three-factor form ``DFT(h_up) DFT(beta_a_up) DFT(beta_b_up)``."""
    h, beta_a, beta_b = (np.asarray(v) for v in (h, beta_a, beta_b))
    mu, n = h.size, beta_a.size
    return (np.fft.fft(upsample_h(h, n)) * np.fft.fft(upsample_beta(beta_a, mu))
            * np.fft.fft(upsample_beta(beta_b, mu)))


def normalize_secret(c) -> np.ndarray:
    c = np.asarray(c.c if isinstance(c, Secret) else c)
    nrm = np.linalg.norm(c)
    if nrm == 0:
        raise DegenerateSecret("secret is the zero vector")
    return c / nrm


def normalize_unit_interval(c) -> np.ndarray:
    """Min-max map of ``|c|`` onto [0, 1]; the scale the simulation figures use."""
    mag = np.abs(np.asarray(c.c if isinstance(c, Secret) else c))
    lo, hi = mag.min(), mag.max()
    if hi == lo:
        raise DegenerateSecret("secret has constant magnitude")
    return (mag - lo) / (hi - lo)


def rmse(c1, c2) -> float:
    c1 = np.asarray(c1)
    c2 = np.asarray(c2)
    if c1.shape != c2.shape:
        raise ParameterError("length mismatch")
    return float(np.sqrt(np.mean(np.abs(c1 - c2) ** 2)))


def quantize(c, theta: int, clip: float | None = None):
    """Uniform scalar quantiser: ``theta/2`` bits for each of Re and Im.

    Values are clipped to ``[-clip, clip]``; by default ``clip`` is three
    times the empirical per-component standard deviation.

    Returns
    -------
    (ndarray of uint8, float)
        Bits (MSB first, Re before Im per entry) and the clip level used.
    """
    c = np.asarray(c)
    if theta < 2 or theta % 2:
        raise ParameterError("theta must be even and >= 2")
    if not np.all(np.isfinite(c)):
        raise ParameterError("cannot quantise non-finite values")
    comps = np.stack([c.real, c.imag], axis=-1).ravel()
    if clip is None:
        sd = float(np.sqrt(np.mean(comps**2))) if comps.size else 0.0
        clip = 3.0 * sd if sd > 0 else 1.0
    b = theta // 2
    levels = 1 << b
    idx = np.floor((np.clip(comps, -clip, clip) + clip) / (2 * clip) * levels)
    idx = np.minimum(idx, levels - 1).astype(np.int64)
    shifts = np.arange(b - 1, -1, -1)
    bits = ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8).ravel()
    return bits, float(clip)


def _toeplitz_hash(bits, key_len, rng):
    n_in = bits.size
    col = rng.integers(0, 2, key_len)
    row = rng.integers(0, 2, n_in)
    row[0] = col[0]
    prod = matmul_toeplitz((col.astype(float), row.astype(float)), bits.astype(float))
    return (np.rint(prod).astype(np.int64) & 1).astype(np.uint8)


def _multiply_shift_hash(bits, key_len, rng):
    # h(x) = ((sum_i a_i x_i + b) mod 2^128) >> 64 over 64-bit words
    padded = np.concatenate([bits, np.zeros((-bits.size) % 64, dtype=np.uint8)])
    words = [int.from_bytes(np.packbits(w).tobytes(), "big") for w in padded.reshape(-1, 64)]
    mask = (1 << 128) - 1
    out = []
    for _ in range(-(-key_len // 64)):
        a = rng.integers(0, 2**63, size=(len(words), 2)).tolist()
        b = int.from_bytes(rng.bytes(16), "big")
        acc = b
        for (hi, lo), w in zip(a, words):
            acc = (acc + ((hi << 65) | (lo << 1) | 1) * w) & mask
        out.append(acc >> 64)
    raw = np.unpackbits(np.frombuffer(b"".join(v.to_bytes(8, "big") for v in out), dtype=np.uint8))
    return raw[:key_len]


def hash_key(bits, key_len: int, family: str = "toeplitz", seed: int = DEFAULT_HASH_SEED):
    """Compress ``bits`` to ``key_len`` bits with a seeded hash family.

    ``toeplitz`` (default) and ``multiply_shift`` are universal families whose
    member is selected by ``seed``; ``shake256`` is a keyed cryptographic hash.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if key_len > bits.size:
        raise ParameterError("key_len exceeds the number of input bits")
    if key_len == 0:
        return np.zeros(0, dtype=np.uint8)
    if family == "toeplitz":
        return _toeplitz_hash(bits, key_len, np.random.default_rng(seed))
    if family == "multiply_shift":
        return _multiply_shift_hash(bits, key_len, np.random.default_rng(seed))
    if family == "shake256":
        h = hashlib.shake_256(seed.to_bytes(8, "big") + np.packbits(bits).tobytes()
                              + bits.size.to_bytes(8, "big"))
        return np.unpackbits(np.frombuffer(h.digest(-(-key_len // 8)), dtype=np.uint8))[:key_len]
    raise ParameterError(f"unknown hash family {family!r}")


def derive_key(secrets, theta: int, key_len: int, family: str = "toeplitz",
               seed: int = DEFAULT_HASH_SEED) -> KeyMaterial:
    """Normalise each round's secret, concatenate, quantise and hash."""
    secrets = list(secrets)
    c = np.concatenate([normalize_secret(s) for s in secrets])
    bits, clip = quantize(c, theta)
    key = hash_key(bits, key_len, family, seed)
    return KeyMaterial(bits, key, theta, len(secrets), family, clip)


def support_entropy_bits(n: int, k: int) -> dict:
    """Support entropy per signal and the headline ``log2 C(2k, k)`` count."""
    return {
        "support_bits": float(np.log2(comb(n, k, exact=True))),
        "partition_bits": float(np.log2(comb(2 * k, k, exact=True))),
    }


def run_protocol(cfg: ProtocolConfig, rng: np.random.Generator | int | None = None) -> dict:
    """Simulate ``cfg.m`` full-duplex rounds between Alice and Bob.

    Returns a dict with both keys, per-round metrics and a JSON-ready
    transcript. Key disagreement under noise is reported, never corrected.
    """
    rng = np.random.default_rng(rng)
    Q = gen_codebook(cfg.mu, cfg.n, rng)
    op = MeasurementOp(Q)
    h_static = gen_channel(cfg.mu, cfg.s, rng) if cfg.static_channel else None
    alice, bob, transcripts = [], [], []
    rmse_l2, rmse_unit = [], []
    for r in range(cfg.m):
        h = (h_static or gen_channel(cfg.mu, cfg.s, rng)).dense()
        beta_a = gen_sparse_signal(cfg.n, cfg.k, cfg.value_dist, rng)
        beta_b = gen_sparse_signal(cfg.n, cfg.k, cfg.value_dist, rng)
        y_a = add_awgn(op.rank_one(h, beta_b.dense()), cfg.snr_db, rng, cfg.snr_convention)
        y_b = add_awgn(op.rank_one(h, beta_a.dense()), cfg.snr_db, rng, cfg.snr_convention)
        try:
            res_a = solve(op, y_a, cfg.hihtp)
            res_b = solve(op, y_b, cfg.hihtp)
        except NumericalDivergence as exc:
            raise NumericalDivergence(exc.iteration, f"round {r}: solver diverged") from exc
        c_a = compute_secret(res_a.tensor, beta_a, r)
        c_b = compute_secret(res_b.tensor, beta_b, r)
        alice.append(c_a)
        bob.append(c_b)
        try:
            e2 = rmse(normalize_secret(c_a), normalize_secret(c_b))
            e1 = rmse(normalize_unit_interval(c_a), normalize_unit_interval(c_b))
        except DegenerateSecret:
            e2 = e1 = float("nan")
        rmse_l2.append(e2)
        rmse_unit.append(e1)
        transcripts.append({
            "round": r,
            "rmse": e1,
            "rmse_l2": e2,
            "residual_alice": res_a.residual,
            "residual_bob": res_b.residual,
            "iterations_alice": res_a.iterations,
            "iterations_bob": res_b.iterations,
            "converged": res_a.converged and res_b.converged,
        })
    try:
        key_a = derive_key(alice, cfg.theta, cfg.key_len, cfg.hash_family, cfg.hash_seed)
        key_b = derive_key(bob, cfg.theta, cfg.key_len, cfg.hash_family, cfg.hash_seed)
        agree = bool(np.array_equal(key_a.key, key_b.key))
    except DegenerateSecret:
        key_a = key_b = None
        agree = False
    for t in transcripts:
        t["key_agreement"] = agree
    return {
        "alice_key": key_a,
        "bob_key": key_b,
        "alice_secrets": alice,
        "bob_secrets": bob,
        "per_round_rmse": rmse_unit,
        "per_round_rmse_l2": rmse_l2,
        "key_agreement": agree,
        "transcripts": transcripts,
        "info": support_entropy_bits(cfg.n, cfg.k),
    }


def transcript_json(result: dict, seed, cfg: ProtocolConfig) -> str:
    """One JSON record per round with the parameters echoed."""
    params = {k: v for k, v in asdict(cfg).items() if k != "hihtp"}
    params["snr_db"] = None if cfg.snr_db == np.inf else cfg.snr_db
    rows = [dict(seed=seed, params=params, **t) for t in result["transcripts"]]
    return json.dumps(rows, indent=1)
