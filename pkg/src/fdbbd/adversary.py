"""Passive eavesdropper: observation models and the peak-sorting attack.

Eve's channels are scaled, slightly perturbed copies of the reciprocal
channel, so she receives ``h * Q(beta_A + gamma beta_B)`` plus deviation and
measurement noise. The attack recovers the superposed tensor with sparsity
``(s, 2k)``, factors it by a rank-one SVD and splits the ``2k`` peaks by
magnitude.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .hihtp import HihtpConfig, solve
from .keygen import normalize_secret, rmse, true_secret
from .lifting import MeasurementOp, lift
from .signals import Channel, ParameterError, add_awgn, complex_normal, noise_power_ratio

__all__ = [
    "CHANNEL_MODES",
    "EveParams",
    "AttackReport",
    "deviation_std",
    "eve_observe",
    "eve_oracle_observe",
    "rank_one_factor",
    "split_peaks",
    "align_phase",
    "attack_success",
    "eve_attack",
]

log = logging.getLogger(__name__)

CHANNEL_MODES = ("identical", "one-deviated", "both-deviated")
SUCCESS_TOL = 1e-4


@dataclass(frozen=True)
class EveParams:
    gamma: float = 1.0
    varsigma: float = 0.0
    snr_db: float = np.inf
    channel_mode: str = "identical"
    snr_convention: str = "power"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError("gamma must be positive")
        if self.varsigma < 0:
            raise ParameterError("varsigma must be non-negative")
        if self.channel_mode not in CHANNEL_MODES:
            raise ParameterError(f"unknown channel mode {self.channel_mode!r}")


@dataclass
class AttackReport:
    recovered_secret: np.ndarray
    rmse_to_alice: float
    rmse_to_bob: float
    success: bool
    support_correct: bool
    max_deviation: float = np.nan
    mse_to_true: float = np.nan

    def to_row(self) -> dict:
        row = asdict(self)
        row.pop("recovered_secret")
        return row


def deviation_std(h, snr_db: float, convention: str = "power") -> float:
    """Per-tap deviation std so that ``||h||^2 / E||n||^2`` equals ``snr_db``."""
    h = np.asarray(h)
    if snr_db == np.inf:
        return 0.0
    s = np.count_nonzero(h)
    return float(np.sqrt(np.vdot(h, h).real / s * noise_power_ratio(snr_db, convention)))


def _deviations(h, params: EveParams, rng):
    supp = np.flatnonzero(h)
    n_a = np.zeros_like(h, dtype=complex)
    n_b = np.zeros_like(h, dtype=complex)
    if params.varsigma > 0:
        if params.channel_mode == "both-deviated":
            n_a[supp] = complex_normal(rng, supp.size, params.varsigma)
        if params.channel_mode != "identical":
            n_b[supp] = complex_normal(rng, supp.size, params.varsigma)
    return n_a, n_b


def _dense(v):
    return v.dense() if hasattr(v, "dense") else np.asarray(v)


def eve_observe(h_ab, Q, beta_a, beta_b, params: EveParams, rng=None):
    """Eve's measurement ``h*Q(bA + g bB) + nA*Q bA + nB*Q bB + nE``.

    Returns the measurement and the two eavesdropper channels
    ``(y_E, h_AE, h_BE)`` with ``h_AE = h + nA`` and ``h_BE = g h + nB``.
    """
    rng = np.random.default_rng(rng)
    h = _dense(h_ab) if isinstance(h_ab, Channel) else np.asarray(h_ab, dtype=complex)
    op = Q if isinstance(Q, MeasurementOp) else MeasurementOp(Q)
    a, b = _dense(beta_a), _dense(beta_b)
    if h.shape != (op.mu,) or a.shape != (op.n,) or b.shape != (op.n,):
        raise ParameterError("dimension mismatch between channel, signals and codebook")
    n_a, n_b = _deviations(h, params, rng)
    h_ae = h + n_a
    h_be = params.gamma * h + n_b
    clean = op.rank_one(h_ae, a) + op.rank_one(h_be, b)
    return add_awgn(clean, params.snr_db, rng, params.snr_convention), h_ae, h_be


def eve_oracle_observe(h_ab, beta_a, beta_b, params: EveParams, op: MeasurementOp, rng=None):
    """Observation of an eavesdropper who already knows the true support.

    ``T = h_AE (x) bA + h_BE (x) bB + nbar`` where ``nbar`` is the noise left
    after inverting ``C`` on the support, covariance ``s2 (C_S^* C_S)^{-1}``.

    Returns
    -------
    (ndarray, dict)
        The tensor and metadata (support mask, noise variance, rank flag).
    """
    rng = np.random.default_rng(rng)
    h = _dense(h_ab).astype(complex)
    a, b = _dense(beta_a), _dense(beta_b)
    n_a, n_b = _deviations(h, params, rng)
    T_clean = lift(h + n_a, a) + lift(params.gamma * h + n_b, b)
    mask = T_clean != 0
    rows, cols = np.nonzero(mask)
    meta = {"support": mask, "sigma2": 0.0, "rank_deficient": False}
    if params.snr_db == np.inf or rows.size == 0:
        return T_clean, meta
    y = op.apply(T_clean)
    sigma2 = float(np.vdot(y, y).real) / op.mu * noise_power_ratio(params.snr_db, params.snr_convention)
    meta["sigma2"] = sigma2
    A = op.restricted_matrix(rows, cols)
    w = complex_normal(rng, op.mu, np.sqrt(sigma2))
    if np.linalg.matrix_rank(A) < rows.size:
        log.warning("support-restricted operator is rank deficient; using identity covariance")
        meta["rank_deficient"] = True
        noise = complex_normal(rng, rows.size, np.sqrt(sigma2))
    else:
        noise = np.linalg.pinv(A) @ w
    T = T_clean.copy()
    T[rows, cols] += noise
    return T, meta


def rank_one_factor(W):
    """Leading singular pair of ``W`` as ``(h, beta)`` with ``W ~ outer(h, beta)``."""
    W = np.asarray(W)
    if not np.any(W):
        raise ParameterError("cannot factor the zero tensor")
    U, S, Vh = np.linalg.svd(W, full_matrices=False)
    return U[:, 0] * S[0], Vh[0].copy()


def split_peaks(beta, k: int):
    """Indices of the ``k`` largest and the next ``k`` largest magnitudes."""
    order = np.argsort(-np.abs(beta), kind="stable")
    return order[:k], order[k:2 * k]


def align_phase(c, reference):
    """Rotate ``c`` by the global phase that best matches ``reference``."""
    corr = np.vdot(c, reference)
    if corr == 0:
        return np.asarray(c)
    return np.asarray(c) * (corr / abs(corr))


def attack_success(c_eve, c_true, tol: float = SUCCESS_TOL) -> bool:
    """``max_i |c_eve_i - c_true_i| <= tol``; inputs already normalised and aligned."""
    c_eve = np.asarray(c_eve)
    c_true = np.asarray(c_true)
    if c_eve.shape != c_true.shape:
        raise ParameterError("length mismatch")
    return bool(np.max(np.abs(c_eve - c_true)) <= tol)


def _compare(c_eve, reference):
    ref = normalize_secret(reference)
    return align_phase(normalize_secret(c_eve), ref), ref


def eve_attack(y_e, Q, s: int, k: int, gamma_hint: float = 1.0, cfg: HihtpConfig | None = None,
               *, secret=None, alice_secret=None, bob_secret=None, supports=None,
               tol: float = SUCCESS_TOL) -> AttackReport:
    """Peak-sorting key recovery.

    Parameters
    ----------
    y_e : ndarray
        Eve's measurement.
    Q : ndarray or MeasurementOp
        The public codebook.
    s, k : int
        Channel and per-party signal sparsity; HiHTP runs with ``(s, 2k)``.
    gamma_hint : float
        Relative power Eve assumes for Bob; the block she attributes to Bob
        is divided by it.
    secret, alice_secret, bob_secret : ndarray, optional
        Ground-truth and legitimate secrets used only to score the attack.
    supports : tuple of arrays, optional
        True ``(supp beta_A, supp beta_B)`` for the ``support_correct`` flag.
    """
    op = Q if isinstance(Q, MeasurementOp) else MeasurementOp(Q)
    cfg = cfg or HihtpConfig(s, 2 * k)
    res = solve(op, y_e, cfg)
    h_hat, beta_hat = rank_one_factor(res.tensor)
    strong, weak = split_peaks(beta_hat, k)
    part_1 = np.zeros_like(beta_hat)
    part_2 = np.zeros_like(beta_hat)
    part_1[strong] = beta_hat[strong]
    part_2[weak] = beta_hat[weak]
    # the stronger block belongs to Bob when gamma > 1
    if gamma_hint >= 1:
        part_1 = part_1 / gamma_hint
    else:
        part_2 = part_2 / gamma_hint
    c_eve = true_secret(h_hat, part_1, part_2)

    support_correct = False
    if supports is not None:
        sa, sb = (set(np.asarray(x).tolist()) for x in supports)
        got = {frozenset(strong.tolist()), frozenset(weak.tolist())}
        support_correct = got == {frozenset(sa), frozenset(sb)}

    success, max_dev, mse = False, np.nan, np.nan
    if not np.any(c_eve):
        # fewer than 2k peaks survived; nothing to compare
        return AttackReport(c_eve, np.nan, np.nan, False, support_correct)
    if secret is not None:
        aligned, ref = _compare(c_eve, secret)
        max_dev = float(np.max(np.abs(aligned - ref)))
        mse = float(np.mean(np.abs(aligned - ref) ** 2))
        success = attack_success(aligned, ref, tol)
    r_a = rmse(*_compare(c_eve, alice_secret)) if alice_secret is not None else np.nan
    r_b = rmse(*_compare(c_eve, bob_secret)) if bob_secret is not None else np.nan
    return AttackReport(c_eve, r_a, r_b, success, support_correct, max_dev, mse)
