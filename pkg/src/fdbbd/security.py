"""Entropy bounds for the shared secret and brute-force checks of their ingredients.

All entropies are in nats. The closed forms are

* ``h_gamma(k, g) = -ln( C(2k,k)^-1 (1 - d^2k) / (1 - d)^k + d^k )`` with ``d = 1 - g``
* ``h_noise(s, k, vs, sg) = s ln(1 + 2k vs^2 / sg^2)``
* ``noiseless_bound = (1 - 17 k^4 / n) (h_gamma - 1)``
* ``noisy_bound = noiseless_bound - h_noise``
* ``key_rate = beta h_gamma - h_noise`` for a slack ``0 < beta < 1``

and the oracles enumerate or sample the combinatorial events behind them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.special import comb

from .signals import ParameterError, circular_convolve

__all__ = [
    "Bound",
    "EntropyReport",
    "SumSetWitness",
    "StateSpaceTooLarge",
    "h_gamma",
    "h_noise",
    "noiseless_bound",
    "noisy_bound",
    "key_rate",
    "entropy_report",
    "pairwise_sumset",
    "check_sumset",
    "estimate_event_prob",
    "verify_injectivity",
    "brute_force_conditional_entropy",
    "ml_separation_prob",
    "ml_separation_bound",
    "event_prob_exact",
    "ml_separation_mc",
    "ml_separation_exact",
    "nats_to_bits",
]

ENUMERATION_CAP = 10**7
INJECTIVITY_CAP = 10**5


class StateSpaceTooLarge(ValueError):
    """An exhaustive enumeration would exceed its configured cap."""


class Bound(NamedTuple):
    """A bound clamped at zero; ``raw`` keeps the unclamped value."""

    value: float
    raw: float
    vacuous: bool

    def __float__(self):
        return self.value


def _bound(raw: float) -> Bound:
    raw = float(raw)
    return Bound(max(raw, 0.0), raw, not raw > 0)


def nats_to_bits(x: float) -> float:
    return x / math.log(2.0)


def _binom(n: int, k: int) -> int:
    return comb(n, k, exact=True)


def ml_separation_bound(k: int, delta: float) -> float:
    """``C(2k,k)^-1 (1 - d^2k)/(1 - d)^k + d^k``, the separation probability bound."""
    if not 0 <= delta < 1:
        raise ParameterError("need 0 <= delta < 1")
    return (1 - delta ** (2 * k)) / (1 - delta) ** k / _binom(2 * k, k) + delta**k


def h_gamma(k: int, gamma: float) -> float:
    """Lower bound on ``H(beta_A | beta_A + gamma beta_B)`` for disjoint supports.

    Values of ``gamma`` above one are folded to ``1/gamma``: swapping the
    roles of the two parties leaves the partition entropy unchanged.
    """
    if not gamma > 0:
        raise ParameterError("gamma must be positive; the bound is vacuous at 0")
    if k < 1:
        raise ParameterError("k must be >= 1")
    g = min(gamma, 1.0 / gamma)
    if g == 1.0:
        return math.log(_binom(2 * k, k))
    return -math.log(ml_separation_bound(k, 1.0 - g))


def h_noise(s: int, k: int, varsigma: float, sigma: float) -> float:
    """Entropy penalty ``s ln(1 + 2k varsigma^2 / sigma^2)`` of channel deviations."""
    if not sigma > 0:
        raise ParameterError("sigma must be positive")
    if varsigma < 0:
        raise ParameterError("varsigma must be non-negative")
    return s * math.log1p(2 * k * varsigma**2 / sigma**2)


def noiseless_bound(n: int, k: int, gamma: float) -> Bound:
    if n < 1:
        raise ParameterError("n must be >= 1")
    return _bound((1 - 17 * k**4 / n) * (h_gamma(k, gamma) - 1))


def noisy_bound(n: int, k: int, s: int, gamma: float, varsigma: float, sigma: float) -> Bound:
    return _bound(noiseless_bound(n, k, gamma).raw - h_noise(s, k, varsigma, sigma))


def key_rate(k: int, s: int, gamma: float, varsigma: float, sigma: float,
             beta_slack: float) -> Bound:
    """Achievable key rate per round; ``vacuous`` means no positive rate."""
    if not 0 < beta_slack < 1:
        raise ParameterError("beta_slack must lie in (0, 1)")
    return _bound(beta_slack * h_gamma(k, gamma) - h_noise(s, k, varsigma, sigma))


@dataclass
class EntropyReport:
    h_gamma: float
    h_noise: float
    noiseless_bound: float
    noisy_bound: float
    key_rate: float
    noiseless_vacuous: bool
    noisy_vacuous: bool
    key_rate_vacuous: bool
    n: int
    k: int
    s: int
    gamma: float
    varsigma: float
    sigma: float
    beta_slack: float

    def to_dict(self, bits: bool = False) -> dict:
        d = asdict(self)
        if bits:
            for key in ("h_gamma", "h_noise", "noiseless_bound", "noisy_bound", "key_rate"):
                d[key] = nats_to_bits(d[key])
        return d


def entropy_report(n, k, s, gamma, varsigma=0.0, sigma=1.0, beta_slack=0.99) -> EntropyReport:
    """All closed-form quantities for one parameter set (raw, unclamped nats)."""
    nb = noiseless_bound(n, k, gamma)
    hn = h_noise(s, k, varsigma, sigma)
    nz = _bound(nb.raw - hn)
    kr = key_rate(k, s, gamma, varsigma, sigma, beta_slack)
    return EntropyReport(h_gamma(k, gamma), hn, nb.raw, nz.raw, kr.raw,
                         nb.vacuous, nz.vacuous, kr.vacuous,
                         n, k, s, gamma, varsigma, sigma, beta_slack)


# -- sum-set event ----------------------------------------------------------


def pairwise_sumset(sigma_union, n: int) -> set:
    """Distinct sums ``a + b mod n`` over unordered pairs of distinct elements."""
    elems = sorted(set(int(x) for x in sigma_union))
    return {(a + b) % n for a, b in itertools.combinations(elems, 2)}


@dataclass(frozen=True)
class SumSetWitness:
    sigma_union: frozenset
    sumset_size: int
    event_e: bool
    reason: str = ""


def check_sumset(sigma_a, sigma_b, n: int) -> SumSetWitness:
    """Evaluate the event that the union has ``2k`` elements whose pairwise
    sums are all distinct, i.e. ``k(2k-1)`` of them."""
    sa, sb = set(int(x) for x in sigma_a), set(int(x) for x in sigma_b)
    if any(not 0 <= x < n for x in sa | sb):
        raise ParameterError("support index outside [0, n)")
    k = len(sa)
    union = sa | sb
    size = len(pairwise_sumset(union, n))
    if len(union) < 2 * k or len(sb) != k:
        return SumSetWitness(frozenset(union), size, False, "union < 2k")
    if size != k * (2 * k - 1):
        return SumSetWitness(frozenset(union), size, False, "sum collision")
    return SumSetWitness(frozenset(union), size, True)


def _random_subsets(rng, trials: int, n: int, k: int) -> np.ndarray:
    # rejection sampling keeps memory at O(trials * k) for large n
    out = rng.integers(0, n, size=(trials, k))
    while True:
        srt = np.sort(out, axis=1)
        bad = np.any(np.diff(srt, axis=1) == 0, axis=1)
        if not bad.any():
            return out
        out[bad] = rng.integers(0, n, size=(int(bad.sum()), k))


def _event_holds(union: np.ndarray, n: int) -> np.ndarray:
    """Vectorised event check for rows of ``2k`` support indices."""
    twok = union.shape[1]
    srt = np.sort(union, axis=1)
    distinct = np.all(np.diff(srt, axis=1) != 0, axis=1)
    i, j = np.triu_indices(twok, 1)
    sums = np.sort((union[:, i] + union[:, j]) % n, axis=1)
    no_collision = np.all(np.diff(sums, axis=1) != 0, axis=1)
    return distinct & no_collision


def estimate_event_prob(n: int, k: int, trials: int = 100_000, rng=None) -> dict:
    """Monte Carlo estimate of ``P(E^c)`` against the ``17 k^4 / n`` bound."""
    rng = np.random.default_rng(rng)
    sa = _random_subsets(rng, trials, n, k)
    sb = _random_subsets(rng, trials, n, k)
    holds = _event_holds(np.concatenate([sa, sb], axis=1), n)
    p_hat = 1.0 - holds.mean()
    stderr = math.sqrt(max(p_hat * (1 - p_hat), 0.0) / trials)
    bound = 17 * k**4 / n
    return {"p_hat": float(p_hat), "stderr": stderr, "bound": bound,
            "holds": bool(p_hat <= bound + 3 * stderr), "trials": trials}


def event_prob_exact(n: int, k: int) -> float:
    """``P(E^c)`` by enumerating all pairs of k-subsets (tiny ``n`` only)."""
    subsets = list(itertools.combinations(range(n), k))
    if len(subsets) ** 2 > ENUMERATION_CAP:
        raise StateSpaceTooLarge(f"{len(subsets) ** 2} support pairs")
    fails = sum(not check_sumset(a, b, n).event_e for a in subsets for b in subsets)
    return fails / len(subsets) ** 2


# -- injectivity of the secret map -----------------------------------------


def _psi(sigma, nu, n):
    mu = np.zeros(n, dtype=complex)
    idx = list(sigma)
    mu[idx] = nu[idx]
    return circular_convolve(mu, nu - mu)


def verify_injectivity(sigma_union, alpha, n: int, tol: float = 1e-9) -> dict:
    """Check that ``mu -> mu * (nu - mu)`` separates the k-subsets of ``sigma_union``
    up to the swap ``mu ~ nu - mu``.

    Returns
    -------
    dict
        ``injective``, a ``counterexample`` pair of subsets (or ``None``),
        the number of compared classes, whether the declared equivalence
        holds, and ``near_miss`` when some pair sat at the tolerance boundary.
    """
    union = sorted(int(x) for x in sigma_union)
    if len(union) % 2:
        raise ParameterError("sigma_union must have an even number of elements")
    k = len(union) // 2
    if _binom(2 * k, k) > INJECTIVITY_CAP:
        raise StateSpaceTooLarge(f"C({2 * k},{k}) subsets exceed the cap")
    alpha = np.asarray(alpha)
    if alpha.shape != (2 * k,) or np.any(alpha == 0):
        raise ParameterError("need 2k nonzero values")
    nu = np.zeros(n, dtype=complex)
    nu[union] = alpha

    # one representative per class: subsets containing the smallest element
    first, rest = union[0], union[1:]
    reps = [(first,) + c for c in itertools.combinations(rest, k - 1)]
    images = [_psi(r, nu, n) for r in reps]
    scale = max(float(np.max(np.abs(im))) for im in images) or 1.0
    supports = [frozenset(np.flatnonzero(np.abs(im) > tol * scale).tolist()) for im in images]

    equivalence_ok = all(
        np.allclose(_psi(r, nu, n), _psi(sorted(set(union) - set(r)), nu, n), atol=tol * scale)
        for r in reps
    )
    counterexample = None
    near_miss = False
    for i, j in itertools.combinations(range(len(reps)), 2):
        if supports[i] != supports[j]:
            continue
        diff = float(np.max(np.abs(images[i] - images[j])))
        if diff <= tol * scale:
            counterexample = (reps[i], reps[j])
            break
        if diff <= 1e3 * tol * scale:
            near_miss = True
    return {"injective": counterexample is None, "counterexample": counterexample,
            "classes": len(reps), "equivalence_ok": equivalence_ok, "near_miss": near_miss}


# -- conditional entropy of the superposition ------------------------------


def _entropy_from_keys(keys: np.ndarray) -> float:
    _, counts = np.unique(keys, return_counts=True)
    total = counts.sum()
    p = counts / total
    return float(-np.sum(p * np.log(p)))


def brute_force_conditional_entropy(n: int, k: int, gamma: float, alpha_levels: int,
                                    disjoint: bool = True, observation: str = "grid") -> float:
    """Exact ``H(beta_A | beta_A + gamma beta_B)`` in nats on a discretised model.

    Supports are uniform k-subsets (disjoint when ``disjoint``), nonzero values
    are uniform on ``{1/L, ..., 1}`` with ``L = alpha_levels``. With
    ``observation="grid"`` the superposition is read at the same ``1/L``
    resolution (entry ``v`` is seen as ``ceil(v L)``), which is the discrete
    counterpart of a continuous value distribution; ``"exact"`` keeps the
    sums as they are.
    """
    if not 0 < k <= n or alpha_levels < 1:
        raise ParameterError("bad dimensions")
    if gamma < 0:
        raise ParameterError("gamma must be non-negative")
    if observation not in ("grid", "exact"):
        raise ParameterError(f"unknown observation model {observation!r}")
    L = alpha_levels
    subsets = list(itertools.combinations(range(n), k))
    if disjoint:
        pairs = [(a, b) for a in subsets for b in subsets if not set(a) & set(b)]
    else:
        pairs = [(a, b) for a in subsets for b in subsets]
    n_vals = L ** (2 * k)
    size = len(pairs) * n_vals
    if size > ENUMERATION_CAP:
        raise StateSpaceTooLarge(f"{size} configurations exceed the cap of {ENUMERATION_CAP}")

    levels = np.arange(1, L + 1) / L
    combos = np.array(list(itertools.product(range(L), repeat=2 * k)))  # (n_vals, 2k)
    ia, ib = combos[:, :k], combos[:, k:]
    a_combo_id = ia @ (L ** np.arange(k))

    def code(v):
        if observation == "grid":
            return np.where(v > 0, np.ceil(v * L - 1e-9), 0).astype(np.int64)
        return np.rint(v * 1e9).astype(np.int64)

    # every value an entry of the superposition can take, mapped to a compact symbol
    alphabet = np.unique(np.concatenate([
        [0], code(levels), code(gamma * levels),
        code(levels[:, None] + gamma * levels[None, :]).ravel()]))

    def sym(v):
        return np.searchsorted(alphabet, code(v))

    sym_a, sym_b = sym(levels), sym(gamma * levels)
    sym_ab = sym(levels[:, None] + gamma * levels[None, :])
    base = len(alphabet)
    if base**n >= 2**62:
        raise StateSpaceTooLarge("observation alphabet too large to pack")
    weight = base ** np.arange(n, dtype=np.int64)

    subset_id = {sub: i for i, sub in enumerate(subsets)}
    keys, a_ids = [], []
    for sa, sb in pairs:
        key = np.zeros(len(combos), dtype=np.int64)
        pos_b = {p: j for j, p in enumerate(sb)}
        for i, p in enumerate(sa):
            if p in pos_b:
                key += sym_ab[ia[:, i], ib[:, pos_b.pop(p)]] * weight[p]
            else:
                key += sym_a[ia[:, i]] * weight[p]
        for p, j in pos_b.items():
            key += sym_b[ib[:, j]] * weight[p]
        keys.append(key)
        a_ids.append(subset_id[sa] * L**k + a_combo_id)
    _, obs_id = np.unique(np.concatenate(keys), return_inverse=True)
    obs_id = obs_id.ravel().astype(np.int64)
    a_id = np.concatenate(a_ids)
    joint = obs_id * (len(subsets) * L**k) + a_id
    return _entropy_from_keys(joint) - _entropy_from_keys(obs_id)


# -- separation probability --------------------------------------------------


def ml_separation_exact(k: int, delta: float) -> float:
    """Quadrature of ``k/(1-d)^k int_0^{1-d} x^k (1-x)^{k-1} dx + d^k``."""
    if not 0 <= delta < 1:
        raise ParameterError("need 0 <= delta < 1")
    integral, _ = quad(lambda x: x**k * (1 - x) ** (k - 1), 0.0, 1.0 - delta)
    return k * integral / (1 - delta) ** k + delta**k


def ml_separation_mc(k: int, delta: float, samples: int = 1_000_000, rng=None,
                     chunk: int = 250_000):
    """Monte Carlo of ``P((1-d) max_{i<k} a_i <= min_{i>=k} a_i)`` for uniform ``a``.

    Returns ``(p_hat, stderr)``.
    """
    if not 0 <= delta < 1:
        raise ParameterError("need 0 <= delta < 1")
    rng = np.random.default_rng(rng)
    hits = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        a = rng.random((m, 2 * k))
        hits += int(np.count_nonzero((1 - delta) * a[:, :k].max(axis=1) <= a[:, k:].min(axis=1)))
        done += m
    p = hits / samples
    return p, math.sqrt(p * (1 - p) / samples)


def ml_separation_prob(k: int, delta: float, method: str = "closed_form_bound",
                       samples: int = 1_000_000, rng=None) -> float:
    if method == "closed_form_bound":
        return ml_separation_bound(k, delta)
    if method == "monte_carlo":
        return ml_separation_mc(k, delta, samples, rng)[0]
    raise ParameterError(f"unknown method {method!r}")
