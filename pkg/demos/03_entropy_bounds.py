"""How much of Alice's signal stays hidden from the eavesdropper.

Compares the closed-form lower bound with an exhaustive enumeration on a toy
model, and shows when the asymptotic bounds become non-vacuous.
"""

import math

from fdbbd import security as sec

k, n, levels = 2, 10, 8
print("gamma  h_gamma  brute force  (nats)")
for gamma in (0.5, 0.8, 0.9, 1.0):
    h = sec.brute_force_conditional_entropy(n, k, gamma, levels)
    print(f"{gamma:5.2f}  {sec.h_gamma(k, gamma):7.4f}  {h:11.4f}")
print(f"ceiling ln C(2k, k) = {math.log(math.comb(2 * k, k)):.4f}")

# the combinatorial event behind injectivity fails rarely for large n
for k, n in ((2, 512), (3, 8192)):
    est = sec.estimate_event_prob(n, k, 100_000, rng=0)
    print(f"k={k}, n={n}: P(event fails) ~ {est['p_hat']:.4f}, bound {est['bound']:.4f}")

# the noiseless bound needs n >> 17 k^4 before it says anything
for n in (10**3, 10**5, 10**7):
    b = sec.noiseless_bound(n, 4, 1.0)
    print(f"n={n:>9}: noiseless bound {b.value:.3f} nats (vacuous={b.vacuous})")

rate = sec.key_rate(k=4, s=3, gamma=1.0, varsigma=0.05, sigma=1.0, beta_slack=0.9)
print(f"key rate per round with small channel deviations: {sec.nats_to_bits(rate.value):.2f} bits")
