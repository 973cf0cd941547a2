"""An eavesdropper sees the superposition of both transmissions.

She runs HiHTP with twice the signal sparsity, factors the result and splits
the 2k peaks by magnitude. That only works when one party is much louder.
"""

import numpy as np

from fdbbd import (EveParams, MeasurementOp, eve_attack, eve_observe, gen_channel, gen_codebook,
                   gen_sparse_signal, true_secret)

n, mu, k, s = 128, 100, 4, 3
trials = 40

print(" gamma  success  sort correct")
for gamma in (0.25, 0.5, 1.0, 2.0, 4.0, 6.0):
    wins = sorts = 0
    for t in range(trials):
        rng = np.random.default_rng([42, t])
        op = MeasurementOp(gen_codebook(mu, n, rng))
        h = gen_channel(mu, s, rng).dense()
        a = gen_sparse_signal(n, k, rng=rng)
        b = gen_sparse_signal(n, k, rng=rng)
        eve = EveParams(gamma=gamma, snr_db=50, snr_convention="amplitude")
        y_e, _, _ = eve_observe(h, op, a, b, eve, rng)
        rep = eve_attack(y_e, op, s, k, gamma, secret=true_secret(h, a.dense(), b.dense()),
                         supports=(a.support, b.support))
        wins += rep.success
        sorts += rep.support_correct
    print(f"{gamma:6.2f}  {wins / trials:7.2f}  {sorts / trials:12.2f}")

# near gamma = 1 the magnitudes of both parties are exchangeable and the split
# is a coin toss over C(2k, k) partitions
