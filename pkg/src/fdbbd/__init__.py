"""Simulation of full-duplex bisparse blind deconvolution key agreement.

Two parties transmit sparse signals through a shared sparse channel, recover
each other's lifted tensor with HiHTP and derive a common secret from its
DFT. The package also models a passive eavesdropper, evaluates the entropy
bounds on what she learns, and runs the Monte Carlo experiments.
"""

__version__ = "0.1.0"

from .signals import (Channel, Codebook, NoiseSpec, ParameterError, SparseSignal, add_awgn,
                      circular_convolve, gen_channel, gen_codebook, gen_sparse_signal)
from .lifting import MeasurementOp, build_B, explicit_apply, lift, unvec, vec
from .hihtp import HihtpConfig, HihtpResult, NumericalDivergence, project_sk, solve
from .keygen import (DegenerateSecret, ProtocolConfig, Secret, compute_secret, derive_key,
                     normalize_secret, normalize_unit_interval, rmse, run_protocol, true_secret)
from .adversary import AttackReport, EveParams, eve_attack, eve_observe, eve_oracle_observe
from .security import (brute_force_conditional_entropy, check_sumset, estimate_event_prob,
                       h_gamma, h_noise, key_rate, noiseless_bound, verify_injectivity)

__all__ = [
    "__version__",
    "Channel", "Codebook", "NoiseSpec", "ParameterError", "SparseSignal", "add_awgn",
    "circular_convolve", "gen_channel", "gen_codebook", "gen_sparse_signal",
    "MeasurementOp", "build_B", "explicit_apply", "lift", "unvec", "vec",
    "HihtpConfig", "HihtpResult", "NumericalDivergence", "project_sk", "solve",
    "DegenerateSecret", "ProtocolConfig", "Secret", "compute_secret", "derive_key",
    "normalize_secret", "normalize_unit_interval", "rmse", "run_protocol", "true_secret",
    "AttackReport", "EveParams", "eve_attack", "eve_observe", "eve_oracle_observe",
    "brute_force_conditional_entropy", "check_sumset", "estimate_event_prob",
    "h_gamma", "h_noise", "key_rate", "noiseless_bound", "verify_injectivity",
]
