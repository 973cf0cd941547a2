"""Lifted measurement operator for bisparse blind deconvolution.

The bilinear observation ``y = h * (Q beta)`` (circular convolution in
``C^mu``) is linear in the tensor ``W = h (x) beta``, stored as a dense
``(mu, n)`` array with ``W[i, j] = h_i beta_j``. Columns are indexed by the
signal coordinate, rows by the channel tap, and ``vec`` stacks columns.

Since ``C(W) = sum_j W[:, j] * Q[:, j]``, both the operator and its adjoint
are diagonal in the DFT over the tap axis.
"""

from __future__ import annotations

import numpy as np

from .signals import Codebook, ParameterError

__all__ = ["MeasurementOp", "lift", "vec", "unvec", "build_B", "explicit_apply"]

_B_MAX_ENTRIES = 10**6


def lift(h, beta) -> np.ndarray:
    """Rank-one tensor ``h (x) beta`` as a ``(mu, n)`` array."""
    return np.outer(np.asarray(h), np.asarray(beta))


def vec(W) -> np.ndarray:
    """Column-major stacking: index ``i + j*mu`` holds ``W[i, j]``."""
    return np.asarray(W).ravel(order="F")


def unvec(v, mu: int, n: int) -> np.ndarray:
    return np.asarray(v).reshape((mu, n), order="F")


class MeasurementOp:
    """The operator ``C: C^{mu x n} -> C^mu`` built from a codebook."""

    def __init__(self, codebook):
        if not isinstance(codebook, Codebook):
            codebook = Codebook(np.asarray(codebook))
        self.codebook = codebook
        self.Q = codebook.matrix
        self.mu, self.n = self.Q.shape
        # DFT of every codebook column along the tap axis
        self._Qf = np.fft.fft(self.Q, axis=0)
        self._Qf_conj = self._Qf.conj()

    @property
    def shape(self) -> tuple[int, int]:
        return (self.mu, self.n)

    def _check_tensor(self, W):
        W = np.asarray(W)
        if W.shape != (self.mu, self.n):
            raise ParameterError(f"tensor shape {W.shape} != {(self.mu, self.n)}")
        return W

    def apply(self, W) -> np.ndarray:
        """``C(W) = sum_j W[:, j] * Q[:, j]``."""
        W = self._check_tensor(W)
        Wf = np.fft.fft(W, axis=0)
        return np.fft.ifft(np.einsum("ij,ij->i", Wf, self._Qf))

    def apply_adjoint(self, y) -> np.ndarray:
        """``C^*(y)``; column ``j`` is the circular correlation of ``y`` with ``Q[:, j]``."""
        y = np.asarray(y)
        if y.shape != (self.mu,):
            raise ParameterError(f"measurement length {y.shape} != ({self.mu},)")
        yf = np.fft.fft(y)
        return np.fft.ifft(self._Qf_conj * yf[:, None], axis=0)

    def restricted_matrix(self, rows, cols) -> np.ndarray:
        """Matrix of ``C`` restricted to the entries ``(rows[t], cols[t])``.

        Column ``t`` is ``C(E_{rows[t], cols[t]})``, i.e. ``Q[:, cols[t]]``
        circularly shifted by ``rows[t]``.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        r = (np.arange(self.mu)[:, None] - rows[None, :]) % self.mu
        return self.Q[r, cols[None, :]]

    def rank_one(self, h, beta) -> np.ndarray:
        """``h * (Q beta)`` without forming the tensor."""
        h = np.asarray(h)
        x = self.Q @ np.asarray(beta)
        return np.fft.ifft(np.fft.fft(h) * np.fft.fft(x))


def build_B(n_rows: int, n_cols_blocks: int) -> np.ndarray:
    """Explicit 0/1 shift matrix with ``B[i, j*n_rows + k] = [i == (j + k) mod n_rows]``.

    Only meant for validating the fast operator on small sizes.
    """
    mu = int(n_rows)
    blocks = int(n_cols_blocks)
    if mu < 1 or blocks < 1:
        raise ParameterError("dimensions must be positive")
    if mu * mu * blocks > _B_MAX_ENTRIES:
        raise ParameterError(f"explicit B would have {mu * mu * blocks} entries")
    i = np.arange(mu)[:, None]
    col = np.arange(mu * blocks)[None, :]
    j, k = divmod(col, mu)
    return (i == (j + k) % mu).astype(np.int8)


def explicit_apply(Q, W) -> np.ndarray:
    """Slow reference for ``C(W)`` through explicit matrices.

    With ``x_j = Q[:, j]`` the lifted product ``W Q^T`` is the ``(mu, mu)``
    matrix whose column-major vectorisation is ``(Q (x) I_mu) vec(W)``, and
    ``B`` with ``mu`` blocks sums its anti-diagonals modulo ``mu``.
    """
    Q = np.asarray(Q)
    mu, _ = Q.shape
    B = build_B(mu, mu)
    return B @ (np.kron(Q, np.eye(mu)) @ vec(W))
