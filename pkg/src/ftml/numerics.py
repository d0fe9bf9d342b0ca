"""Dense linear-algebra helpers, SPD sampling, finite-difference oracles, RNG.

Vectors are 1-D float64 numpy arrays, matrices 2-D. Everything here is pure
given its inputs; the only stateful object is :class:`Rng`, which is
single-owner (spawn children for concurrent use).
"""
from __future__ import annotations

import hashlib
import struct

import numpy as np

from .errors import ContractError, NumericError, ParameterError

GRAD_EPS = 1e-5  # central-difference step for gradients
HVP_EPS = 1e-4   # central-difference step for Hessian-vector products

_MASK64 = (1 << 64) - 1


def _child_seed(seed: int, index: int) -> int:
    """First 8 little-endian bytes of BLAKE2b over (seed, index), both u64."""
    packed = struct.pack("<QQ", seed & _MASK64, index & _MASK64)
    digest = hashlib.blake2b(packed, digest_size=8).digest()
    return struct.unpack("<Q", digest)[0]


class Rng:
    """Seeded random source with a fixed, documented stream.

    The generator is numpy's PCG64 keyed directly by a 64-bit seed, so the
    same seed reproduces the same draw sequence. An Rng is single-owner:
    for concurrent work, derive independent children with :meth:`spawn`
    (child seed = BLAKE2b-64 of the parent seed and the child index).
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def spawn(self, index: int) -> "Rng":
        return Rng(_child_seed(self.seed, int(index)))

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, n, size=None):
        return self._gen.integers(0, int(n), size=size)

    def choice(self, n, size, replace=True):
        return self._gen.choice(int(n), size=size, replace=replace)

    def permutation(self, n):
        return self._gen.permutation(int(n))

    def __repr__(self):
        return f"Rng(seed={self.seed})"


def spd_sample(d: int, mu: float, beta: float, rng: Rng) -> np.ndarray:
    """Random symmetric matrix with every eigenvalue inside [mu, beta].

    Built as Q diag(lam) Q^T with Q from the QR factorization of a Gaussian
    matrix (columns sign-fixed). For d >= 2 the extremes mu and beta are
    always placed in the spectrum, so the bounds are tight rather than
    merely containing.
    """
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    if mu <= 0 or mu > beta:
        raise ParameterError(f"need 0 < mu <= beta, got mu={mu}, beta={beta}")
    gauss = rng.normal(size=(d, d))
    q, r = np.linalg.qr(gauss)
    q = q * np.where(np.diag(r) >= 0, 1.0, -1.0)
    if d == 1:
        lam = np.array([rng.uniform(mu, beta)])
    else:
        lam = np.concatenate([[mu, beta], rng.uniform(mu, beta, size=d - 2)])
    a = (q * lam) @ q.T
    return 0.5 * (a + a.T)


def eig_extremes(a: np.ndarray, sym_tol: float = 1e-10) -> tuple[float, float]:
    """(lambda_min, lambda_max) of a symmetric matrix.

    Symmetry is asserted to within ``sym_tol``; a non-symmetric input is a
    contract violation, not something to silently symmetrize.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {a.shape}")
    if np.max(np.abs(a - a.T)) > sym_tol:
        raise ContractError("matrix is not symmetric within tolerance")
    w = np.linalg.eigvalsh(a)
    return float(w[0]), float(w[-1])


def finite_diff_grad(f, w: np.ndarray, eps: float = GRAD_EPS) -> np.ndarray:
    """Central-difference gradient of a scalar function, one coordinate at a time."""
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    w = np.asarray(w, dtype=float)
    grad = np.zeros_like(w)
    for i in range(w.size):
        step = np.zeros_like(w)
        step[i] = eps
        hi = float(f(w + step))
        lo = float(f(w - step))
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericError(f"non-finite function value near coordinate {i}")
        grad[i] = (hi - lo) / (2.0 * eps)
    return grad


def finite_diff_hvp(g, w: np.ndarray, v: np.ndarray, eps: float = HVP_EPS) -> np.ndarray:
    """Hessian-vector product H(w) v from central differences of a gradient map.

    The direction is normalized before differencing and rescaled after, so
    the step size is independent of ||v||.
    """
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ParameterError("direction vector must be nonzero")
    vhat = v / norm
    hi = np.asarray(g(w + eps * vhat), dtype=float)
    lo = np.asarray(g(w - eps * vhat), dtype=float)
    out = (hi - lo) / (2.0 * eps) * norm
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite gradient while forming Hessian-vector product")
    return out
