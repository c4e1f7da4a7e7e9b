"""Dense tensor kernels shared by every other module.

Tensors are plain ``numpy.ndarray`` values (real storage is used as a fast
path where the data happens to be real; the semantics are always complex).
This module provides the contraction / factorization primitives plus the two
Krylov routines (ground-state Lanczos and the exponential action) that the
sweep algorithms are built on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Singular values below this relative threshold are treated as exact zeros,
# which keeps entropies finite (no log 0) and factorizations deterministic.
ZERO_SINGULAR_VALUE = 1e-14

# Deterministic generator for Lanczos breakdown restarts.
_RESTART_SEED = 0x5EED


class FactorizationError(RuntimeError):
    """A dense factorization failed to converge."""


class KrylovError(RuntimeError):
    """A Krylov iteration did not reach the requested accuracy."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class TruncationPolicy:
    """Bond truncation rule used by all SVD-based splits.

    ``max_bond`` caps the kept rank; ``discard_tolerance`` is the allowed
    sum of discarded squared singular values relative to the full spectrum.
    """

    max_bond: int = 2**30
    discard_tolerance: float = 1e-12

    def __post_init__(self):
        if self.max_bond < 1:
            raise ValueError(f"max_bond must be >= 1, got {self.max_bond}")
        if not 0.0 <= self.discard_tolerance < 1.0:
            raise ValueError(
                f"discard_tolerance must be in [0, 1), got {self.discard_tolerance}"
            )


def contract(a: np.ndarray, b: np.ndarray, axis_pairs) -> np.ndarray:
    """Contract ``a`` and ``b`` over the given ``(axis_a, axis_b)`` pairs.

    The result carries the unpaired axes of ``a`` followed by those of ``b``.
    An empty pair list yields the outer product.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes_a = [p[0] for p in axis_pairs]
    axes_b = [p[1] for p in axis_pairs]
    for ia, ib in zip(axes_a, axes_b):
        if a.shape[ia] != b.shape[ib]:
            raise ValueError(
                f"contracted extents differ: a.shape[{ia}]={a.shape[ia]} "
                f"vs b.shape[{ib}]={b.shape[ib]}"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def _split_matrix(t: np.ndarray, left_axes):
    """Reshape ``t`` into a matrix with ``left_axes`` fused on the left."""
    t = np.asarray(t)
    left = list(left_axes)
    if not left:
        raise ValueError("left_axes must be nonempty")
    right = [ax for ax in range(t.ndim) if ax not in left]
    if not right:
        raise ValueError("left_axes must be a proper subset of the axes")
    perm = left + right
    lshape = tuple(t.shape[ax] for ax in left)
    rshape = tuple(t.shape[ax] for ax in right)
    mat = t.transpose(perm).reshape(int(np.prod(lshape)), int(np.prod(rshape)))
    return mat, lshape, rshape


def svd_split(t: np.ndarray, left_axes, policy: TruncationPolicy | None = None):
    """Split ``t`` by SVD across the bipartition given by ``left_axes``.

    Returns ``(u, s, v, discarded_weight)`` where ``u`` has shape
    ``left_shape + (k,)``, ``v`` has shape ``(k,) + right_shape`` and the
    discarded weight is the truncated share of the normalized spectrum.
    """
    if policy is None:
        policy = TruncationPolicy()
    mat, lshape, rshape = _split_matrix(t, left_axes)
    try:
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            u, s, vh = scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")
        except Exception as exc:  # pragma: no cover - driver fallback
            raise FactorizationError(
                f"SVD failed on shape {mat.shape}: {exc}"
            ) from exc
    total = float(np.sum(s**2))
    if total == 0.0:
        keep = 1
        discarded = 0.0
    else:
        significant = s > ZERO_SINGULAR_VALUE * s[0]
        rank = max(1, int(np.count_nonzero(significant)))
        keep = min(rank, policy.max_bond)
        if policy.discard_tolerance > 0.0:
            weights = (s**2) / total
            tail = np.cumsum(weights[::-1])[::-1]
            # largest truncation whose tail weight stays within tolerance
            while keep > 1 and tail[keep - 1] <= policy.discard_tolerance:
                keep -= 1
        # sub-threshold values are defined as exact zeros and carry no weight
        cut = s[keep:]
        cut = cut[cut > ZERO_SINGULAR_VALUE * s[0]]
        discarded = float(np.sum(cut**2) / total)
    u = u[:, :keep].reshape(lshape + (keep,))
    v = vh[:keep, :].reshape((keep,) + rshape)
    return u, s[:keep].copy(), v, discarded


def qr_split(t: np.ndarray, left_axes):
    """QR-split ``t``; ``q`` has orthonormal columns, ``q @ r`` rebuilds ``t``."""
    mat, lshape, rshape = _split_matrix(t, left_axes)
    q, r = np.linalg.qr(mat)
    k = q.shape[1]
    return q.reshape(lshape + (k,)), r.reshape((k,) + rshape)


def entropy_from_singular_values(s: np.ndarray) -> float:
    """Von Neumann entropy (natural log) of a normalized Schmidt spectrum."""
    s = np.asarray(s, dtype=float)
    total = np.sum(s**2)
    if total <= 0.0:
        return 0.0
    p = (s**2) / total
    p = p[p > ZERO_SINGULAR_VALUE**2]
    return float(-np.sum(p * np.log(p)))


def _tridiag_eigh(alpha, beta):
    if len(alpha) == 1:
        return np.array([alpha[0]]), np.array([[1.0]])
    return scipy.linalg.eigh_tridiagonal(np.asarray(alpha), np.asarray(beta))


def lanczos_min(
    apply,
    v0: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 200,
    warn_on_fail: bool = True,
):
    """Smallest Ritz pair of a Hermitian operator given by ``apply``.

    Full reorthogonalization, restarting on Krylov breakdown. Returns
    ``(eigenvalue, eigenvector)``; non-convergence is reported through a
    warning (suppressible for deliberately budgeted solves) and the best
    pair found is returned.
    """
    v0 = np.asarray(v0)
    shape = v0.shape
    v = v0.reshape(-1).astype(v0.dtype, copy=True)
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ValueError("lanczos_min requires a nonzero start vector")
    v = v / nrm
    dim = v.size
    rng = np.random.default_rng(_RESTART_SEED)

    block = min(dim, 40)
    theta = None
    vec = v
    applies = 0
    residual = np.inf
    while applies < max_iter:
        basis = [vec.copy()]
        alpha, beta = [], []
        b_next = 0.0
        broke_down = False
        converged = False
        while len(alpha) < min(block, dim) and applies < max_iter:
            w = apply(basis[-1].reshape(shape)).reshape(-1)
            applies += 1
            a = float(np.real(np.vdot(basis[-1], w)))
            alpha.append(a)
            w = w - a * basis[-1]
            if len(basis) > 1:
                w = w - beta[-1] * basis[-2]
            # full reorthogonalization keeps the basis clean
            for u in basis:
                w = w - np.vdot(u, w) * u
            b_next = float(np.linalg.norm(w))
            m = len(alpha)
            evals, evecs = _tridiag_eigh(alpha, beta[: m - 1])
            theta = float(evals[0])
            coeff = evecs[:, 0]
            norm_est = float(np.max(np.abs(evals)))
            residual = abs(b_next * coeff[m - 1])
            if residual <= tol * max(norm_est, 1e-30):
                converged = True
                break
            if b_next <= 1e-14 * max(1.0, abs(a)):
                broke_down = True
                break
            beta.append(b_next)
            basis.append(w / b_next)
        m = len(alpha)
        vec = np.column_stack(basis[:m]) @ coeff.astype(basis[0].dtype)
        vec = vec / np.linalg.norm(vec)
        if converged:
            return theta, vec.reshape(shape)
        if broke_down:
            # invariant subspace without convergence flag: perturb and retry
            pert = rng.standard_normal(dim)
            if np.iscomplexobj(vec):
                pert = pert + 1j * rng.standard_normal(dim)
            pert = pert - np.vdot(vec, pert) * vec
            pnorm = np.linalg.norm(pert)
            if pnorm == 0.0:
                return theta, vec.reshape(shape)
            vec = vec + 1e-8 * pert / pnorm
            vec = vec / np.linalg.norm(vec)
    if warn_on_fail:
        warnings.warn(
            f"lanczos_min: not converged after {applies} applies "
            f"(residual {residual:.2e})",
            stacklevel=2,
        )
    return theta, vec.reshape(shape)


def krylov_expv(
    apply,
    v: np.ndarray,
    prefactor: complex,
    tol: float = 1e-10,
    max_dim: int = 60,
) -> np.ndarray:
    """Action of ``exp(prefactor * A)`` on ``v`` for Hermitian ``A``.

    The Krylov dimension grows adaptively until two successive estimates
    agree within ``tol`` (relative). Raises :class:`KrylovError` when the
    configured maximum dimension is insufficient.
    """
    v = np.asarray(v)
    shape = v.shape
    x = v.reshape(-1)
    nrm = float(np.linalg.norm(x))
    if nrm == 0.0:
        raise ValueError("krylov_expv requires a nonzero vector")
    complex_result = np.iscomplexobj(x) or np.iscomplexobj(np.asarray(prefactor))
    basis = [x / nrm]
    alpha, beta = [], []
    prev = None
    est = None
    max_dim = min(max_dim, x.size)
    for m in range(1, max_dim + 1):
        w = apply(basis[-1].reshape(shape)).reshape(-1)
        a = float(np.real(np.vdot(basis[-1], w)))
        alpha.append(a)
        w = w - a * basis[-1]
        if m > 1:
            w = w - beta[-1] * basis[-2]
        for u in basis:
            w = w - np.vdot(u, w) * u
        b = float(np.linalg.norm(w))
        if m == 1 and b <= 1e-14 * max(1.0, abs(a)):
            # v is an eigenvector; in particular A = 0 returns v exactly
            out = np.exp(prefactor * a) * v
            return out if complex_result else out.real
        evals, evecs = _tridiag_eigh(alpha, beta)
        small = evecs @ (np.exp(prefactor * evals) * evecs[0, :])
        est = nrm * (np.column_stack(basis) @ small)
        if prev is not None:
            diff = float(np.linalg.norm(est - prev))
            if diff <= tol * max(nrm, 1e-30):
                return (est if complex_result else est.real).reshape(shape)
        prev = est
        if b <= 1e-14 * max(1.0, abs(a)):
            # invariant subspace: the estimate is exact
            return (est if complex_result else est.real).reshape(shape)
        beta.append(b)
        basis.append(w / b)
    achieved = float(np.linalg.norm(est - prev)) if prev is not None else np.inf
    raise KrylovError(
        f"krylov_expv: no convergence at Krylov dimension {max_dim} "
        f"(residual {achieved:.2e})",
        residual=achieved,
    )
