"""Matrix product states over inter-particle-distance variables.

An :class:`Mps` stores one rank-3 tensor per particle with index order
``(left bond, physical, right bond)``. Physical basis values are 1-based:
array index ``i`` encodes the distance value ``q = i + 1``, so ``q >= 1``
holds by construction and hard-core exclusion is automatic. The same
container doubles as an occupation-basis state for the second-quantized
baseline (physical dimension 2).

States are treated as immutable values: every operation returns a new
``Mps`` and never mutates its input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import (
    TruncationPolicy,
    entropy_from_singular_values,
    qr_split,
    svd_split,
)


@dataclass
class Mps:
    """Finite MPS with open boundaries.

    ``center`` is the orthogonality-center site (0-based) or ``None`` when
    the gauge is unknown. ``norm_log`` is an accumulated log-scale factor:
    the encoded vector is ``exp(norm_log)`` times the tensor-train product,
    which keeps long chains free of under/overflow.
    """

    tensors: list[np.ndarray]
    center: int | None = None
    norm_log: float = 0.0
    truncation_error: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not self.tensors:
            raise ValueError("an MPS needs at least one site")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[-1] != 1:
            raise ValueError("boundary bonds must have extent 1")
        for i in range(len(self.tensors) - 1):
            if self.tensors[i].shape[-1] != self.tensors[i + 1].shape[0]:
                raise ValueError(f"bond mismatch between sites {i} and {i + 1}")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def phys_dims(self) -> list[int]:
        return [t.shape[1] for t in self.tensors]

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[-1] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def copy(self) -> "Mps":
        return Mps(
            [t.copy() for t in self.tensors],
            center=self.center,
            norm_log=self.norm_log,
            truncation_error=self.truncation_error,
        )

    def astype(self, dtype) -> "Mps":
        return Mps(
            [t.astype(dtype) for t in self.tensors],
            center=self.center,
            norm_log=self.norm_log,
        )

    def to_dense(self, max_size: int = 2**22) -> np.ndarray:
        """Contract to a dense vector of length ``prod(phys_dims)``.

        The overall scale ``exp(norm_log)`` is included. Guarded by
        ``max_size`` since the result is exponentially large.
        """
        size = 1
        for d in self.phys_dims:
            size *= d
        if size > max_size:
            raise ValueError(f"dense vector of size {size} exceeds cap {max_size}")
        vec = self.tensors[0].reshape(self.tensors[0].shape[1], -1)
        for t in self.tensors[1:]:
            vec = np.tensordot(vec, t, axes=([-1], [0]))
            vec = vec.reshape(-1, t.shape[-1])
        return math.exp(self.norm_log) * vec.reshape(-1)


def product_state(values, phys_dim: int, dtype=np.complex128) -> Mps:
    """Product basis state from 1-based physical values.

    For distance coordinates ``values[n]`` is the n-th inter-particle
    distance; for the occupation basis use ``phys_dim=2`` with values in
    ``{1, 2}`` (empty / occupied).
    """
    values = list(values)
    if not values:
        raise ValueError("need at least one site")
    tensors = []
    for v in values:
        if not 1 <= v <= phys_dim:
            raise ValueError(f"basis value {v} outside [1, {phys_dim}]")
        t = np.zeros((1, phys_dim, 1), dtype=dtype)
        t[0, v - 1, 0] = 1.0
        tensors.append(t)
    return Mps(tensors, center=0, norm_log=0.0)


def mps_from_dense(
    vec: np.ndarray,
    phys_dims,
    policy: TruncationPolicy | None = None,
) -> Mps:
    """Exact (or truncated) MPS factorization of a dense vector."""
    phys_dims = list(phys_dims)
    vec = np.asarray(vec)
    size = 1
    for d in phys_dims:
        size *= d
    if vec.size != size:
        raise ValueError(f"vector length {vec.size} != prod(phys_dims) {size}")
    nrm = float(np.linalg.norm(vec))
    if nrm == 0.0:
        raise ValueError("cannot factorize the zero vector")
    rest = vec / nrm
    tensors = []
    left = 1
    total_discard = 0.0
    for d in phys_dims[:-1]:
        rest = rest.reshape(left * d, -1)
        u, s, v, disc = svd_split(rest, [0], policy)
        total_discard += disc
        k = s.size
        tensors.append(u.reshape(left, d, k))
        rest = (s[:, None] * v).reshape(k, -1)
        left = k
    tensors.append(rest.reshape(left, phys_dims[-1], 1))
    out = Mps(tensors, center=len(phys_dims) - 1, norm_log=math.log(nrm))
    out.truncation_error = total_discard
    return out


def _move_right(tensors, i, norm_acc):
    """QR-push the center one site to the right; returns updated norm log."""
    dl, d, dr = tensors[i].shape
    q, r = qr_split(tensors[i], [0, 1])
    scale = float(np.linalg.norm(r))
    if scale > 0.0:
        r = r / scale
        norm_acc += math.log(scale)
    tensors[i] = q.reshape(dl, d, q.shape[-1])
    tensors[i + 1] = np.tensordot(r, tensors[i + 1], axes=([1], [0]))
    return norm_acc


def _move_left(tensors, i, norm_acc):
    dl, d, dr = tensors[i].shape
    q, r = qr_split(tensors[i].transpose(2, 1, 0), [0, 1])
    k = q.shape[-1]
    scale = float(np.linalg.norm(r))
    if scale > 0.0:
        r = r / scale
        norm_acc += math.log(scale)
    tensors[i] = q.reshape(dr, d, k).transpose(2, 1, 0)
    tensors[i - 1] = np.tensordot(tensors[i - 1], r, axes=([2], [1]))
    return norm_acc


def canonicalize(
    state: Mps,
    center: int,
    policy: TruncationPolicy | None = None,
) -> Mps:
    """Return a copy in mixed-canonical form about ``center``.

    Without a policy the re-gauge is exact (QR only). With a policy the
    final left-to-right pass truncates by SVD and the accumulated discarded
    weight is stored in ``truncation_error``. The center tensor is
    normalized, with the extracted scale folded into ``norm_log``.
    """
    n = state.n_sites
    if not 0 <= center < n:
        raise ValueError(f"center {center} outside [0, {n - 1}]")
    tensors = [t.copy() for t in state.tensors]
    norm_acc = state.norm_log
    # right-canonicalize everything so a single left-to-right pass suffices
    for i in range(n - 1, 0, -1):
        norm_acc = _move_left(tensors, i, norm_acc)
    total_discard = 0.0
    for i in range(center):
        if policy is None:
            norm_acc = _move_right(tensors, i, norm_acc)
        else:
            dl, d, dr = tensors[i].shape
            u, s, v, disc = svd_split(tensors[i], [0, 1], policy)
            total_discard += disc
            k = s.size
            tensors[i] = u.reshape(dl, d, k)
            carry = s[:, None] * v
            scale = float(np.linalg.norm(carry))
            if scale > 0.0:
                carry = carry / scale
                norm_acc += math.log(scale)
            tensors[i + 1] = np.tensordot(carry, tensors[i + 1], axes=([1], [0]))
    scale = float(np.linalg.norm(tensors[center]))
    if scale > 0.0:
        tensors[center] = tensors[center] / scale
        norm_acc += math.log(scale)
    out = Mps(tensors, center=center, norm_log=norm_acc)
    out.truncation_error = total_discard
    return out


def inner(a: Mps, b: Mps) -> complex:
    """Overlap ``<a|b>`` including the log-scale factors."""
    if a.n_sites != b.n_sites or a.phys_dims != b.phys_dims:
        raise ValueError("states live on different site spaces")
    env = np.ones((1, 1), dtype=np.result_type(a.tensors[0], b.tensors[0]))
    for ta, tb in zip(a.tensors, b.tensors):
        # env[alpha_bra, alpha_ket] -> contract one more site
        tmp = np.tensordot(env, tb, axes=([1], [0]))
        env = np.tensordot(ta.conj(), tmp, axes=([0, 1], [0, 1]))
    val = env[0, 0]
    return complex(val * math.exp(a.norm_log + b.norm_log))


def norm_squared(state: Mps) -> float:
    return float(np.real(inner(state, state)))


def expectation(state: Mps, op) -> complex:
    """Normalized expectation ``<state|op|state> / <state|state>``."""
    from .contractor import mpo_expectation

    return mpo_expectation(state, op)


def entropy_profile(state: Mps) -> np.ndarray:
    """Bond entropies from a mixed-canonical sweep (natural log).

    Entry ``n`` is the von Neumann entropy of the bipartition between the
    first ``n + 1`` particles and the rest, computed from the singular
    values of each site tensor as the center moves left to right.
    """
    n = state.n_sites
    if n == 1:
        return np.zeros(0)
    work = canonicalize(state, 0)
    tensors = work.tensors
    entropies = np.zeros(n - 1)
    for i in range(n - 1):
        dl, d, dr = tensors[i].shape
        u, s, v, _ = svd_split(tensors[i], [0, 1], None)
        entropies[i] = entropy_from_singular_values(s)
        carry = s[:, None] * v
        nrm = float(np.linalg.norm(carry))
        if nrm > 0.0:
            carry = carry / nrm
        tensors[i] = u
        tensors[i + 1] = np.tensordot(carry, tensors[i + 1], axes=([1], [0]))
    return entropies


def local_expectation(state: Mps, site: int, diag) -> float:
    """Expectation of a diagonal single-site observable."""
    n = state.n_sites
    if not 0 <= site < n:
        raise ValueError(f"site {site} outside [0, {n - 1}]")
    diag = np.asarray(diag, dtype=float)
    if diag.size != state.tensors[site].shape[1]:
        raise ValueError("diagonal length does not match the physical dimension")
    if state.center == site:
        a = state.tensors[site]
    else:
        a = canonicalize(state, site).tensors[site]
    weights = np.einsum("aqb,aqb->q", a.conj(), a).real
    total = float(np.sum(weights))
    return float(np.dot(weights, diag) / total)


def diagonal_profile(state: Mps, diag) -> np.ndarray:
    """``local_expectation`` on every site via one canonical sweep."""
    n = state.n_sites
    diag = np.asarray(diag, dtype=float)
    work = canonicalize(state, 0)
    tensors = work.tensors
    out = np.zeros(n)
    for i in range(n):
        a = tensors[i]
        weights = np.einsum("aqb,aqb->q", a.conj(), a).real
        out[i] = float(np.dot(weights, diag) / np.sum(weights))
        if i < n - 1:
            _move_right(tensors, i, 0.0)
    return out
