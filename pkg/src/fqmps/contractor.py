"""MPO-MPS contraction machinery.

Environments carry index order ``(bra bond, MPO bond, ket bond)``. The MPO
site tensors of this package are sparse finite-state automata, so the
physical-index contraction is routed through a cached ``scipy.sparse``
matrix whenever that pays off; the bond-sized contractions are plain BLAS
matmuls.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

_SPARSE_DENSITY_CUTOFF = 0.30
_SPARSE_MIN_SIZE = 64


class SiteOperator:
    """Cached reshapes of one MPO tensor for fast repeated application."""

    def __init__(self, w: np.ndarray):
        self.tensor = w
        wl, so, si, wr = w.shape
        self.shape = w.shape
        left = w.transpose(1, 3, 0, 2).reshape(so * wr, wl * si)
        right = w.reshape(wl * so, si * wr)
        self.mat_left = _maybe_sparse(left)
        self.mat_right = _maybe_sparse(right)


def _maybe_sparse(mat: np.ndarray):
    nnz = np.count_nonzero(mat)
    if mat.size >= _SPARSE_MIN_SIZE and nnz <= _SPARSE_DENSITY_CUTOFF * mat.size:
        return sp.csr_matrix(mat)
    return mat


def site_operators(op) -> list[SiteOperator]:
    """Per-site cached operators for ``op`` (memoized on the MPO object)."""
    cache = getattr(op, "_site_op_cache", None)
    if cache is None:
        cache = [SiteOperator(w) for w in op.tensors]
        object.__setattr__(op, "_site_op_cache", cache)
    return cache


def left_boundary(dtype=np.float64) -> np.ndarray:
    return np.ones((1, 1, 1), dtype=dtype)


def apply_site(lenv, sop: SiteOperator, renv, x):
    """Effective single-site operator: ``(L | W | R)`` applied to ``x``."""
    a, w, b = lenv.shape
    c, wr, d = renv.shape
    wl, so, si, _ = sop.shape
    t = lenv.reshape(a * w, b) @ x.reshape(b, -1)  # (a w, q d)
    t = t.reshape(a, w, si, d).transpose(1, 2, 0, 3).reshape(w * si, a * d)
    t = sop.mat_left @ t  # (s wr, a d)
    t = t.reshape(so, wr, a, d).transpose(2, 0, 1, 3).reshape(a * so, wr * d)
    t = t @ renv.transpose(1, 2, 0).reshape(wr * d, c)
    return t.reshape(a, so, c)


def apply_bond(lenv, renv, x):
    """Zero-site (bond) effective operator applied to a bond matrix."""
    a, w, b = lenv.shape
    c, _, d = renv.shape
    t = lenv.reshape(a * w, b) @ x  # (a w, d)
    t = t.reshape(a, w * d)
    t = t @ renv.transpose(1, 2, 0).reshape(w * d, c)
    return t.reshape(a, c)


def half_contract_left(lenv, sop: SiteOperator, x):
    """Contract ``L`` and ``W`` with the site tensor, leaving bond ``(wr, d)``.

    Returns shape ``(a, s, wr * d)`` — the subspace-expansion block.
    """
    a, w, b = lenv.shape
    wl, so, si, wr = sop.shape
    d = x.shape[2]
    t = lenv.reshape(a * w, b) @ x.reshape(b, -1)
    t = t.reshape(a, w, si, d).transpose(1, 2, 0, 3).reshape(w * si, a * d)
    t = sop.mat_left @ t
    return t.reshape(so, wr, a, d).transpose(2, 0, 1, 3).reshape(a, so, wr * d)


def half_contract_right(sop: SiteOperator, renv, x):
    """Contract ``W`` and ``R`` with the site tensor, leaving bond ``(wl, b)``.

    Returns shape ``(wl * b, s, c)`` — the mirror expansion block.
    """
    c, wr, d = renv.shape
    wl, so, si, _ = sop.shape
    b = x.shape[0]
    t = x.reshape(b * si, d) @ renv.transpose(2, 1, 0).reshape(d, wr * c)
    t = t.reshape(b, si, wr, c).transpose(1, 2, 0, 3).reshape(si * wr, b * c)
    t = sop.mat_right @ t  # (wl so, b c)
    return t.reshape(wl, so, b, c).transpose(0, 2, 1, 3).reshape(wl * b, so, c)


def update_left_env(lenv, bra, sop: SiteOperator, ket):
    """Grow a left environment by one site."""
    a, w, b = lenv.shape
    wl, so, si, wr = sop.shape
    an, dn = bra.shape[2], ket.shape[2]
    t = lenv.reshape(a * w, b) @ ket.reshape(b, -1)
    t = t.reshape(a, w, si, dn).transpose(1, 2, 0, 3).reshape(w * si, a * dn)
    t = sop.mat_left @ t
    t = t.reshape(so, wr, a, dn).transpose(2, 0, 1, 3).reshape(a * so, wr * dn)
    out = bra.conj().reshape(a * so, an).T @ t
    return out.reshape(an, wr, dn)


def update_right_env(bra, sop: SiteOperator, ket, renv):
    """Grow a right environment by one site."""
    c, wr, d = renv.shape
    wl, so, si, _ = sop.shape
    ab, bk = bra.shape[0], ket.shape[0]
    t = ket.reshape(bk * si, d) @ renv.transpose(2, 1, 0).reshape(d, wr * c)
    t = t.reshape(bk, si, wr, c).transpose(1, 2, 0, 3).reshape(si * wr, bk * c)
    t = sop.mat_right @ t  # (wl so, bk c)
    t = t.reshape(wl, so, bk, c).transpose(1, 3, 0, 2).reshape(so * c, wl * bk)
    out = bra.conj().reshape(ab, so * c) @ t
    return out.reshape(ab, wl, bk)


def mpo_expectation(state, op) -> complex:
    """``<state|op|state> / <state|state>`` by a single sweep."""
    if op.n_sites != state.n_sites:
        raise ValueError("operator and state have different lengths")
    for w, t in zip(op.tensors, state.tensors):
        if w.shape[2] != t.shape[1]:
            raise ValueError("operator and state physical dimensions differ")
    sops = site_operators(op)
    dtype = np.result_type(state.tensors[0], op.tensors[0])
    env = left_boundary(dtype)
    gram = np.ones((1, 1), dtype=dtype)
    for a, sop in zip(state.tensors, sops):
        env = update_left_env(env, a, sop, a)
        tmp = np.tensordot(gram, a, axes=([1], [0]))
        gram = np.tensordot(a.conj(), tmp, axes=([0, 1], [0, 1]))
    return complex(env[0, 0, 0] / gram[0, 0])


def mpo_variance(state, op, max_work: int = 2**24) -> float | None:
    """``<op^2> - <op>^2`` via a two-layer environment.

    Returns ``None`` when the working set ``(D * w)^2`` would exceed
    ``max_work`` entries.
    """
    d_max = max(t.shape[0] for t in state.tensors)
    w_max = max(w.shape[0] for w in op.tensors)
    if (d_max * w_max) ** 2 > max_work:
        return None
    dtype = np.result_type(state.tensors[0], op.tensors[0])
    env = np.ones((1, 1, 1, 1), dtype=dtype)  # (bra, w_upper, w_lower, ket)
    gram = np.ones((1, 1), dtype=dtype)
    for a, w in zip(state.tensors, op.tensors):
        tmp = np.tensordot(env, a, axes=([3], [0]))  # (bra, wu, wl, q, k')
        tmp = np.tensordot(tmp, w, axes=([2, 3], [0, 2]))  # (bra, wu, k', s, wl')
        tmp = np.tensordot(tmp, w, axes=([1, 3], [0, 2]))  # (bra, k', wl', s', wu')
        env = np.tensordot(a.conj(), tmp, axes=([0, 1], [0, 3]))  # (b', k', wl', wu')
        env = env.transpose(0, 3, 2, 1)
        g = np.tensordot(gram, a, axes=([1], [0]))
        gram = np.tensordot(a.conj(), g, axes=([0, 1], [0, 1]))
    h2 = float(np.real(env[0, 0, 0, 0] / gram[0, 0]))
    e = mpo_expectation(state, op)
    return h2 - float(np.real(e)) ** 2


def gram_right_envs(state) -> list[np.ndarray]:
    """Right Gram matrices ``<psi|psi>`` partial contractions per bond."""
    n = state.n_sites
    envs = [None] * (n + 1)
    envs[n] = np.ones((1, 1), dtype=state.tensors[0].dtype)
    for i in range(n - 1, -1, -1):
        a = state.tensors[i]
        tmp = np.tensordot(a, envs[i + 1], axes=([2], [1]))  # (b_ket, q, c_bra)
        envs[i] = np.tensordot(a.conj(), tmp, axes=([1, 2], [1, 2]))
    return envs


def hermiticity_defect(lenv, sop: SiteOperator, renv, rng) -> float:
    """Relative asymmetry of the effective site operator on a random pair."""
    a, _, b = lenv.shape
    c, _, d = renv.shape
    si = sop.shape[2]
    shape = (b, si, d)
    x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    y = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    ax = apply_site(lenv, sop, renv, x)
    ay = apply_site(lenv, sop, renv, y)
    lhs = np.vdot(y, ax)
    rhs = np.vdot(ay, x)
    scale = max(np.linalg.norm(ax), np.linalg.norm(ay), 1e-300)
    return abs(lhs - rhs) / (scale * max(np.linalg.norm(x), np.linalg.norm(y)))
