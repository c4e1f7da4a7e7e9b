"""Physics measurements on distance-coordinate MPS states."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .contractor import mpo_expectation
from .mpo import ModelParams, build_position_projector, build_projector_C
from .mps import Mps, canonicalize, diagonal_profile


def leakage(state: Mps, params: ModelParams) -> float:
    """Weight outside the ordered sector, ``1 - <P_C>`` (exact projector)."""
    pc = build_projector_C(replace(params, projector="exact"))
    val = mpo_expectation(state, pc)
    return 1.0 - float(np.real(val))


def interparticle_profile(state: Mps) -> np.ndarray:
    """``<q_n>`` for every particle in one canonical sweep."""
    d = state.phys_dims[0]
    return diagonal_profile(state, np.arange(1, d + 1, dtype=float))


def particle_entropy_bound(n: int, p: int) -> float:
    """``ln C(n, p)``, evaluated in log space so large ``n`` stays finite."""
    if not 0 <= p <= n:
        raise ValueError(f"need 0 <= p <= n, got p={p}, n={n}")
    return math.lgamma(n + 1) - math.lgamma(p + 1) - math.lgamma(n - p + 1)


def occupation_profile(state: Mps, params: ModelParams) -> np.ndarray:
    """``<n_x>`` for x = 1..L via one sweep carrying the running-sum automaton.

    The position of particle ``alpha`` is ``sum(q_1..q_alpha)``, so a single
    left-to-right pass that keeps the partial-sum-resolved transfer matrix
    yields every ``<delta(x_alpha = x)>`` at once. Positions beyond ``L``
    (leakage) are dropped.
    """
    length = params.sites
    work = canonicalize(state, 0)
    tensors = work.tensors
    n = len(tensors)
    d = tensors[0].shape[1]
    dtype = tensors[0].dtype
    occ = np.zeros(length)
    # f[s] holds the transfer matrix restricted to partial sum s (1-based x)
    f = np.zeros((length + 1, 1, 1), dtype=dtype)
    f[0, 0, 0] = 1.0
    for i in range(n):
        a = tensors[i]
        dl, _, dr = a.shape
        t = np.tensordot(f, a, axes=([2], [0]))  # (s, bra, q, ket')
        g = np.einsum("aqx,saqb->sqxb", a.conj(), t)  # (s, q, bra', ket')
        f_new = np.zeros((length + 1, dr, dr), dtype=dtype)
        for q in range(1, d + 1):
            hi = length + 1 - q
            if hi <= 0:
                break
            f_new[q:] += g[:hi, q - 1]
        f = f_new
        probs = np.einsum("saa->s", f).real
        occ += probs[1:]
    nrm = _norm_squared_unit(tensors)
    return occ / nrm


def _norm_squared_unit(tensors) -> float:
    env = np.ones((1, 1), dtype=tensors[0].dtype)
    for a in tensors:
        tmp = np.tensordot(env, a, axes=([1], [0]))
        env = np.tensordot(a.conj(), tmp, axes=([0, 1], [0, 1]))
    return float(np.real(env[0, 0]))


def occupation_profile_naive(state: Mps, params: ModelParams) -> np.ndarray:
    """Reference implementation: one projector expectation per (alpha, x)."""
    length, n = params.sites, params.particles
    occ = np.zeros(length)
    for alpha in range(1, n + 1):
        for x in range(alpha, length + 1):
            op = build_position_projector(params, alpha, x)
            occ[x - 1] += float(np.real(mpo_expectation(state, op)))
    return occ


def measure_q1(state: Mps, params: ModelParams) -> dict:
    """Standard per-snapshot observables of a distance-coordinate state."""
    occ = occupation_profile(state, params)
    if params.mode == "hole":
        occ = 1.0 - occ
    return {
        "occupation": occ,
        "q_profile": interparticle_profile(state),
        "leakage": leakage(state, params),
    }


def measure_q2(state: Mps) -> dict:
    """Per-snapshot observables of an occupation-basis state."""
    return {
        "occupation": diagonal_profile(state, np.array([0.0, 1.0])),
        "q_profile": None,
        "leakage": 0.0,
    }
