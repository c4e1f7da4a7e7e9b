"""Independent exact references used to validate every solver path.

Nothing here touches the MPO/MPS machinery except :func:`mpo_to_dense`,
which is the bridge that turns an MPO into an ordinary matrix for
elementwise comparison. Everything else is built directly from first
principles: free-fermion analytics, correlation matrices, sparse exact
diagonalization on the ordered configuration sector, and brute-force
entropies.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mpo import ModelParams
from .tensor import entropy_from_singular_values

DEFAULT_BASIS_CAP = 2_000_000
DEFAULT_DENSE_DIM_CAP = 4096


class OracleSizeError(ValueError):
    """Requested oracle exceeds its configured desk-scale cap."""


# ---------------------------------------------------------------------------
# free fermions


def open_chain_spectrum(length: int, t: float = 1.0) -> np.ndarray:
    """Single-particle energies ``-2 t cos(k pi / (L+1))``, k = 1..L."""
    if length < 1:
        raise ValueError("length must be >= 1")
    k = np.arange(1, length + 1)
    return -2.0 * t * np.cos(k * np.pi / (length + 1))


def free_ground_energy(length: int, n: int, t: float = 1.0) -> float:
    """Ground energy of ``n`` free fermions on the open chain."""
    return float(np.sort(open_chain_spectrum(length, t))[:n].sum())


def hopping_matrix(length: int, t: float = 1.0) -> np.ndarray:
    h = np.zeros((length, length))
    for i in range(length - 1):
        h[i, i + 1] = h[i + 1, i] = -t
    return h


def correlation_matrix(
    length: int,
    n: int,
    time: float = 0.0,
    initial: str = "domain_wall",
    t: float = 1.0,
) -> np.ndarray:
    """One-body matrix ``C_xy(t) = <c+_y c_x>`` under free evolution.

    ``initial`` selects the left-packed domain wall or the ``n`` lowest
    open-chain orbitals. ``<n_x(t)>`` is the diagonal.
    """
    if not 0 <= n <= length:
        raise ValueError("particle number outside [0, L]")
    if initial == "domain_wall":
        c0 = np.diag(np.array([1.0] * n + [0.0] * (length - n)))
    elif initial == "ground":
        h = hopping_matrix(length, t)
        _, orbitals = np.linalg.eigh(h)
        occ = orbitals[:, :n]
        c0 = occ @ occ.conj().T
    else:
        raise ValueError(f"unknown initial state {initial!r}")
    if time == 0.0:
        return c0.astype(complex)
    u = scipy.linalg.expm(-1j * time * hopping_matrix(length, t))
    return u @ c0 @ u.conj().T


def block_entropy_from_correlations(c: np.ndarray, block) -> float:
    """Entanglement entropy of ``block`` sites from the one-body matrix."""
    idx = np.asarray(sorted(block), dtype=int)
    sub = np.asarray(c)[np.ix_(idx, idx)]
    nu = np.linalg.eigvalsh(sub)
    if nu.min() < -1e-9 or nu.max() > 1 + 1e-9:
        raise ValueError(f"one-body spectrum outside [0, 1]: [{nu.min()}, {nu.max()}]")
    nu = np.clip(nu, 1e-14, 1 - 1e-14)
    return float(-np.sum(nu * np.log(nu) + (1 - nu) * np.log(1 - nu)))


# ---------------------------------------------------------------------------
# constrained exact diagonalization


@dataclass
class ConstrainedBasis:
    """All ordered configurations ``0 < x_1 < ... < x_N <= L`` as q-tuples."""

    sites: int
    particles: int
    q_tuples: list[tuple[int, ...]] = field(repr=False)
    index: dict = field(repr=False)

    @classmethod
    def build(cls, sites: int, particles: int, cap: int = DEFAULT_BASIS_CAP):
        from math import comb

        size = comb(sites, particles)
        if size > cap:
            raise OracleSizeError(f"basis size {size} exceeds cap {cap}")
        q_tuples = []
        for xs in itertools.combinations(range(1, sites + 1), particles):
            qs = tuple(
                xs[i] - (xs[i - 1] if i else 0) for i in range(particles)
            )
            q_tuples.append(qs)
        index = {q: i for i, q in enumerate(q_tuples)}
        return cls(sites, particles, q_tuples, index)

    def __len__(self) -> int:
        return len(self.q_tuples)

    def positions(self, i: int) -> tuple[int, ...]:
        qs = self.q_tuples[i]
        out, acc = [], 0
        for q in qs:
            acc += q
            out.append(acc)
        return tuple(out)

    def embed(self, vec: np.ndarray, q_max: int) -> np.ndarray:
        """Embed a basis vector into the ``q_max**N`` hypercube."""
        n = self.particles
        if any(max(q) > q_max for q in self.q_tuples):
            raise OracleSizeError(
                f"q_max={q_max} too small to embed the full basis "
                f"(needs {self.sites + 1 - self.particles})"
            )
        out = np.zeros(q_max**n, dtype=np.asarray(vec).dtype)
        for amp, qs in zip(vec, self.q_tuples):
            flat = 0
            for q in qs:
                flat = flat * q_max + (q - 1)
            out[flat] = amp
        return out


def constrained_hamiltonian(params: ModelParams, basis: ConstrainedBasis | None = None):
    """Sparse Hamiltonian on the ordered sector (hole edges included)."""
    length, n = params.sites, params.particles
    t, v = params.t, params.v
    if basis is None:
        basis = ConstrainedBasis.build(length, n)
    dim = len(basis)
    rows, cols, vals = [], [], []
    hole = params.mode == "hole"
    for i in range(dim):
        xs = basis.positions(i)
        occ = set(xs)
        diag = v * sum(1 for a, b in zip(xs, xs[1:]) if b == a + 1)
        if hole:
            diag += v * ((1 in occ) + (length in occ))
        if diag:
            rows.append(i)
            cols.append(i)
            vals.append(diag)
        for pos, x in enumerate(xs):
            for dx in (-1, 1):
                y = x + dx
                if 1 <= y <= length and y not in occ:
                    new = list(xs)
                    new[pos] = y
                    qs = tuple(
                        new[k] - (new[k - 1] if k else 0) for k in range(n)
                    )
                    j = basis.index[qs]
                    rows.append(j)
                    cols.append(i)
                    vals.append(-t)
    h = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    return h, basis


def constrained_ed_ground(params: ModelParams, basis: ConstrainedBasis | None = None):
    """Ground pair of the ordered-sector Hamiltonian (deterministic)."""
    h, basis = constrained_hamiltonian(params, basis)
    dim = h.shape[0]
    if dim <= 1500:
        w, u = np.linalg.eigh(h.toarray())
        return float(w[0]), u[:, 0], basis
    v0 = np.random.default_rng(0xED).standard_normal(dim)
    w, u = spla.eigsh(h, k=1, which="SA", tol=0, maxiter=10000, v0=v0)
    return float(w[0]), u[:, 0], basis


def constrained_ed_evolve(
    params: ModelParams,
    psi0: np.ndarray,
    time: float,
    basis: ConstrainedBasis | None = None,
) -> np.ndarray:
    """``exp(-i H t) psi0`` on the ordered sector via Krylov stepping."""
    h, basis = constrained_hamiltonian(params, basis)
    if psi0.shape[0] != h.shape[0]:
        raise ValueError("state length does not match the basis size")
    if time == 0.0:
        return psi0.astype(complex)
    return spla.expm_multiply((-1j * time) * h.astype(complex), psi0.astype(complex))


def occupation_from_dense(basis: ConstrainedBasis, vec: np.ndarray) -> np.ndarray:
    """``<n_x>`` of a dense sector state."""
    out = np.zeros(basis.sites)
    probs = np.abs(vec) ** 2
    for i, p in enumerate(probs):
        if p == 0.0:
            continue
        for x in basis.positions(i):
            out[x - 1] += p
    return out / float(np.sum(probs))


# ---------------------------------------------------------------------------
# second-quantized sector (independent construction with explicit signs)


def q2_sector_hamiltonian(length: int, n: int, t: float, v: float):
    """N-particle block of the occupation-number Hamiltonian.

    Built from bit masks with explicit Jordan-Wigner sign bookkeeping, so it
    is an independent cross-check of the ordered-sector construction.
    """
    states = [
        sum(1 << x for x in xs)
        for xs in itertools.combinations(range(length), n)
    ]
    index = {s: i for i, s in enumerate(states)}
    dim = len(states)
    rows, cols, vals = [], [], []
    for i, s in enumerate(states):
        diag = v * sum(
            1 for x in range(length - 1) if (s >> x) & 1 and (s >> (x + 1)) & 1
        )
        if diag:
            rows.append(i)
            cols.append(i)
            vals.append(diag)
        for x in range(length - 1):
            a, b = (s >> x) & 1, (s >> (x + 1)) & 1
            if a != b:
                flipped = s ^ (1 << x) ^ (1 << (x + 1))
                # fermions between the two sites: none for adjacent hops
                rows.append(index[flipped])
                cols.append(i)
                vals.append(-t)
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim)), states


def q2_sector_ground(length: int, n: int, t: float, v: float) -> float:
    h, _ = q2_sector_hamiltonian(length, n, t, v)
    if h.shape[0] <= 1500:
        return float(np.linalg.eigvalsh(h.toarray())[0])
    v0 = np.random.default_rng(0xED).standard_normal(h.shape[0])
    return float(spla.eigsh(h, k=1, which="SA", tol=0, maxiter=10000, v0=v0)[0][0])


# ---------------------------------------------------------------------------
# dense bridges


def mpo_to_dense(op, max_dim: int = DEFAULT_DENSE_DIM_CAP) -> np.ndarray:
    """Exact dense matrix of an MPO in the lexicographic product basis."""
    dim = 1
    for d in op.phys_dims:
        dim *= d
    if dim > max_dim:
        raise OracleSizeError(f"dense dimension {dim} exceeds cap {max_dim}")
    mat = np.ones((1, 1, 1))  # (out, in, bond)
    for w in op.tensors:
        mat = np.tensordot(mat, w, axes=([2], [0]))  # (out, in, s, s', bond)
        o, i, s, si, b = mat.shape
        mat = mat.transpose(0, 2, 1, 3, 4).reshape(o * s, i * si, b)
    return mat[:, :, 0]


def exact_q_entropy(psi: np.ndarray, q_max: int, cut: int) -> float:
    """Entropy of a dense hypercube state across ``cut`` (first ``cut`` sites)."""
    size = psi.size
    n = round(np.log(size) / np.log(q_max))
    if q_max**n != size:
        raise ValueError("state length is not a power of q_max")
    if not 1 <= cut <= n - 1:
        raise ValueError(f"cut {cut} outside [1, {n - 1}]")
    mat = np.asarray(psi).reshape(q_max**cut, -1)
    s = np.linalg.svd(mat, compute_uv=False)
    return entropy_from_singular_values(s)
