"""Matrix product operators for the t-V model in distance coordinates.

All operators act on chains of ``q`` variables (``q_n`` = distance between
consecutive particles, ``q_1`` = position of the first one). Hopping moves
one unit of distance between neighbouring ``q``'s; the interaction counts
``q = 1`` pairs; the ordered-sector constraint ``sum(q) <= L`` is a capped
running-sum automaton. MPO tensors have index order
``(left bond, phys out, phys in, right bond)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .tensor import TruncationPolicy, svd_split


# ---------------------------------------------------------------------------
# local operators on one distance variable


def identity(d: int) -> np.ndarray:
    return np.eye(d)


def proj(m: int, d: int) -> np.ndarray:
    """Projector onto the single distance value ``m`` (1-based)."""
    if not 1 <= m <= d:
        raise ValueError(f"projector value {m} outside [1, {d}]")
    out = np.zeros((d, d))
    out[m - 1, m - 1] = 1.0
    return out


def shift_down(d: int) -> np.ndarray:
    """Lower the distance value by one; annihilates ``q = 1``."""
    return np.eye(d, k=1)


def shift_up(d: int) -> np.ndarray:
    """Raise the distance value by one; annihilates ``q = d`` (the cutoff)."""
    return np.eye(d, k=-1)


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class ModelParams:
    """Physical and representational parameters of one model instance.

    ``particles`` counts MPS sites: physical particles in particle mode,
    holes in hole mode. ``penalty`` is the constraint-violation energy
    scale; ``None`` selects the default ``10 * (2|t| + |v|) * particles``.
    """

    t: float = 1.0
    v: float = 0.0
    sites: int = 8
    particles: int = 4
    q_max: int = 10
    penalty: float | None = None
    mode: str = "particle"
    projector: str = "exact"

    def __post_init__(self):
        if self.sites < 1:
            raise ValueError("sites must be >= 1")
        if not 1 <= self.particles <= self.sites:
            raise ValueError("particles must satisfy 1 <= N <= sites")
        if self.q_max < 2:
            raise ValueError("q_max must be >= 2")
        if self.penalty is not None and self.penalty < 0:
            raise ValueError("penalty must be >= 0")
        if self.mode not in ("particle", "hole"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.projector not in ("exact", "truncated"):
            raise ValueError(f"unknown projector representation {self.projector!r}")

    @property
    def lam(self) -> float:
        if self.penalty is not None:
            return self.penalty
        return 10.0 * (2.0 * abs(self.t) + abs(self.v)) * self.particles

    @property
    def slack_limit(self) -> int:
        """Largest allowed total slack ``sum(q) - N`` of the projector."""
        if self.projector == "exact":
            return self.sites - self.particles
        return self.q_max - 1


def hole_params(params: ModelParams) -> tuple[ModelParams, float]:
    """Hole-picture parameters and the energy offset.

    ``E_particle(N) = E_hole(L - N) + offset`` with
    ``offset = (L - 1) V - 2 V N_h``.
    """
    if params.mode != "particle":
        raise ValueError("hole_params expects particle-mode input")
    n_h = params.sites - params.particles
    if n_h < 1:
        raise ValueError("hole picture needs at least one hole")
    hp = replace(params, particles=n_h, mode="hole")
    offset = (params.sites - 1) * params.v - 2.0 * params.v * n_h
    return hp, offset


def energy_offset(params: ModelParams) -> float:
    """Constant to add to eigenvalues to express them in the particle sector."""
    if params.mode == "hole":
        return (params.sites - 1) * params.v - 2.0 * params.v * params.particles
    return 0.0


# ---------------------------------------------------------------------------
# MPO container and generic algebra


@dataclass
class Mpo:
    """Finite MPO with open boundaries, tensors ``(wl, out, in, wr)``."""

    tensors: list[np.ndarray]

    def __post_init__(self):
        if not self.tensors:
            raise ValueError("an MPO needs at least one site")
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


def zero_mpo(n_sites: int, d: int) -> Mpo:
    return Mpo([np.zeros((1, d, d, 1)) for _ in range(n_sites)])


def identity_mpo(n_sites: int, d: int) -> Mpo:
    return Mpo([np.eye(d).reshape(1, d, d, 1) for _ in range(n_sites)])


def mpo_scale(op: Mpo, factor: float) -> Mpo:
    tensors = [t.copy() for t in op.tensors]
    tensors[0] = tensors[0] * factor
    return Mpo(tensors)


def mpo_add(a: Mpo, b: Mpo) -> Mpo:
    """Direct-sum addition of two MPOs on the same site space."""
    if a.n_sites != b.n_sites or a.phys_dims != b.phys_dims:
        raise ValueError("MPOs live on different site spaces")
    n = a.n_sites
    if n == 1:
        return Mpo([a.tensors[0] + b.tensors[0]])
    tensors = []
    for i, (ta, tb) in enumerate(zip(a.tensors, b.tensors)):
        la, d, _, ra = ta.shape
        lb, _, _, rb = tb.shape
        if i == 0:
            w = np.concatenate([ta, tb], axis=3)
        elif i == n - 1:
            w = np.concatenate([ta, tb], axis=0)
        else:
            w = np.zeros((la + lb, d, d, ra + rb), dtype=np.result_type(ta, tb))
            w[:la, :, :, :ra] = ta
            w[la:, :, :, ra:] = tb
        tensors.append(w)
    return Mpo(tensors)


def mpo_compress(op: Mpo, cutoff: float = 1e-14, max_bond: int | None = None) -> Mpo:
    """Deterministic SVD compression; exact at the default cutoff."""
    n = op.n_sites
    if n == 1:
        return Mpo([t.copy() for t in op.tensors])
    tensors = [t.copy() for t in op.tensors]
    # right-canonicalize (QR from the right) without truncation
    for i in range(n - 1, 0, -1):
        wl, so, si, wr = tensors[i].shape
        mat = tensors[i].reshape(wl, so * si * wr)
        q, r = np.linalg.qr(mat.T)
        k = q.shape[1]
        tensors[i] = q.T.reshape(k, so, si, wr)
        tensors[i - 1] = np.tensordot(tensors[i - 1], r.T, axes=([3], [0]))
    policy = TruncationPolicy(
        max_bond=max_bond if max_bond is not None else 2**30,
        discard_tolerance=0.0,
    )
    for i in range(n - 1):
        wl, so, si, wr = tensors[i].shape
        u, s, v, _ = svd_split(tensors[i].reshape(wl * so * si, wr), [0], policy)
        keep = int(np.sum(s > cutoff * s[0])) if s.size else 1
        keep = max(1, keep)
        u, s, v = u[:, :keep], s[:keep], v[:keep]
        tensors[i] = u.reshape(wl, so, si, keep)
        carry = s[:, None] * v
        tensors[i + 1] = np.tensordot(carry, tensors[i + 1], axes=([1], [0]))
    return Mpo(tensors)


# ---------------------------------------------------------------------------
# model builders


def build_hv(params: ModelParams) -> Mpo:
    """Nearest-neighbour interaction ``V * sum_{n>=2} proj(1)`` (diagonal)."""
    n, d, v = params.particles, params.q_max, params.v
    if n == 1:
        return zero_mpo(1, d)
    eye = identity(d)
    vp1 = v * proj(1, d)
    first = np.zeros((1, d, d, 2))
    first[0, :, :, 1] = eye
    bulk = np.zeros((2, d, d, 2))
    bulk[0, :, :, 0] = eye
    bulk[1, :, :, 0] = vp1
    bulk[1, :, :, 1] = eye
    last = np.zeros((2, d, d, 1))
    last[0, :, :, 0] = eye
    last[1, :, :, 0] = vp1
    return Mpo([first] + [bulk.copy() for _ in range(n - 2)] + [last])


def build_ht(params: ModelParams, literal_eq8: bool = False) -> Mpo:
    """Kinetic term: distance-exchange pairs plus the lone hop of the last
    particle (the only one whose move changes a single ``q``).

    ``literal_eq8`` drops that lone term, freezing the last particle; kept
    for comparison because the two variants have measurably different
    spectra.
    """
    n, d, t = params.particles, params.q_max, params.t
    low, up, eye = shift_down(d), shift_up(d), identity(d)
    lone = -t * (low + up)
    if n == 1:
        return Mpo([np.zeros((1, d, d, 1))]) if literal_eq8 else Mpo(
            [lone.reshape(1, d, d, 1)]
        )
    # channels: 0 done, 1 completes with shift_up, 2 completes with
    # shift_down, 3 waiting
    first = np.zeros((1, d, d, 4))
    first[0, :, :, 1] = -t * low
    first[0, :, :, 2] = -t * up
    first[0, :, :, 3] = eye
    bulk = np.zeros((4, d, d, 4))
    bulk[0, :, :, 0] = eye
    bulk[1, :, :, 0] = up
    bulk[2, :, :, 0] = low
    bulk[3, :, :, 1] = -t * low
    bulk[3, :, :, 2] = -t * up
    bulk[3, :, :, 3] = eye
    last = np.zeros((4, d, d, 1))
    last[0, :, :, 0] = eye
    last[1, :, :, 0] = up
    last[2, :, :, 0] = low
    if not literal_eq8:
        last[3, :, :, 0] = lone
    return Mpo([first] + [bulk.copy() for _ in range(n - 2)] + [last])


def _counter_bond_sizes(n: int, d: int, cap: int) -> list[int]:
    """Reachable slack-counter states after each of the first ``n-1`` sites."""
    return [min((i + 1) * (d - 1), cap) + 1 for i in range(n - 1)]


def build_projector_C(params: ModelParams) -> Mpo:
    """Diagonal projector onto total slack ``sum(q) - N <= slack_limit``.

    The exact representation caps the running sum at ``L - N`` (bond grows
    with system size); the truncated one caps it at ``q_max - 1``, which
    enforces the stricter prefix bound ``x_n <= n + q_max - 1``.
    """
    n, d = params.particles, params.q_max
    limit = params.slack_limit
    cap = min(limit, n * (d - 1))
    if n == 1:
        w = np.zeros((1, d, d, 1))
        for q in range(1, d + 1):
            if q - 1 <= limit:
                w[0, q - 1, q - 1, 0] = 1.0
        return Mpo([w])
    bonds = _counter_bond_sizes(n, d, cap)
    tensors = []
    first = np.zeros((1, d, d, bonds[0]))
    for q in range(1, d + 1):
        if q - 1 <= cap:
            first[0, q - 1, q - 1, q - 1] = 1.0
    tensors.append(first)
    for i in range(1, n - 1):
        w = np.zeros((bonds[i - 1], d, d, bonds[i]))
        for b in range(bonds[i - 1]):
            for q in range(1, d + 1):
                nb = b + q - 1
                if nb <= cap:
                    w[b, q - 1, q - 1, nb] = 1.0
        tensors.append(w)
    last = np.zeros((bonds[-1], d, d, 1))
    for b in range(bonds[-1]):
        for q in range(1, d + 1):
            if b + q - 1 <= limit:
                last[b, q - 1, q - 1, 0] = 1.0
    tensors.append(last)
    return Mpo(tensors)


def build_position_projector(params: ModelParams, alpha: int, x: int) -> Mpo:
    """Diagonal projector onto ``x_alpha = x`` (1-based particle index)."""
    n, d = params.particles, params.q_max
    if not 1 <= alpha <= n:
        raise ValueError(f"alpha {alpha} outside [1, {n}]")
    if x > params.sites:
        raise ValueError(f"x {x} beyond the last site {params.sites}")
    if x < alpha:
        return zero_mpo(n, d)
    eye = identity(d).reshape(1, d, d, 1)
    target = x - alpha  # slack accumulated by particle alpha
    cap = min(target, alpha * (d - 1))
    if cap < target:
        return zero_mpo(n, d)
    if alpha == 1:
        head = [proj(x, d).reshape(1, d, d, 1)] if x <= d else None
        if head is None:
            return zero_mpo(n, d)
        return Mpo(head + [eye.copy() for _ in range(n - 1)])
    bonds = _counter_bond_sizes(alpha, d, cap)
    tensors = []
    first = np.zeros((1, d, d, bonds[0]))
    for q in range(1, d + 1):
        if q - 1 <= cap:
            first[0, q - 1, q - 1, q - 1] = 1.0
    tensors.append(first)
    for i in range(1, alpha - 1):
        w = np.zeros((bonds[i - 1], d, d, bonds[i]))
        for b in range(bonds[i - 1]):
            for q in range(1, d + 1):
                nb = b + q - 1
                if nb <= cap:
                    w[b, q - 1, q - 1, nb] = 1.0
        tensors.append(w)
    last = np.zeros((bonds[alpha - 2], d, d, 1))
    for b in range(bonds[alpha - 2]):
        q = target - b + 1
        if 1 <= q <= d:
            last[b, q - 1, q - 1, 0] = 1.0
    tensors.append(last)
    tensors.extend(eye.copy() for _ in range(n - alpha))
    return Mpo(tensors)


def assemble_hamiltonian(params: ModelParams, compress: bool = True) -> Mpo:
    """Penalized working Hamiltonian ``H' = H_t + H_V + lam (1 - P_C)``.

    For ``lam > 0`` the lone last-particle hop is routed through the same
    running-sum automaton as the projector, so hops that would leave the
    box are suppressed exactly and ``[H', P_C] = 0``: the physical sector
    is penalty-strength independent and leakage is pure truncation noise.
    With ``lam = 0`` the plain sum of the standalone builders is returned.

    Hole mode adds the edge potentials ``v * proj(1)`` on the first site
    and ``v * [x_N = L]`` on the counter; the constant
    ``(L - 1) v - 2 v N_h`` is reported by :func:`energy_offset`, never
    baked into the operator.
    """
    n, d = params.particles, params.q_max
    t, v, lam = params.t, params.v, params.lam
    hole = params.mode == "hole"
    if lam == 0.0:
        out = mpo_add(build_ht(params), build_hv(params))
        if hole:
            out = mpo_add(out, _hole_edge_mpo(params))
        return mpo_compress(out) if compress else out
    limit = params.slack_limit
    cap = min(limit, n * (d - 1))
    low, up, eye = shift_down(d), shift_up(d), identity(d)
    exact_hit = params.sites - params.particles  # slack at which x_N == L

    def last_site_counter_payload(b: int) -> np.ndarray:
        """Operator emitted when the counter closes in state ``b``."""
        out = np.zeros((d, d))
        for q in range(1, d + 1):
            if b + q - 1 <= limit:
                out[q - 1, q - 1] -= lam  # -lam * P_C
                if hole and b + q - 1 == exact_hit:
                    out[q - 1, q - 1] += v
            for qp in (q - 1, q + 1):
                if 1 <= qp <= d and b + q - 1 <= limit and b + qp - 1 <= limit:
                    out[qp - 1, q - 1] += -t  # boxed lone hop
        return out

    if n == 1:
        w = last_site_counter_payload(0) + lam * eye
        if hole:
            w = w + v * proj(1, d)
        return Mpo([w.reshape(1, d, d, 1)])

    bonds = [4 + b for b in _counter_bond_sizes(n, d, cap)]
    tensors = []
    first = np.zeros((1, d, d, bonds[0]))
    if hole:
        first[0, :, :, 0] = v * proj(1, d)
    first[0, :, :, 1] = -t * low
    first[0, :, :, 2] = -t * up
    first[0, :, :, 3] = eye
    for q in range(1, d + 1):
        if q - 1 <= cap:
            first[0, q - 1, q - 1, 4 + q - 1] = 1.0
    tensors.append(first)
    counter_bonds = _counter_bond_sizes(n, d, cap)
    for i in range(1, n - 1):
        w = np.zeros((bonds[i - 1], d, d, bonds[i]))
        w[0, :, :, 0] = eye
        w[1, :, :, 0] = up
        w[2, :, :, 0] = low
        w[3, :, :, 0] = v * proj(1, d)
        w[3, :, :, 1] = -t * low
        w[3, :, :, 2] = -t * up
        w[3, :, :, 3] = eye
        for b in range(counter_bonds[i - 1]):
            for q in range(1, d + 1):
                nb = b + q - 1
                if nb <= cap:
                    w[4 + b, q - 1, q - 1, 4 + nb] = 1.0
        tensors.append(w)
    last = np.zeros((bonds[-1], d, d, 1))
    last[0, :, :, 0] = eye
    last[1, :, :, 0] = up
    last[2, :, :, 0] = low
    last[3, :, :, 0] = v * proj(1, d) + lam * eye
    for b in range(counter_bonds[-1]):
        last[4 + b, :, :, 0] = last_site_counter_payload(b)
    tensors.append(last)
    out = Mpo(tensors)
    return mpo_compress(out) if compress else out


def _hole_edge_mpo(params: ModelParams) -> Mpo:
    """Edge potentials of the hole picture as a standalone MPO."""
    n, d, v = params.particles, params.q_max, params.v
    site1 = zero_mpo(n, d)
    site1.tensors[0][0, :, :, 0] = v * proj(1, d)
    for i in range(1, n):
        site1.tensors[i][0] = identity(d)
    edge_l = mpo_scale(
        build_position_projector(
            replace(params, mode="particle"), n, params.sites
        ),
        v,
    )
    return mpo_add(site1, edge_l)


def build_q2_tv(params: ModelParams) -> Mpo:
    """Occupation-basis t-V Hamiltonian on ``sites`` two-level sites."""
    length, t, v = params.sites, params.t, params.v
    create = np.array([[0.0, 0.0], [1.0, 0.0]])
    destroy = create.T
    num = np.diag([0.0, 1.0])
    eye = np.eye(2)
    if length == 1:
        return zero_mpo(1, 2)
    # channels: 0 done, 1 completes with destroy, 2 with create, 3 with num,
    # 4 waiting
    first = np.zeros((1, 2, 2, 5))
    first[0, :, :, 1] = -t * create
    first[0, :, :, 2] = -t * destroy
    first[0, :, :, 3] = v * num
    first[0, :, :, 4] = eye
    bulk = np.zeros((5, 2, 2, 5))
    bulk[0, :, :, 0] = eye
    bulk[1, :, :, 0] = destroy
    bulk[2, :, :, 0] = create
    bulk[3, :, :, 0] = num
    bulk[4, :, :, 1] = -t * create
    bulk[4, :, :, 2] = -t * destroy
    bulk[4, :, :, 3] = v * num
    bulk[4, :, :, 4] = eye
    last = np.zeros((5, 2, 2, 1))
    last[0, :, :, 0] = eye
    last[1, :, :, 0] = destroy
    last[2, :, :, 0] = create
    last[3, :, :, 0] = num
    return Mpo([first] + [bulk.copy() for _ in range(length - 2)] + [last])
