"""Built-in validation suite binding the solver paths to their oracles.

Every check cross-validates an independent pair: MPO builders against
brute-force Kronecker constructions, the ordered-sector diagonalization
against the signed occupation-number sector, TDVP against exact evolution,
MPS entropies against dense reshapes. The quick tier runs in well under
two minutes; the full tier adds the larger scans and the entropy-scaling
table.
"""

from __future__ import annotations

import itertools
import time

import numpy as np

from . import oracle
from .checkpoint import load_state, save_state
from .dmrg import DmrgConfig, dmrg_run
from .eos import eos_maxwell
from .mpo import (
    ModelParams,
    assemble_hamiltonian,
    build_ht,
    build_hv,
    build_projector_C,
    hole_params,
    identity,
    proj,
    shift_down,
    shift_up,
)
from .mps import entropy_profile, inner, mps_from_dense, product_state
from .observables import (
    occupation_profile,
    occupation_profile_naive,
    particle_entropy_bound,
)
from .tdvp import TdvpConfig, expand_bond_basis, tdvp_run


def kron_chain(ops) -> np.ndarray:
    out = ops[0]
    for o in ops[1:]:
        out = np.kron(out, o)
    return out


def dense_ht(params: ModelParams, literal_eq8: bool = False) -> np.ndarray:
    """Brute-force kinetic operator on the distance hypercube."""
    n, d, t = params.particles, params.q_max, params.t
    eye, low, up = identity(d), shift_down(d), shift_up(d)
    dim = d**n
    out = np.zeros((dim, dim))
    for k in range(n - 1):
        o1 = [eye] * n
        o1[k], o1[k + 1] = up, low
        o2 = [eye] * n
        o2[k], o2[k + 1] = low, up
        out += -t * (kron_chain(o1) + kron_chain(o2))
    if not literal_eq8:
        o = [eye] * n
        o[n - 1] = low + up
        out += -t * kron_chain(o)
    return out


def dense_hv(params: ModelParams) -> np.ndarray:
    n, d, v = params.particles, params.q_max, params.v
    dim = d**n
    out = np.zeros((dim, dim))
    for k in range(1, n):
        o = [identity(d)] * n
        o[k] = proj(1, d)
        out += v * kron_chain(o)
    return out


def dense_projector(params: ModelParams) -> np.ndarray:
    """Enumerated ordered-sector projector (exact or truncated semantics)."""
    n, d = params.particles, params.q_max
    limit = params.slack_limit
    diag = np.zeros(d**n)
    for i, qs in enumerate(itertools.product(range(1, d + 1), repeat=n)):
        if sum(qs) - n <= limit:
            diag[i] = 1.0
    return np.diag(diag)


def dense_assembled(params: ModelParams) -> np.ndarray:
    """Independently built penalized Hamiltonian (boxed lone hop)."""
    n, d = params.particles, params.q_max
    pc = dense_projector(params)
    lam = params.lam
    pairs = dense_ht(params, literal_eq8=True)
    o = [identity(d)] * n
    o[n - 1] = shift_down(d) + shift_up(d)
    lone = -params.t * kron_chain(o)
    out = pairs + pc @ lone @ pc + dense_hv(params)
    out += lam * (np.eye(d**n) - pc)
    if params.mode == "hole":
        edge1 = [identity(d)] * n
        edge1[0] = proj(1, d)
        out += params.v * kron_chain(edge1)
        diag = np.zeros(d**n)
        for i, qs in enumerate(itertools.product(range(1, d + 1), repeat=n)):
            if sum(qs) == params.sites:
                diag[i] = 1.0
        out += params.v * np.diag(diag)
    return out


def dense_q2(length: int, t: float, v: float) -> np.ndarray:
    """Occupation-basis Hamiltonian from ladder-operator Kronecker products."""
    create = np.array([[0.0, 0.0], [1.0, 0.0]])
    destroy = create.T
    num = np.diag([0.0, 1.0])
    eye = np.eye(2)
    dim = 2**length
    out = np.zeros((dim, dim))
    for k in range(length - 1):
        o1 = [eye] * length
        o1[k], o1[k + 1] = create, destroy
        o2 = [eye] * length
        o2[k], o2[k + 1] = destroy, create
        o3 = [eye] * length
        o3[k], o3[k + 1] = num, num
        out += -t * (kron_chain(o1) + kron_chain(o2)) + v * kron_chain(o3)
    return out


# ---------------------------------------------------------------------------
# checks


def check_mpo_vs_dense(full: bool) -> dict:
    sizes = []
    for n in range(1, 5):
        for d in (2, 3, 4):
            if full or (n <= 3 and d <= 3) or (n == 4 and d == 2):
                sizes.append((n, d))
    worst = 0.0
    cases = 0
    for n, d in sizes:
        for sites in {n, n + 2, n + d - 1, n + d + 2}:
            if sites < n:
                continue
            for rep in ("exact", "truncated"):
                p = ModelParams(
                    t=1.0, v=1.7, sites=sites, particles=n, q_max=d,
                    penalty=9.0, projector=rep,
                )
                pc = oracle.mpo_to_dense(build_projector_C(p))
                ref = dense_projector(p)
                worst = max(worst, float(np.abs(pc - ref).max()))
                worst = max(worst, float(np.abs(pc @ pc - pc).max()))
                hp = oracle.mpo_to_dense(assemble_hamiltonian(p))
                worst = max(worst, float(np.abs(hp - dense_assembled(p)).max()))
                cases += 1
            p = ModelParams(t=1.0, v=1.7, sites=sites, particles=n, q_max=d)
            worst = max(
                worst,
                float(np.abs(oracle.mpo_to_dense(build_hv(p)) - dense_hv(p)).max()),
            )
            for literal in (False, True):
                ht = oracle.mpo_to_dense(build_ht(p, literal_eq8=literal))
                worst = max(
                    worst, float(np.abs(ht - dense_ht(p, literal)).max())
                )
    passed = worst < 1e-13
    return {"passed": passed, "max_error": worst, "cases": cases}


def check_sector_equivalence(full: bool) -> dict:
    lengths = range(2, 11) if full else (4, 6, 8)
    worst = 0.0
    cases = 0
    for length in lengths:
        particle_range = range(1, length + 1) if full else (1, length // 2, length)
        for n in sorted(set(particle_range)):
            if n < 1:
                continue
            for v in (0.0, 1.0, 8.0):
                p = ModelParams(t=1.0, v=v, sites=length, particles=n,
                                q_max=max(2, min(10, length + 1 - n)))
                e1, _, _ = oracle.constrained_ed_ground(p)
                e2 = oracle.q2_sector_ground(length, n, 1.0, v)
                worst = max(worst, abs(e1 - e2))
                cases += 1
    return {"passed": worst < 1e-12, "max_error": worst, "cases": cases}


def check_literal_form_sentinel(_: bool) -> dict:
    """The printed kinetic form (no lone hop) must fail sector equivalence."""
    p = ModelParams(t=1.0, v=0.0, sites=8, particles=4, q_max=5)
    pc = dense_projector(p)
    h_lit = dense_ht(p, literal_eq8=True) + dense_hv(p)
    h_boxed = pc @ h_lit @ pc
    mask = np.diag(pc) > 0.5
    sub = h_boxed[np.ix_(mask, mask)]
    e_lit = float(np.linalg.eigvalsh(sub)[0])
    e_ref = oracle.q2_sector_ground(8, 4, 1.0, 0.0)
    gap = abs(e_lit - e_ref)
    return {"passed": gap > 1e-3, "mismatch": gap}


def check_tdvp_vs_ed(_: bool) -> dict:
    p = ModelParams(t=1.0, v=0.0, sites=8, particles=4, q_max=5, penalty=20.0)
    h = assemble_hamiltonian(p)
    psi0 = product_state([1] * 4, 5).astype(complex)
    psi0 = expand_bond_basis(h, psi0, 32)
    cfg = TdvpConfig(dt=0.02, t_final=0.5, max_bond=32, measure_stride=25)
    traj = tdvp_run(h, psi0, cfg)
    basis = oracle.ConstrainedBasis.build(8, 4)
    v0 = np.zeros(len(basis))
    v0[basis.index[(1, 1, 1, 1)]] = 1.0
    ref = basis.embed(oracle.constrained_ed_evolve(p, v0, 0.5, basis), 5)
    err = float(np.linalg.norm(traj.final_state.to_dense() - ref))
    return {"passed": err < 1e-8, "vector_error": err}


def check_dmrg_free(_: bool) -> dict:
    p = ModelParams(t=1.0, v=0.0, sites=12, particles=6, q_max=7)
    h = assemble_hamiltonian(p)
    cfg = DmrgConfig(max_sweeps=14, bond_schedule=(8, 16, 32), energy_tol=1e-10)
    _, reports = dmrg_run(h, product_state([1] + [2] * 5, 7), cfg,
                          leakage_op=build_projector_C(p))
    err = abs(reports[-1].energy - oracle.free_ground_energy(12, 6))
    leak = reports[-1].leakage
    return {"passed": err < 1e-8 and leak < 1e-6, "energy_error": err,
            "leakage": leak}


def check_dmrg_interacting(full: bool) -> dict:
    if not full:
        return {"passed": True, "skipped": "full tier only"}
    p = ModelParams(t=1.0, v=8.0, sites=12, particles=6, q_max=7)
    h = assemble_hamiltonian(p)
    cfg = DmrgConfig(max_sweeps=16, bond_schedule=(8, 16, 32, 64),
                     energy_tol=1e-11)
    _, reports = dmrg_run(h, product_state([1] + [2] * 5, 7), cfg,
                          leakage_op=build_projector_C(p))
    e_ref, _, _ = oracle.constrained_ed_ground(p)
    err = abs(reports[-1].energy - e_ref)
    return {"passed": err < 1e-9, "energy_error": err}


def check_entropy_cross(_: bool) -> dict:
    p = ModelParams(t=1.0, v=0.0, sites=10, particles=5, q_max=6)
    energy, vec, basis = oracle.constrained_ed_ground(p)
    emb = basis.embed(vec, 6)
    state = mps_from_dense(emb, [6] * 5)
    prof = entropy_profile(state)
    worst = 0.0
    for cut in range(1, 5):
        s_ref = oracle.exact_q_entropy(emb, 6, cut)
        worst = max(worst, abs(prof[cut - 1] - s_ref))
    return {"passed": worst < 1e-6, "max_error": worst}


def check_occupation_paths(_: bool) -> dict:
    p = ModelParams(t=1.0, v=1.0, sites=8, particles=3, q_max=6)
    energy, vec, basis = oracle.constrained_ed_ground(p)
    state = mps_from_dense(basis.embed(vec, 6), [6] * 3)
    fast = occupation_profile(state, p)
    slow = occupation_profile_naive(state, p)
    err = float(np.abs(fast - slow).max())
    total = abs(fast.sum() - 3)
    return {"passed": err < 1e-10 and total < 1e-8, "path_difference": err,
            "sum_error": total}


def check_hole_particle(full: bool) -> dict:
    worst = 0.0
    lengths = (8, 10) if full else (8,)
    for length in lengths:
        for n in range(max(1, length // 2 - 1), length // 2 + 2):
            pp = ModelParams(t=1.0, v=1.0, sites=length, particles=n, q_max=8)
            hp, offset = hole_params(pp)
            e_p, _, _ = oracle.constrained_ed_ground(pp)
            e_h, _, _ = oracle.constrained_ed_ground(hp)
            worst = max(worst, abs(e_p - (e_h + offset)))
    return {"passed": worst < 1e-12, "max_error": worst}


def check_checkpoint_roundtrip(_: bool, tmp_dir: str | None = None) -> dict:
    import os
    import tempfile

    p = ModelParams(t=1.0, v=0.0, sites=8, particles=4, q_max=5)
    state = product_state([1, 2, 2, 2], 5).astype(complex)
    with tempfile.TemporaryDirectory(dir=tmp_dir) as tmp:
        path = os.path.join(tmp, "state.ckpt")
        save_state(path, state, p, extra={"kind": "test"})
        loaded, params, extra = load_state(path)
        same = all(
            np.array_equal(a, b) for a, b in zip(state.tensors, loaded.tensors)
        )
        overlap = inner(state, loaded)
    return {"passed": same and abs(overlap - 1) < 1e-12,
            "bit_exact": same, "overlap_error": abs(overlap - 1)}


def check_eos_plateaus(full: bool) -> dict:
    if not full:
        return {"passed": True, "skipped": "full tier only"}
    sites = 12
    gaps = {}
    for v in (1.0, 8.0):
        energies = {}
        for n in range(4, 9):
            p = ModelParams(t=1.0, v=v, sites=sites, particles=n, q_max=9)
            e, _, _ = oracle.constrained_ed_ground(p)
            energies[n] = e
        table = eos_maxwell(energies, sites)
        gaps[v] = table.charge_gap(6)
    return {
        "passed": bool(gaps[8.0] > 7 * gaps[1.0] and gaps[8.0] / sites > 0.5),
        "gap_v1": gaps[1.0],
        "gap_v8": gaps[8.0],
    }


def check_entropy_scaling_table(full: bool) -> dict:
    """Bound vs distance-MPS vs occupation-basis entropies at half filling."""
    if not full:
        return {"passed": True, "skipped": "full tier only"}
    rows = []
    ok = True
    for n in (8, 12, 16):
        length = 2 * n
        bound = particle_entropy_bound(n, n // 2)
        p = ModelParams(t=1.0, v=0.0, sites=length, particles=n,
                        q_max=min(10, length + 1 - n))
        h = assemble_hamiltonian(p)
        cfg = DmrgConfig(max_sweeps=12, bond_schedule=(8, 16, 32, 48),
                         energy_tol=1e-9)
        gs, _ = dmrg_run(h, product_state([1] + [2] * (n - 1), p.q_max), cfg)
        s_q1 = float(entropy_profile(gs).max())
        c = oracle.correlation_matrix(length, n, 0.0, initial="ground")
        s_q2 = oracle.block_entropy_from_correlations(c, range(length // 2))
        rows.append({"particles": n, "bound": bound, "q1_max": s_q1,
                     "q2_half_chain": s_q2})
        ok = ok and s_q1 < 0.5 * bound and s_q1 < 2.5 * s_q2
    return {"passed": ok, "table": rows}


CHECKS = [
    ("mpo_vs_dense", check_mpo_vs_dense, "quick"),
    ("sector_equivalence", check_sector_equivalence, "quick"),
    ("literal_form_sentinel", check_literal_form_sentinel, "quick"),
    ("tdvp_vs_ed", check_tdvp_vs_ed, "quick"),
    ("dmrg_free", check_dmrg_free, "quick"),
    ("entropy_cross_validation", check_entropy_cross, "quick"),
    ("occupation_two_paths", check_occupation_paths, "quick"),
    ("hole_particle_offset", check_hole_particle, "quick"),
    ("checkpoint_roundtrip", check_checkpoint_roundtrip, "quick"),
    ("dmrg_interacting", check_dmrg_interacting, "full"),
    ("eos_plateaus", check_eos_plateaus, "full"),
    ("entropy_scaling_table", check_entropy_scaling_table, "full"),
]


def validate_suite(tier: str = "quick") -> dict:
    """Run the oracle cross-checks; returns a machine-readable report."""
    if tier not in ("quick", "full"):
        raise ValueError(f"tier must be quick or full, got {tier!r}")
    full = tier == "full"
    results = []
    all_passed = True
    for name, fn, _min_tier in CHECKS:
        t0 = time.perf_counter()
        try:
            out = fn(full)
        except Exception as exc:  # a crashed check is a failed check
            out = {"passed": False, "error": f"{type(exc).__name__}: {exc}"}
        out["name"] = name
        out["seconds"] = round(time.perf_counter() - t0, 3)
        results.append(out)
        all_passed = all_passed and out["passed"]
    return {"tier": tier, "passed": all_passed, "checks": results}
