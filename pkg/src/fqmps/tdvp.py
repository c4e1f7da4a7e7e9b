"""Single-site TDVP real-time evolution, second-order symmetric splitting.

One step is a left-to-right half-sweep (every site evolved forward by
``dt/2``, every bond backward by ``dt/2``) followed by the mirrored
right-to-left half-sweep. The rank is fixed during evolution, so bond
growth is provided up front by :func:`expand_bond_basis`, which enriches
the bond spaces with Hamiltonian half-contractions while leaving the state
vector untouched.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import contractor as ctr
from .mpo import Mpo
from .mps import Mps, canonicalize, entropy_profile
from .tensor import TruncationPolicy, krylov_expv, qr_split, svd_split

_EXPANSION_WEIGHT = 1e-8
_EXPANSION_POLICY = TruncationPolicy(max_bond=2**30, discard_tolerance=0.0)


@dataclass(frozen=True)
class TdvpConfig:
    dt: float = 0.02
    t_final: float = 4.0
    max_bond: int = 64
    krylov_tol: float = 1e-10
    krylov_max_dim: int = 60
    measure_stride: int = 10
    expansion_passes: int | None = None  # None: grow until max_bond or stall

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be >= 0")
        if self.measure_stride < 1:
            raise ValueError("measure_stride must be >= 1")


@dataclass
class Trajectory:
    """Observable rows collected during one evolution."""

    times: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    entropy_profiles: list = field(default_factory=list)
    q_profiles: list = field(default_factory=list)
    occupations: list = field(default_factory=list)
    leakages: list = field(default_factory=list)
    max_discarded: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    final_state: Mps | None = None


def expand_bond_basis(
    h: Mpo, state: Mps, max_bond: int, passes: int | None = None
) -> Mps:
    """Enrich bond spaces toward ``max_bond`` without changing the vector.

    Concatenates a tiny multiple of the Hamiltonian half-contraction onto
    each site tensor and keeps the leading directions; padded zero rows in
    the neighbouring tensor guarantee the encoded state is unchanged. With
    ``passes=None`` the sweep repeats until every interior bond saturates
    (reaches ``max_bond`` or its dimensional cap) or growth stalls.
    """
    work = canonicalize(state, 0)
    tensors = work.tensors
    n = len(tensors)
    if n == 1:
        return work
    sops = ctr.site_operators(h)
    dtype = np.result_type(tensors[0].dtype, h.tensors[0].dtype)
    phys = [t.shape[1] for t in tensors]
    caps = []
    acc = 1
    for d in phys[:-1]:
        acc = min(acc * d, 2**30)
        caps.append(acc)
    acc = 1
    for j in range(n - 2, -1, -1):
        acc = min(acc * phys[j + 1], 2**30)
        caps[j] = min(caps[j], acc, max_bond)
    max_passes = 16 if passes is None else passes
    for _ in range(max_passes):
        previous = [t.shape[-1] for t in tensors[:-1]]
        lenv = ctr.left_boundary(dtype)
        for i in range(n - 1):
            a = tensors[i]
            dl, d, dr = a.shape
            wr = sops[i].shape[3]
            # seed with the orthonormal column basis so directions generated
            # in earlier passes feed the half-contraction at full weight
            basis_q, _ = qr_split(a, [0, 1])
            p = ctr.half_contract_left(lenv, sops[i], basis_q)
            pn = float(np.linalg.norm(p))
            scale = _EXPANSION_WEIGHT / pn if pn > 0.0 else 0.0
            m = np.concatenate([a, scale * p], axis=2)
            u, s, v, _ = svd_split(m, [0, 1], _EXPANSION_POLICY)
            k = min(s.size, caps[i])
            u = u[:, :, :k]
            tensors[i] = u
            umat = u.reshape(dl * d, k)
            carry = umat.conj().T @ a.reshape(dl * d, dr)
            tensors[i + 1] = np.tensordot(carry, tensors[i + 1], axes=([1], [0]))
            lenv = ctr.update_left_env(lenv, u, sops[i], u)
        # mirrored pass enriching the left bonds
        renv = ctr.left_boundary(dtype)
        for i in range(n - 1, 0, -1):
            a = tensors[i]
            dl, d, dr = a.shape
            qt, _ = qr_split(a.transpose(2, 1, 0), [0, 1])
            basis_q = qt.reshape(dr, d, qt.shape[-1]).transpose(2, 1, 0)
            p = ctr.half_contract_right(sops[i], renv, basis_q)
            pn = float(np.linalg.norm(p))
            scale = _EXPANSION_WEIGHT / pn if pn > 0.0 else 0.0
            m = np.concatenate([a, scale * p], axis=0)
            u, s, v, _ = svd_split(m, [0], _EXPANSION_POLICY)
            k = min(s.size, caps[i - 1])
            v = v[:k]
            tensors[i] = v.reshape(k, d, dr)
            vmat = v.reshape(k, d * dr)
            carry = a.reshape(dl, d * dr) @ vmat.conj().T
            tensors[i - 1] = np.tensordot(tensors[i - 1], carry, axes=([2], [0]))
            renv = ctr.update_right_env(tensors[i], sops[i], tensors[i], renv)
        if passes is None and [t.shape[-1] for t in tensors[:-1]] == previous:
            break
    out = Mps(tensors, center=0, norm_log=work.norm_log)
    return canonicalize(out, 0)


class _TdvpEngine:
    def __init__(self, h: Mpo, state: Mps, config: TdvpConfig):
        if h.n_sites != state.n_sites or h.phys_dims != state.phys_dims:
            raise ValueError("Hamiltonian and state do not match")
        self.h = h
        self.config = config
        self.sops = ctr.site_operators(h)
        work = canonicalize(state, 0).astype(np.complex128)
        self.tensors = work.tensors
        self.norm_log = work.norm_log
        self.n = len(self.tensors)
        self.lenvs = [None] * self.n
        self.renvs = [None] * self.n
        self.lenvs[0] = ctr.left_boundary(np.complex128)
        self.renvs[self.n - 1] = ctr.left_boundary(np.complex128)
        for i in range(self.n - 2, -1, -1):
            self.renvs[i] = ctr.update_right_env(
                self.tensors[i + 1], self.sops[i + 1], self.tensors[i + 1],
                self.renvs[i + 1],
            )

    def _expv(self, apply, x, prefactor):
        return krylov_expv(
            apply, x, prefactor,
            tol=self.config.krylov_tol,
            max_dim=self.config.krylov_max_dim,
        )

    def step(self, dt: float):
        half = 0.5 * dt
        n = self.n
        # left-to-right half-step
        for i in range(n):
            lenv, renv, sop = self.lenvs[i], self.renvs[i], self.sops[i]
            a = self._expv(
                lambda x: ctr.apply_site(lenv, sop, renv, x),
                self.tensors[i], -1j * half,
            )
            if i == n - 1:
                self.tensors[i] = a
                break
            dl, d, dr = a.shape
            q, c = qr_split(a, [0, 1])
            self.tensors[i] = q
            self.lenvs[i + 1] = ctr.update_left_env(lenv, q, sop, q)
            le, re = self.lenvs[i + 1], self.renvs[i]
            c = self._expv(
                lambda x: ctr.apply_bond(le, re, x), c, +1j * half,
            )
            self.tensors[i + 1] = np.tensordot(
                c, self.tensors[i + 1], axes=([1], [0])
            )
        # right-to-left half-step
        for i in range(n - 1, -1, -1):
            lenv, renv, sop = self.lenvs[i], self.renvs[i], self.sops[i]
            a = self._expv(
                lambda x: ctr.apply_site(lenv, sop, renv, x),
                self.tensors[i], -1j * half,
            )
            if i == 0:
                self.tensors[i] = a
                break
            dl, d, dr = a.shape
            qt, ct = qr_split(a.transpose(2, 1, 0), [0, 1])
            k = qt.shape[-1]
            self.tensors[i] = qt.reshape(dr, d, k).transpose(2, 1, 0)
            self.renvs[i - 1] = ctr.update_right_env(
                self.tensors[i], sop, self.tensors[i], self.renvs[i]
            )
            le, re = self.lenvs[i], self.renvs[i - 1]
            c = self._expv(
                lambda x: ctr.apply_bond(le, re, x),
                ct.reshape(k, dl).T.copy(), +1j * half,
            )
            self.tensors[i - 1] = np.tensordot(
                self.tensors[i - 1], c, axes=([2], [0])
            )

    def snapshot(self) -> Mps:
        return Mps(
            [t.copy() for t in self.tensors], center=0, norm_log=self.norm_log
        )


def tdvp_step(h: Mpo, state: Mps, dt: float, config: TdvpConfig | None = None) -> Mps:
    """One symmetric step from a freshly built engine (center at site 0)."""
    config = config or TdvpConfig(dt=dt, t_final=dt)
    engine = _TdvpEngine(h, state, config)
    engine.step(dt)
    return engine.snapshot()


def tdvp_run(
    h: Mpo,
    psi0: Mps,
    config: TdvpConfig,
    observer=None,
    sink=None,
    start_time: float = 0.0,
) -> Trajectory:
    """Evolve to ``t_final``, recording observables every ``measure_stride``.

    ``observer(time, state)`` may return a dict with keys ``occupation``,
    ``q_profile``, ``leakage`` plus arbitrary extras; observer failures are
    recorded as warnings and never touch the evolving state. ``sink`` is
    called with each measurement row (for streaming serialization).
    """
    traj = Trajectory()
    engine = _TdvpEngine(h, psi0, config)
    n_steps = max(0, int(round((config.t_final - start_time) / config.dt)))

    def measure(t: float):
        state = engine.snapshot()
        energy = float(np.real(ctr.mpo_expectation(state, h)))
        nrm2 = _norm_squared(state)
        row = {
            "time": t,
            "energy": energy,
            "norm": math.sqrt(nrm2),
            "entropies": entropy_profile(state),
            "max_discarded": 0.0,
        }
        if observer is not None:
            try:
                extra = observer(t, state) or {}
            except Exception as exc:  # observer must not corrupt the run
                traj.warnings.append(f"observer failed at t={t:.4f}: {exc}")
                warnings.warn(traj.warnings[-1], stacklevel=2)
                extra = {}
            row.update(extra)
        traj.times.append(t)
        traj.energies.append(energy)
        traj.norms.append(row["norm"])
        traj.entropy_profiles.append(row["entropies"])
        traj.q_profiles.append(row.get("q_profile"))
        traj.occupations.append(row.get("occupation"))
        traj.leakages.append(row.get("leakage"))
        traj.max_discarded.append(0.0)
        for key, val in row.items():
            if key not in (
                "time", "energy", "norm", "entropies", "max_discarded",
                "q_profile", "occupation", "leakage",
            ):
                traj.extras.setdefault(key, []).append(val)
        if sink is not None:
            sink(row)

    measure(start_time)
    for step in range(1, n_steps + 1):
        engine.step(config.dt)
        t = start_time + step * config.dt
        if step % config.measure_stride == 0 or step == n_steps:
            measure(t)
    traj.final_state = engine.snapshot()
    return traj


def _norm_squared(state: Mps) -> float:
    env = np.ones((1, 1), dtype=state.tensors[0].dtype)
    for a in state.tensors:
        tmp = np.tensordot(env, a, axes=([1], [0]))
        env = np.tensordot(a.conj(), tmp, axes=([0, 1], [0, 1]))
    return float(np.real(env[0, 0]))
