"""Single-site DMRG with bond-subspace expansion.

Each local update solves the effective eigenproblem by Lanczos, then the
bond basis is enriched with the Hamiltonian half-contraction before
truncation; the enrichment strength decays geometrically over sweeps so
the final sweeps are plain variational coordinate descent.
"""

from __future__ import annotations

import time as _time
import warnings
from dataclasses import dataclass

import numpy as np

from . import contractor as ctr
from .mpo import Mpo
from .mps import Mps, canonicalize
from .tensor import TruncationPolicy, lanczos_min, svd_split

_HERMITICITY_SEED = 0xD34D
_HERMITICITY_TOL = 1e-8
_SKETCH_SEED = 0x51A7


class NonHermitianOperatorError(RuntimeError):
    """The effective site operator lost Hermiticity (corrupt environments)."""


@dataclass(frozen=True)
class DmrgConfig:
    """Sweep schedule and tolerances of one ground-state search."""

    max_sweeps: int = 40
    bond_schedule: tuple = (8, 16, 32, 64)
    mixing_schedule: tuple | None = None
    eig_tol: float = 1e-10
    energy_tol: float = 1e-9
    discard_tolerance: float = 1e-12
    leakage_alarm: float = 1e-6
    variance: bool | None = None
    max_eig_iter: int = 200

    def bond_at(self, sweep: int) -> int:
        sched = self.bond_schedule
        return int(sched[min(sweep, len(sched) - 1)])

    def mixing_at(self, sweep: int) -> float:
        if self.mixing_schedule is not None:
            sched = self.mixing_schedule
            return float(sched[min(sweep, len(sched) - 1)])
        # keep enrichment alive while the bond ramp is running, then decay
        # geometrically (factor 0.5 per sweep) to zero
        ramp = len(self.bond_schedule)
        alpha = 0.02 * 0.5 ** max(0, sweep - ramp)
        return alpha if alpha >= 1e-4 else 0.0


@dataclass
class SweepReport:
    sweep: int
    direction: str
    energy: float
    variance: float | None
    max_discarded: float
    leakage: float | None
    max_bond: int
    seconds: float
    warning: str | None = None


@dataclass
class SweepParams:
    max_bond: int
    mixing: float = 0.0
    eig_tol: float = 1e-10
    discard_tolerance: float = 1e-12
    max_eig_iter: int = 200
    budgeted: bool = False  # capped local solves; skip convergence warnings


class _Engine:
    """Environment-caching sweep engine over a fixed MPO."""

    def __init__(self, h: Mpo, state: Mps):
        if h.n_sites != state.n_sites or h.phys_dims != state.phys_dims:
            raise ValueError("Hamiltonian and state do not match")
        self.h = h
        self.sops = ctr.site_operators(h)
        self.n = state.n_sites
        self.tensors = [t.copy() for t in state.tensors]
        self.norm_log = state.norm_log
        dtype = np.result_type(*(t.dtype for t in self.tensors), h.tensors[0].dtype)
        self.lenvs = [None] * self.n
        self.renvs = [None] * self.n
        self.lenvs[0] = ctr.left_boundary(dtype)
        self.renvs[self.n - 1] = ctr.left_boundary(dtype)
        self._rng = np.random.default_rng(_HERMITICITY_SEED)
        self._sketch_rng = np.random.default_rng(_SKETCH_SEED)

    def _sketch(self, block: np.ndarray, axis: int, width: int) -> np.ndarray:
        """Compress the expansion block to ``width`` random mixtures.

        The block only supplies candidate directions (it carries no state
        weight), so a seeded Gaussian sketch of its column space is enough
        and keeps the enrichment SVD narrow.
        """
        if block.shape[axis] <= width:
            return block
        g = self._sketch_rng.standard_normal((block.shape[axis], width))
        g = g / np.sqrt(width)
        if axis == 2:
            return np.tensordot(block, g, axes=([2], [0]))
        return np.tensordot(g, block, axes=([0], [0]))

    def refresh_right_envs(self):
        for i in range(self.n - 2, -1, -1):
            self.renvs[i] = ctr.update_right_env(
                self.tensors[i + 1], self.sops[i + 1], self.tensors[i + 1],
                self.renvs[i + 1],
            )

    def refresh_left_envs(self):
        for i in range(1, self.n):
            self.lenvs[i] = ctr.update_left_env(
                self.lenvs[i - 1], self.tensors[i - 1], self.sops[i - 1],
                self.tensors[i - 1],
            )

    def site_apply(self, i):
        lenv, renv, sop = self.lenvs[i], self.renvs[i], self.sops[i]
        return lambda x: ctr.apply_site(lenv, sop, renv, x)

    def check_hermiticity(self, i):
        defect = ctr.hermiticity_defect(
            self.lenvs[i], self.sops[i], self.renvs[i], self._rng
        )
        if defect > _HERMITICITY_TOL:
            raise NonHermitianOperatorError(
                f"effective operator asymmetry {defect:.2e} at site {i}"
            )

    def solve_site(self, i, params: SweepParams):
        theta, vec = lanczos_min(
            self.site_apply(i),
            self.tensors[i],
            tol=params.eig_tol,
            max_iter=params.max_eig_iter,
            warn_on_fail=not params.budgeted,
        )
        self.tensors[i] = vec
        return theta

    def move_right(self, i, params: SweepParams) -> float:
        """Truncate/enrich site ``i`` and shift the center to ``i + 1``."""
        a = self.tensors[i]
        dl, d, dr = a.shape
        expansion = 0
        if params.mixing > 0.0:
            p = ctr.half_contract_left(self.lenvs[i], self.sops[i], a)
            p = self._sketch(p, 2, params.max_bond)
            expansion = p.shape[2]
            pn = float(np.linalg.norm(p))
            scale = params.mixing / pn if pn > 0.0 else 0.0
            m = np.concatenate([a, scale * p], axis=2)
        else:
            m = a
        policy = TruncationPolicy(params.max_bond, params.discard_tolerance)
        u, s, v, _ = svd_split(m, [0, 1], policy)
        k = s.size
        self.tensors[i] = u.reshape(dl, d, k)
        carry = s[:, None] * v
        nxt = self.tensors[i + 1]
        if expansion:
            pad = np.zeros((dr + expansion,) + nxt.shape[1:], dtype=nxt.dtype)
            pad[:dr] = nxt
            nxt = pad
        new_next = np.tensordot(carry, nxt, axes=([1], [0]))
        nrm = float(np.linalg.norm(new_next))
        discarded = max(0.0, 1.0 - nrm**2)
        if nrm > 0.0:
            new_next = new_next / nrm
        self.tensors[i + 1] = new_next
        self.lenvs[i + 1] = ctr.update_left_env(
            self.lenvs[i], self.tensors[i], self.sops[i], self.tensors[i]
        )
        return discarded

    def move_left(self, i, params: SweepParams) -> float:
        a = self.tensors[i]
        dl, d, dr = a.shape
        expansion = 0
        if params.mixing > 0.0:
            p = ctr.half_contract_right(self.sops[i], self.renvs[i], a)
            p = self._sketch(p, 0, params.max_bond)
            expansion = p.shape[0]
            pn = float(np.linalg.norm(p))
            scale = params.mixing / pn if pn > 0.0 else 0.0
            m = np.concatenate([a, scale * p], axis=0)
        else:
            m = a
        policy = TruncationPolicy(params.max_bond, params.discard_tolerance)
        u, s, v, _ = svd_split(m, [0], policy)
        k = s.size
        self.tensors[i] = v.reshape(k, d, dr)
        carry = u * s[None, :]
        prev = self.tensors[i - 1]
        if expansion:
            pad = np.zeros(prev.shape[:2] + (dl + expansion,), dtype=prev.dtype)
            pad[:, :, :dl] = prev
            prev = pad
        new_prev = np.tensordot(prev, carry, axes=([2], [0]))
        nrm = float(np.linalg.norm(new_prev))
        discarded = max(0.0, 1.0 - nrm**2)
        if nrm > 0.0:
            new_prev = new_prev / nrm
        self.tensors[i - 1] = new_prev
        self.renvs[i - 1] = ctr.update_right_env(
            self.tensors[i], self.sops[i], self.tensors[i], self.renvs[i]
        )
        return discarded

    def sweep(self, direction: str, params: SweepParams):
        energy = np.nan
        max_disc = 0.0
        if direction == "LR":
            self.check_hermiticity(0)
            for i in range(self.n):
                energy = self.solve_site(i, params)
                if i < self.n - 1:
                    max_disc = max(max_disc, self.move_right(i, params))
        elif direction == "RL":
            self.check_hermiticity(self.n - 1)
            for i in range(self.n - 1, -1, -1):
                energy = self.solve_site(i, params)
                if i > 0:
                    max_disc = max(max_disc, self.move_left(i, params))
        else:
            raise ValueError(f"unknown direction {direction!r}")
        return float(energy), max_disc


def _as_real_if_possible(h: Mpo, state: Mps) -> Mps:
    if all(not np.iscomplexobj(w) for w in h.tensors) and all(
        (not np.iscomplexobj(t)) or np.all(t.imag == 0.0) for t in state.tensors
    ):
        return Mps(
            [np.ascontiguousarray(t.real) for t in state.tensors],
            center=state.center,
            norm_log=state.norm_log,
        )
    return state


def dmrg_sweep(
    h: Mpo,
    state: Mps,
    direction: str,
    params: SweepParams,
    leakage_op: Mpo | None = None,
) -> tuple[Mps, SweepReport]:
    """One full variational pass; the center lands at the far edge."""
    start = _time.perf_counter()
    edge = 0 if direction == "LR" else state.n_sites - 1
    work = canonicalize(state, edge)
    engine = _Engine(h, work)
    if direction == "LR":
        engine.refresh_right_envs()
    else:
        engine.refresh_left_envs()
    energy, max_disc = engine.sweep(direction, params)
    out = Mps(
        [t.copy() for t in engine.tensors],
        center=state.n_sites - 1 if direction == "LR" else 0,
        norm_log=0.0,
    )
    leak = (
        1.0 - float(np.real(ctr.mpo_expectation(out, leakage_op)))
        if leakage_op is not None
        else None
    )
    report = SweepReport(
        sweep=0,
        direction=direction,
        energy=energy,
        variance=None,
        max_discarded=max_disc,
        leakage=leak,
        max_bond=out.max_bond,
        seconds=_time.perf_counter() - start,
    )
    return out, report


def dmrg_run(
    h: Mpo,
    psi0: Mps,
    config: DmrgConfig,
    leakage_op: Mpo | None = None,
    progress=None,
) -> tuple[Mps, list[SweepReport]]:
    """Ground-state search; returns the best state and the sweep history."""
    state = canonicalize(psi0, 0)
    state = _as_real_if_possible(h, state)
    engine = _Engine(h, state)
    engine.refresh_right_envs()
    reports: list[SweepReport] = []
    prev_energy = np.inf
    delta_e = np.inf
    for sweep in range(config.max_sweeps):
        t0 = _time.perf_counter()
        # loose local solves while the bond ramp / enrichment is still
        # reshaping the state; full accuracy once the schedule settles
        settling = (
            config.bond_at(sweep) != config.bond_at(config.max_sweeps)
            or config.mixing_at(sweep) > 0.0
        )
        if settling:
            eig_tol = max(config.eig_tol, min(1e-6, 1e-3 * abs(delta_e)))
            max_eig_iter = min(config.max_eig_iter, 24)
        else:
            eig_tol = config.eig_tol
            max_eig_iter = config.max_eig_iter
        params = SweepParams(
            max_bond=config.bond_at(sweep),
            mixing=config.mixing_at(sweep),
            eig_tol=eig_tol,
            discard_tolerance=config.discard_tolerance,
            max_eig_iter=max_eig_iter,
            budgeted=settling,
        )
        direction = "LR" if sweep % 2 == 0 else "RL"
        energy, max_disc = engine.sweep(direction, params)
        snap = Mps([t.copy() for t in engine.tensors], center=None, norm_log=0.0)
        leak = None
        warning = None
        if leakage_op is not None:
            leak = 1.0 - float(np.real(ctr.mpo_expectation(snap, leakage_op)))
            if leak > config.leakage_alarm:
                warning = f"leakage {leak:.3e} above alarm {config.leakage_alarm:.1e}"
                warnings.warn(warning, stacklevel=2)
        var = None
        want_var = config.variance
        if want_var is None:
            d_max = snap.max_bond
            w_max = h.max_bond
            want_var = (d_max * w_max) ** 2 <= 2**24
        if want_var:
            var = ctr.mpo_variance(snap, h)
        report = SweepReport(
            sweep=sweep,
            direction=direction,
            energy=energy,
            variance=var,
            max_discarded=max_disc,
            leakage=leak,
            max_bond=snap.max_bond,
            seconds=_time.perf_counter() - t0,
        )
        if warning:
            report.warning = warning
        reports.append(report)
        if progress is not None:
            progress(report)
        delta_e = abs(energy - prev_energy)
        at_final_bond = config.bond_at(sweep) == config.bond_at(config.max_sweeps)
        if at_final_bond and params.mixing == 0.0 and delta_e < config.energy_tol:
            break
        prev_energy = energy
    center = 0 if reports and reports[-1].direction == "RL" else state.n_sites - 1
    out = Mps(
        [t.copy() for t in engine.tensors], center=center, norm_log=0.0
    )
    return out, reports
