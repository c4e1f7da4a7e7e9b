import numpy as np
import pytest

from fqmps.dmrg import (
    DmrgConfig,
    NonHermitianOperatorError,
    SweepParams,
    dmrg_run,
    dmrg_sweep,
)
from fqmps.mpo import (
    ModelParams,
    Mpo,
    assemble_hamiltonian,
    build_projector_C,
)
from fqmps.mps import mps_from_dense, product_state
from fqmps.oracle import (
    constrained_ed_ground,
    free_ground_energy,
    mpo_to_dense,
)


def cdw(particles, q_max):
    return product_state([1] + [2] * (particles - 1), q_max)


class TestDmrgRun:
    def test_free_fermions_match_oracle(self):
        p = ModelParams(t=1.0, v=0.0, sites=12, particles=6, q_max=7)
        h = assemble_hamiltonian(p)
        cfg = DmrgConfig(max_sweeps=14, bond_schedule=(8, 16, 32),
                         energy_tol=1e-10)
        _, reports = dmrg_run(h, cdw(6, 7), cfg,
                              leakage_op=build_projector_C(p))
        err = abs(reports[-1].energy - free_ground_energy(12, 6))
        assert err / 12 < 1e-9
        assert reports[-1].leakage < 1e-9

    def test_interacting_matches_ed(self):
        p = ModelParams(t=1.0, v=8.0, sites=10, particles=5, q_max=6)
        h = assemble_hamiltonian(p)
        cfg = DmrgConfig(max_sweeps=16, bond_schedule=(8, 16, 32),
                         energy_tol=1e-11)
        _, reports = dmrg_run(h, cdw(5, 6), cfg)
        e_ref, _, _ = constrained_ed_ground(p)
        assert abs(reports[-1].energy - e_ref) < 1e-9

    def test_variational_bound(self):
        p = ModelParams(t=1.0, v=1.0, sites=8, particles=4, q_max=5,
                        penalty=30.0)
        h = assemble_hamiltonian(p)
        exact = np.linalg.eigvalsh(mpo_to_dense(h))[0]
        cfg = DmrgConfig(max_sweeps=10, bond_schedule=(4, 8), energy_tol=1e-10)
        _, reports = dmrg_run(h, cdw(4, 5), cfg)
        for r in reports:
            assert r.energy >= exact - 1e-12

    def test_variance_reported_on_small_problems(self):
        p = ModelParams(t=1.0, v=0.0, sites=8, particles=4, q_max=5)
        h = assemble_hamiltonian(p)
        cfg = DmrgConfig(max_sweeps=12, bond_schedule=(8, 16), energy_tol=1e-11)
        _, reports = dmrg_run(h, cdw(4, 5), cfg)
        assert reports[-1].variance is not None
        assert abs(reports[-1].variance) < 1e-7

    def test_single_particle_chain(self):
        p = ModelParams(t=1.0, v=0.0, sites=6, particles=1, q_max=6)
        h = assemble_hamiltonian(p)
        cfg = DmrgConfig(max_sweeps=6, bond_schedule=(2,), energy_tol=1e-12)
        _, reports = dmrg_run(h, product_state([3], 6), cfg)
        assert abs(reports[-1].energy - free_ground_energy(6, 1)) < 1e-10


class TestDmrgSweep:
    def test_exact_eigenstate_is_fixed_point(self):
        p = ModelParams(t=1.0, v=0.0, sites=8, particles=4, q_max=5,
                        penalty=25.0)
        h = assemble_hamiltonian(p)
        energy, vec, basis = constrained_ed_ground(p)
        state = mps_from_dense(basis.embed(vec, 5), [5] * 4)
        params = SweepParams(max_bond=64, mixing=0.0, eig_tol=1e-12)
        out, report = dmrg_sweep(h, state, "LR", params)
        assert abs(report.energy - energy) < 1e-11

    def test_energy_decreases_without_mixing(self):
        p = ModelParams(t=1.0, v=0.0, sites=8, particles=4, q_max=5)
        h = assemble_hamiltonian(p)
        # a slightly entangled start so single-site updates have room to act
        state = mps_from_dense(
            np.ones(5**4) / np.sqrt(5.0**4), [5] * 4
        )
        params = SweepParams(max_bond=16, mixing=0.0, eig_tol=1e-12)
        from fqmps.contractor import mpo_expectation

        e0 = float(np.real(mpo_expectation(state, h)))
        out, r1 = dmrg_sweep(h, state, "LR", params)
        assert r1.energy < e0 - 1e-6
        out2, r2 = dmrg_sweep(h, out, "RL", params)
        assert r2.energy <= r1.energy + 1e-10

    def test_monotone_improvement_decays(self):
        p = ModelParams(t=1.0, v=1.0, sites=8, particles=4, q_max=5)
        h = assemble_hamiltonian(p)
        state = mps_from_dense(np.ones(5**4) / np.sqrt(5.0**4), [5] * 4)
        params = SweepParams(max_bond=24, mixing=0.0, eig_tol=1e-12)
        state, r1 = dmrg_sweep(h, state, "LR", params)
        state, r2 = dmrg_sweep(h, state, "RL", params)
        state, r3 = dmrg_sweep(h, state, "LR", params)
        gain1 = r1.energy - r2.energy
        gain2 = r2.energy - r3.energy
        assert gain1 >= -1e-10
        assert gain2 <= gain1 + 1e-10

    def test_non_hermitian_effective_operator_is_fatal(self):
        p = ModelParams(t=1.0, v=0.0, sites=6, particles=3, q_max=4)
        h = assemble_hamiltonian(p)
        broken = Mpo([w.copy() for w in h.tensors])
        broken.tensors[0][0, 0, 1, :] += 0.5  # asymmetric corruption
        cfg_params = SweepParams(max_bond=8, mixing=0.0)
        with pytest.raises(NonHermitianOperatorError):
            dmrg_sweep(broken, cdw(3, 4), "LR", cfg_params)


class TestLeakageAlarm:
    def test_alarm_records_warning(self):
        import warnings

        p = ModelParams(t=1.0, v=0.0, sites=8, particles=4, q_max=5,
                        penalty=1e-3)  # penalty too weak on purpose
        h = assemble_hamiltonian(p)
        cfg = DmrgConfig(max_sweeps=6, bond_schedule=(8, 16),
                         energy_tol=1e-9, leakage_alarm=1e-12)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            _, reports = dmrg_run(h, cdw(4, 5), cfg,
                                  leakage_op=build_projector_C(p))
        assert any(r.warning for r in reports)
        assert any("leakage" in str(w.message) for w in caught)
