import numpy as np

from fqmps.mpo import ModelParams, assemble_hamiltonian, zero_mpo
from fqmps.mps import inner, mps_from_dense, product_state
from fqmps.oracle import (
    ConstrainedBasis,
    constrained_ed_evolve,
    constrained_ed_ground,
)
from fqmps.tdvp import TdvpConfig, expand_bond_basis, tdvp_run, tdvp_step


def wall_state(n, q_max):
    return product_state([1] * n, q_max).astype(complex)


class TestExpandBondBasis:
    def test_state_preserved_and_bonds_grow(self):
        p = ModelParams(t=1.0, v=0.0, sites=10, particles=5, q_max=6,
                        penalty=20.0)
        h = assemble_hamiltonian(p)
        psi = wall_state(5, 6)
        out = expand_bond_basis(h, psi, 24)
        assert max(out.bond_dims) > 1
        assert abs(abs(inner(out, psi)) - 1.0) < 1e-12

    def test_respects_dimensional_caps(self):
        p = ModelParams(t=1.0, v=0.0, sites=10, particles=5, q_max=6,
                        penalty=20.0)
        h = assemble_hamiltonian(p)
        out = expand_bond_basis(h, wall_state(5, 6), 100)
        assert out.bond_dims[0] <= 6
        assert out.bond_dims[-1] <= 6
        assert max(out.bond_dims) <= 36


class TestTdvpStep:
    def test_zero_hamiltonian_is_identity(self):
        psi = wall_state(4, 5)
        psi = expand_bond_basis(
            assemble_hamiltonian(
                ModelParams(t=1.0, v=0.0, sites=8, particles=4, q_max=5,
                            penalty=10.0)
            ),
            psi, 8,
        )
        out = tdvp_step(zero_mpo(4, 5), psi, 0.02)
        assert abs(abs(inner(out, psi)) - 1.0) < 1e-14

    def test_eigenstate_observables_stationary(self):
        p = ModelParams(t=1.0, v=1.0, sites=8, particles=4, q_max=5,
                        penalty=20.0)
        h = assemble_hamiltonian(p)
        energy, vec, basis = constrained_ed_ground(p)
        psi = mps_from_dense(basis.embed(vec, 5), [5] * 4).astype(complex)
        cfg = TdvpConfig(dt=0.02, t_final=0.4, max_bond=64, measure_stride=5)
        traj = tdvp_run(h, psi, cfg)
        assert abs(np.asarray(traj.energies) - energy).max() < 1e-9
        for prof in traj.entropy_profiles:
            assert np.abs(prof - traj.entropy_profiles[0]).max() < 1e-9

    def test_single_step_overlap_with_exact_evolution(self):
        p = ModelParams(t=1.0, v=0.0, sites=12, particles=6, q_max=7,
                        penalty=20.0)
        h = assemble_hamiltonian(p)
        psi = expand_bond_basis(h, wall_state(6, 7), 64)
        out = tdvp_step(h, psi, 0.02)
        basis = ConstrainedBasis.build(12, 6)
        v0 = np.zeros(len(basis))
        v0[basis.index[(1,) * 6]] = 1.0
        ref = basis.embed(constrained_ed_evolve(p, v0, 0.02, basis), 7)
        overlap = abs(np.vdot(ref, out.to_dense()))
        assert overlap >= 1.0 - 1e-8


class TestTdvpRun:
    def test_norm_and_energy_conserved(self):
        p = ModelParams(t=1.0, v=2.0, sites=10, particles=5, q_max=6,
                        penalty=20.0)
        h = assemble_hamiltonian(p)
        psi = expand_bond_basis(h, wall_state(5, 6), 36)
        cfg = TdvpConfig(dt=0.02, t_final=1.0, max_bond=36, measure_stride=10)
        traj = tdvp_run(h, psi, cfg)
        assert np.abs(np.asarray(traj.norms) - 1.0).max() < 1e-9
        drift = np.abs(np.asarray(traj.energies) - traj.energies[0]).max()
        assert drift < 1e-6 * abs(traj.energies[0])

    def test_matches_exact_evolution(self):
        p = ModelParams(t=1.0, v=0.0, sites=10, particles=5, q_max=6,
                        penalty=20.0)
        h = assemble_hamiltonian(p)
        psi = expand_bond_basis(h, wall_state(5, 6), 48)
        cfg = TdvpConfig(dt=0.02, t_final=1.0, max_bond=48, measure_stride=50)
        traj = tdvp_run(h, psi, cfg)
        basis = ConstrainedBasis.build(10, 5)
        v0 = np.zeros(len(basis))
        v0[basis.index[(1,) * 5]] = 1.0
        ref = basis.embed(constrained_ed_evolve(p, v0, 1.0, basis), 6)
        assert np.linalg.norm(traj.final_state.to_dense() - ref) < 1e-9

    def test_second_order_convergence(self):
        p = ModelParams(t=1.0, v=1.0, sites=10, particles=5, q_max=6,
                        penalty=20.0)
        h = assemble_hamiltonian(p)
        basis = ConstrainedBasis.build(10, 5)
        v0 = np.zeros(len(basis))
        v0[basis.index[(1,) * 5]] = 1.0
        ref = basis.embed(constrained_ed_evolve(p, v0, 1.0, basis), 6)
        psi = expand_bond_basis(h, wall_state(5, 6), 12)
        errs = []
        for dt in (0.2, 0.1):
            cfg = TdvpConfig(dt=dt, t_final=1.0, max_bond=12,
                             measure_stride=1000, krylov_tol=1e-12)
            traj = tdvp_run(h, psi, cfg)
            errs.append(np.linalg.norm(traj.final_state.to_dense() - ref))
        ratio = errs[0] / errs[1]
        assert 3.0 <= ratio <= 5.0

    def test_observer_failure_does_not_corrupt_run(self):
        p = ModelParams(t=1.0, v=0.0, sites=8, particles=4, q_max=5,
                        penalty=10.0)
        h = assemble_hamiltonian(p)
        psi = expand_bond_basis(h, wall_state(4, 5), 16)

        calls = [0]

        def flaky(t, state):
            calls[0] += 1
            if calls[0] == 2:
                raise RuntimeError("synthetic observer crash")
            return {"leakage": 0.0}

        cfg = TdvpConfig(dt=0.02, t_final=0.2, max_bond=16, measure_stride=5)
        traj = tdvp_run(h, psi, cfg, observer=flaky)
        assert traj.warnings
        assert np.abs(np.asarray(traj.norms) - 1.0).max() < 1e-9

    def test_entanglement_growth_starts_at_last_bond(self):
        p = ModelParams(t=1.0, v=0.0, sites=16, particles=8, q_max=8,
                        penalty=20.0)
        h = assemble_hamiltonian(p)
        psi = expand_bond_basis(h, wall_state(8, 8), 24)
        cfg = TdvpConfig(dt=0.02, t_final=0.5, max_bond=24, measure_stride=25)
        traj = tdvp_run(h, psi, cfg)
        prof = traj.entropy_profiles[-1]
        assert np.argmax(prof) >= len(prof) - 2
        assert prof[-1] > 10 * prof[0]
