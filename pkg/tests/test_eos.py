import numpy as np
import pytest

from fqmps.eos import eos_maxwell, lower_hull
from fqmps.mpo import ModelParams
from fqmps.oracle import constrained_ed_ground, free_ground_energy


class TestLowerHull:
    def test_collinear_points_reduce_to_endpoints(self):
        pts = [(float(n), -2.0 * n) for n in range(5)]
        assert lower_hull(pts) == [0, 4]

    def test_convex_set_keeps_all(self):
        pts = [(0.0, 0.0), (1.0, -1.0), (2.0, -1.5), (3.0, -1.6)]
        assert lower_hull(pts) == [0, 1, 2, 3]

    def test_point_above_chord_dropped(self):
        pts = [(0.0, 0.0), (1.0, 0.5), (2.0, 0.0)]
        assert lower_hull(pts) == [0, 2]


class TestMaxwell:
    def test_linear_energies_single_breakpoint(self):
        c = -1.3
        table = eos_maxwell({n: c * n for n in range(5)}, sites=4)
        assert table.hull_n == [0, 4]
        # with E_mu = E + mu N the step sits at mu = -c
        lo_row = next(r for r in table.rows if r.n == 0)
        hi_row = next(r for r in table.rows if r.n == 4)
        assert np.isclose(lo_row.mu_lo, -c)
        assert np.isclose(hi_row.mu_hi, -c)
        assert table.rho_of_mu([-c + 0.1])[0] == 0.0
        assert table.rho_of_mu([-c - 0.1])[0] == 1.0

    def test_rho_non_increasing(self):
        energies = {n: free_ground_energy(16, n) for n in range(0, 17)}
        table = eos_maxwell(energies, sites=16)
        mu = np.linspace(-3, 3, 61)
        rho = table.rho_of_mu(mu)
        assert np.all(np.diff(rho) <= 1e-12)

    def test_free_fermions_have_no_macroscopic_plateau(self):
        energies = {n: free_ground_energy(16, n) for n in range(0, 17)}
        table = eos_maxwell(energies, sites=16)
        interior = [r for r in table.rows if 1 <= r.n <= 15]
        assert all(r.on_hull for r in interior)
        widths = [table.plateau_width(r.n) for r in interior]
        assert max(widths) < 0.75  # finite-size level spacing only

    def test_interacting_plateaus_at_half_filling(self):
        energies = {}
        for n in range(4, 9):
            p = ModelParams(t=1.0, v=8.0, sites=12, particles=n, q_max=9)
            energies[n], _, _ = constrained_ed_ground(p)
        table = eos_maxwell(energies, sites=12)
        width = table.plateau_width(6)
        gap = table.charge_gap(6)
        assert width > 0.5
        assert np.isclose(width, gap, atol=1e-12)

    def test_requires_two_points(self):
        with pytest.raises(ValueError, match="two points"):
            eos_maxwell({3: -1.0}, sites=8)

    def test_requires_contiguous_range(self):
        with pytest.raises(ValueError, match="contiguous"):
            eos_maxwell({1: -1.0, 3: -2.0}, sites=8)

    def test_off_hull_point_flagged(self):
        energies = {0: 0.0, 1: 0.5, 2: -1.0}  # N=1 has convexity violation
        table = eos_maxwell(energies, sites=4)
        flags = {r.n: r.on_hull for r in table.rows}
        assert flags[0] and flags[2] and not flags[1]
