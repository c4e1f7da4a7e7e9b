"""Equation of state from ground-state energies via the Maxwell construction.

Given ``E(N)`` on a contiguous particle-number range, the grand-canonical
energy is ``E + mu N``; the optimal filling for each ``mu`` follows from
the lower convex hull of the ``(N, E)`` points. With this sign convention
the density is a non-increasing step function of ``mu``; plateau widths
equal the charge gap at the plateau filling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EosRow:
    n: int
    energy: float
    on_hull: bool
    mu_lo: float  # -inf allowed
    mu_hi: float  # +inf allowed


@dataclass
class EosTable:
    sites: int
    rows: list[EosRow]
    hull_n: list[int] = field(default_factory=list)

    def rho_of_mu(self, mu) -> np.ndarray:
        """Optimal density ``N*/L`` on a chemical-potential grid."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        out = np.zeros_like(mu)
        lookup = {r.n: r for r in self.rows if r.on_hull}
        for i, m in enumerate(mu):
            best = None
            for n, r in lookup.items():
                if r.mu_lo <= m <= r.mu_hi:
                    best = n if best is None else max(best, n)
            if best is None:  # numerical edge between intervals
                best = min(
                    lookup.values(), key=lambda r: r.energy + m * r.n
                ).n
            out[i] = best / self.sites
        return out

    def plateau_width(self, n: int) -> float:
        for r in self.rows:
            if r.n == n and r.on_hull:
                return r.mu_hi - r.mu_lo
        return 0.0

    def charge_gap(self, n: int) -> float | None:
        by_n = {r.n: r.energy for r in self.rows}
        if n - 1 in by_n and n + 1 in by_n:
            return by_n[n + 1] + by_n[n - 1] - 2.0 * by_n[n]
        return None


def lower_hull(points: list[tuple[int, float]]) -> list[int]:
    """Indices of the lower convex hull of x-sorted points (monotone chain)."""
    hull: list[int] = []
    for i, (x, y) in enumerate(points):
        while len(hull) >= 2:
            x1, y1 = points[hull[-2]]
            x2, y2 = points[hull[-1]]
            # drop the middle point when it lies on or above the chord
            if (y2 - y1) * (x - x1) >= (y - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def eos_maxwell(energies, sites: int) -> EosTable:
    """Maxwell construction from a map ``N -> E(N)``.

    ``energies`` is a dict or an iterable of ``(N, E)`` pairs on a
    contiguous range of particle numbers.
    """
    if isinstance(energies, dict):
        pairs = sorted(energies.items())
    else:
        pairs = sorted(energies)
    if len(pairs) < 2:
        raise ValueError("the Maxwell construction needs at least two points")
    ns = [int(n) for n, _ in pairs]
    if ns != list(range(ns[0], ns[-1] + 1)):
        raise ValueError("particle numbers must form a contiguous range")
    points = [(float(n), float(e)) for n, e in pairs]
    hull_idx = lower_hull(points)
    hull_pts = [points[i] for i in hull_idx]
    slopes = [
        (hull_pts[j + 1][1] - hull_pts[j][1])
        / (hull_pts[j + 1][0] - hull_pts[j][0])
        for j in range(len(hull_pts) - 1)
    ]
    rows = []
    hull_set = set(hull_idx)
    for i, (n, e) in enumerate(pairs):
        if i in hull_set:
            j = hull_idx.index(i)
            # N_j is optimal for mu in [-slope_right, -slope_left]
            mu_lo = -slopes[j] if j < len(slopes) else -np.inf
            mu_hi = -slopes[j - 1] if j > 0 else np.inf
            rows.append(EosRow(int(n), float(e), True, mu_lo, mu_hi))
        else:
            rows.append(EosRow(int(n), float(e), False, np.nan, np.nan))
    return EosTable(sites=sites, rows=rows, hull_n=[ns[i] for i in hull_idx])
