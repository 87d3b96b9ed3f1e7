"""The homeomorphism phi intertwining two gap-filled systems with equal N.

``phi o source_i = target_i o phi``. Production evaluation follows branch
digits (error ``c_target**depth``); ``fixed_point_iterate`` is an independent
grid iteration of the defining operator kept as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ifs import IFSystem, digit_code, validate


@dataclass(frozen=True)
class Conjugacy:
    source: IFSystem
    target: IFSystem

    def __post_init__(self):
        if self.source.N != self.target.N:
            raise ValueError(
                f"branch counts differ: source N={self.source.N}, target N={self.target.N}"
            )
        for label, system in (("source", self.source), ("target", self.target)):
            report = validate(system)
            if not report.ok:
                raise ValueError(f"{label} system invalid: {'; '.join(report.violations)}")

    @property
    def N(self) -> int:
        return self.source.N

    @property
    def c_target(self) -> float:
        return self.target.c_max

    @property
    def c_source(self) -> float:
        return self.source.c_max


def _transport(from_sys: IFSystem, to_sys: IFSystem, x, depth: int, core_only: bool):
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    digits = digit_code(from_sys, xa, depth)
    if core_only and not np.isin(digits, from_sys.core).all():
        raise ValueError("point is not in the limit set to the requested depth")
    out = np.zeros(xa.shape, dtype=float)
    for j in range(depth - 1, -1, -1):
        col = digits[:, j]
        nxt = np.empty_like(out)
        for i, m in enumerate(to_sys.maps):
            mask = col == i
            if np.any(mask):
                nxt[mask] = m.forward(out[mask])
        out = nxt
    # endpoints are pinned exactly
    out = np.where(xa <= 0.0, 0.0, np.where(xa >= 1.0, 1.0, out))
    return float(out[0]) if np.ndim(x) == 0 else out


def phi_eval(conj: Conjugacy, x, depth: int = 40, core_only: bool = False):
    """phi(x) for x in [0, 1]; truncation error at most c_target**depth.

    ``core_only`` restricts to the limit set: the source digits must all be
    core letters, otherwise ValueError.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return _transport(conj.source, conj.target, x, depth, core_only)


def phi_inverse_eval(conj: Conjugacy, x, depth: int = 40, core_only: bool = False):
    """phi^{-1}(x) for x in [0, 1]; truncation error at most c_source**depth."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return _transport(conj.target, conj.source, x, depth, core_only)


def phi_error_bound(conj: Conjugacy, depth: int) -> float:
    return conj.c_target**depth


def phi_inverse_error_bound(conj: Conjugacy, depth: int) -> float:
    return conj.c_source**depth


def phi_extended_eval(conj: Conjugacy, x, depth: int = 40):
    """phi({x}) + floor(x): the periodic extension to R."""
    xa = np.asarray(x, dtype=float)
    k = np.floor(xa)
    out = phi_eval(conj, xa - k, depth) + k
    return float(out) if np.ndim(x) == 0 else out


def phi_inverse_extended_eval(conj: Conjugacy, x, depth: int = 40):
    xa = np.asarray(x, dtype=float)
    k = np.floor(xa)
    out = phi_inverse_eval(conj, xa - k, depth) + k
    return float(out) if np.ndim(x) == 0 else out


def sharp_add(conj: Conjugacy, x, y, depth: int = 40):
    """x # y = phi(phi^{-1}(x) + phi^{-1}(y)) with the extended maps."""
    s = phi_inverse_extended_eval(conj, x, depth) + phi_inverse_extended_eval(conj, y, depth)
    return phi_extended_eval(conj, s, depth)


@dataclass
class GridApproximation:
    grid: np.ndarray
    values: np.ndarray
    iterations: int
    contraction: float

    def __call__(self, x):
        return np.interp(x, self.grid, self.values)

    @property
    def grid_modulus(self) -> float:
        """Largest jump between neighbouring nodes (modulus of continuity at the mesh)."""
        return float(np.max(np.abs(np.diff(self.values))))

    def error_bound(self) -> float:
        c = self.contraction
        return c**self.iterations + c / (1.0 - c) * self.grid_modulus


def fixed_point_iterate(conj: Conjugacy, grid_size: int, iterations: int) -> GridApproximation:
    """Iterate (Ff)(x) = target_i(f(source_i^{-1}(x))) on x in [source_i(0), source_i(1))
    from the identity, reading f off-grid by linear interpolation."""
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    grid = np.linspace(0.0, 1.0, grid_size + 1)
    knots = conj.source.knots
    branch = np.clip(np.searchsorted(knots, grid, side="right") - 1, 0, conj.N - 1)
    pre = np.empty_like(grid)
    for i, m in enumerate(conj.source.maps):
        mask = branch == i
        pre[mask] = m.inverse(grid[mask])
    pre = np.clip(pre, 0.0, 1.0)
    values = grid.copy()
    for _ in range(iterations):
        inner = np.interp(pre, grid, values)
        nxt = np.empty_like(values)
        for i, m in enumerate(conj.target.maps):
            mask = branch == i
            nxt[mask] = m.forward(inner[mask])
        nxt[-1] = 1.0
        values = nxt
    return GridApproximation(grid, values, iterations, conj.c_target)


def conjugation_defect(conj: Conjugacy, xs, depth: int = 40) -> float:
    """max |phi(source_i(x)) - target_i(phi(x))| over branches and sample points."""
    xs = np.asarray(xs, dtype=float)
    base = phi_eval(conj, xs, depth)
    worst = 0.0
    for s_map, t_map in zip(conj.source.maps, conj.target.maps):
        lhs = phi_eval(conj, np.asarray(s_map.forward(xs), dtype=float), depth)
        worst = max(worst, float(np.max(np.abs(lhs - np.asarray(t_map.forward(base))))))
    return worst


def plot_data(conj: Conjugacy, samples: int = 1024, depth: int = 40):
    xs = np.linspace(0.0, 1.0, samples)
    return xs, phi_eval(conj, xs, depth)


def c4_to_c3() -> Conjugacy:
    """Linear C_4 system (x/4, (2x+1)/4, (x+3)/4) onto the 1/3 system."""
    from .ifs import cantor_quarter_with_gap, cantor_third

    return Conjugacy(cantor_quarter_with_gap(), cantor_third())
