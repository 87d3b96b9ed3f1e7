"""Father and mother wavelets on L^2(H), the operators T and U, and filters."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .cells import (
    Cell,
    CellFunction,
    _inner_parts,
    inner_product,
    inner_product_abs2,
    norm_squared,
    sigma_image,
    sigma_preimage,
)
from .config import BudgetExceeded, budget
from .ifs import IFSystem, in_limit_set, scaling_eval


def root_of_unity_power(m: int, n: int):
    """exp(2 pi i m / n), exact (int or 1j multiples) when n divides 4m."""
    m %= n
    if (2 * m) % n == 0:
        return 1 if m == 0 else -1
    if (4 * m) % n == 0:
        return 1j if 4 * m // n == 1 else -1j
    return cmath.exp(2j * math.pi * m / n)


@dataclass
class Filter:
    """Trigonometric polynomial ``sqrt(p)**root * sum_d c_d z**d`` on the circle."""

    coefficients: dict
    p: int = 1
    root: int = 0

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        total = sum(complex(c) * z**d for d, c in self.coefficients.items())
        return total * math.sqrt(self.p) ** self.root

    def apply(self, f: CellFunction) -> CellFunction:
        """m(T) f = sum_d c_d T^d f."""
        acc = None
        for d, c in sorted(self.coefficients.items()):
            term = apply_T(f, d).scaled(c)
            acc = term if acc is None else acc + term
        if acc is None:
            return CellFunction(f.system)
        return acc.scaled(1, self.root)


def build_filters(N: int, A: Sequence[int]) -> list:
    """m_0, then one monomial per gap letter (ascending), then p - 1 modulated filters."""
    A = sorted(set(int(a) for a in A))
    if not A or A[0] < 0 or A[-1] >= N:
        raise ValueError("A must be a non-empty subset of 0..N-1")
    p = len(A)
    gaps = [d for d in range(N) if d not in A]
    filters = [Filter({a: 1 for a in A}, p, -1)]
    filters += [Filter({d: 1}, p, 0) for d in gaps]
    for k in range(1, p):
        filters.append(Filter({a: root_of_unity_power(k * j, p) for j, a in enumerate(A)}, p, -1))
    return filters


def filter_matrix(filters: Sequence[Filter], z: complex) -> np.ndarray:
    N = len(filters)
    rho = np.exp(2j * np.pi * np.arange(N) / N)
    return np.array([[f(rho[l] * z) for l in range(N)] for f in filters]) / math.sqrt(N)


def filter_matrix_unitary_check(filters: Sequence[Filter], z_samples) -> float:
    z_samples = np.atleast_1d(np.asarray(z_samples, dtype=complex))
    if z_samples.size == 0:
        raise ValueError("need at least one sample point")
    N = len(filters)
    worst = 0.0
    for z in z_samples:
        M = filter_matrix(filters, z)
        worst = max(worst, float(np.max(np.abs(M.conj().T @ M - np.eye(N)))))
    return worst


def apply_T(f: CellFunction, k: int = 1) -> CellFunction:
    return f.map_cells(lambda c: [Cell(c.word, c.shift + k)])


def apply_U(f: CellFunction, n: int = 1) -> CellFunction:
    """(U g)(x) = g(sigma^{-1}(x)) / sqrt(p), iterated n times (n may be negative)."""
    system = f.system
    out = f
    step_up = lambda c: sigma_image(system, c)
    step_down = lambda c: [sigma_preimage(system, c)]
    for _ in range(abs(n)):
        out = out.map_cells(step_up, -1) if n > 0 else out.map_cells(step_down, +1)
    return out


def father(system) -> CellFunction:
    return CellFunction.indicator(system, Cell((), 0))


def mother_wavelets(system) -> list:
    """Closed forms of U^{-1} m_i(T) phi, i = 1..N-1."""
    A = list(system.core)
    p = system.p
    mothers = [CellFunction.indicator(system, Cell((d,), 0), 1, root=1) for d in system.gaps]
    for k in range(1, p):
        mothers.append(CellFunction(system, {Cell((a,), 0): root_of_unity_power(k * j, p)
                                             for j, a in enumerate(A)}))
    return mothers


def mothers_by_composition(system, filters: Sequence[Filter]) -> list:
    phi = father(system)
    return [apply_U(m.apply(phi), -1) for m in filters[1:]]


@dataclass
class WaveletSystem:
    system: IFSystem
    father: CellFunction
    filters: list
    mothers: list

    @property
    def N(self) -> int:
        return self.system.N

    @classmethod
    def build(cls, system: IFSystem) -> "WaveletSystem":
        return cls(system, father(system), build_filters(system.N, system.core), mother_wavelets(system))

    def basis_function(self, n: int, k: int, i: int) -> CellFunction:
        """U^n T^k psi_i, with i = 0 meaning the father phi."""
        if not 0 <= i < self.N:
            raise IndexError(f"wavelet index {i} out of range")
        g = self.father if i == 0 else self.mothers[i - 1]
        return apply_U(apply_T(g, k), n)


def basis_function(ws: WaveletSystem, n: int, k: int, i: int) -> CellFunction:
    return ws.basis_function(n, k, i)


def gram_matrix(functions: Sequence[CellFunction]) -> np.ndarray:
    n = len(functions)
    if n * n > budget():
        raise BudgetExceeded(f"Gram matrix of size {n}x{n} exceeds budget")
    G = np.zeros((n, n), dtype=complex)
    shifts = [f.shifts for f in functions]
    for a in range(n):
        for b in range(a, n):
            if shifts[a].isdisjoint(shifts[b]):
                continue
            v = complex(inner_product(functions[a], functions[b]))
            G[a, b] = v
            G[b, a] = v.conjugate()
    return G


def gram_report(G: np.ndarray) -> dict:
    n = G.shape[0]
    off = G - np.diag(np.diag(G))
    return {
        "max_offdiag": float(np.max(np.abs(off))) if n else 0.0,
        "max_diag_dev": float(np.max(np.abs(np.diag(G) - 1))) if n else 0.0,
        "dims": n,
    }


def wavelet_window(ws: WaveletSystem, levels: int, shifts: int, include_father: bool = False):
    """Index triples (n, k, i) with |n| <= levels, |k| <= shifts."""
    idx = range(0 if include_father else 1, ws.N)
    return [(n, k, i) for n in range(-levels, levels + 1) for k in range(-shifts, shifts + 1) for i in idx]


# decomposition -----------------------------------------------------------------

def _shifts_meeting(system, cell: Cell, n: int) -> list:
    """Shifts k for which U^n T^k g (g supported in [0, 1]) can meet ``cell``."""
    N = system.N
    if n >= 0:
        return [cell.shift // N**n]
    j = -n
    w = cell.word
    if len(w) >= j:
        words = [w[-j:]]
    else:
        words = [w]
        for _ in range(j - len(w)):
            words = [(a,) + u for u in words for a in system.core]
    return [cell.shift * N**j + sum(d * N**t for t, d in enumerate(u)) for u in words]


@dataclass
class Decomposition:
    details: dict  # (n, k, i) -> coefficient
    coarse: dict  # k -> coefficient at level n_max
    energy: object  # sum of squared moduli, exact for rational input
    norm_squared: object
    residual_norm_squared: object
    n_min: int
    n_max: int
    exact: bool = field(default=False)

    @property
    def energy_gap(self):
        return self.norm_squared - self.energy


def parseval_decompose(ws: WaveletSystem, f: CellFunction, n_min: Optional[int] = None,
                       n_max: Optional[int] = None) -> Decomposition:
    """Detail coefficients <f | U^n T^k psi_i> for n_min <= n <= n_max plus coarse
    coefficients <f | U^{n_max} T^k phi>.

    f lies in V_{1 - depth(f)}, so the default ``n_min = min(0, 1 - depth)``
    gives a window in which the energy identity and reconstruction are exact.
    """
    system = ws.system
    if n_min is None:
        n_min = min(0, 1 - f.depth)
    if n_max is None:
        n_max = max(n_min, 0)
    if n_max < n_min:
        raise ValueError("n_max must be >= n_min")
    cells = list(f.terms)
    details, coarse = {}, {}
    energy = 0
    recon = CellFunction(system, {}, f.root)

    def project(n, i):
        nonlocal energy, recon
        ks = sorted({k for c in cells for k in _shifts_meeting(system, c, n)})
        out = {}
        for k in ks:
            b = ws.basis_function(n, k, i)
            s, r = _inner_parts(f, b)
            if s == 0:
                continue
            out[k] = s * math.sqrt(system.p) ** r if r % 2 else s * Fraction(system.p) ** (r // 2)
            energy += inner_product_abs2(f, b)
            recon = recon + b.scaled(s, r)
        return out

    for n in range(n_min, n_max + 1):
        for i in range(1, ws.N):
            for k, v in project(n, i).items():
                details[(n, k, i)] = v
    coarse = project(n_max, 0)
    nsq = norm_squared(f)
    residual = norm_squared(f - recon)
    return Decomposition(details, coarse, energy, nsq, residual, n_min, n_max,
                         exact=isinstance(energy, Fraction) or isinstance(energy, int))


# pointwise scaling equation ----------------------------------------------------

def scaling_equation_check(ws: WaveletSystem, points, depth: int = 30) -> dict:
    """Compare phi(x) with sum_{a in A} phi(sigma(x) - a) at sample points.

    Membership in C is decided from branch digits (both codings at knots).
    """
    system = ws.system
    violations, decided, undecided = 0, 0, 0
    for x in np.atleast_1d(np.asarray(points, dtype=float)):
        lhs = in_limit_set(system, x, depth)
        s = float(scaling_eval(system, x))
        rhs_parts = [in_limit_set(system, s - a, depth) for a in system.core]
        if lhs is None or any(v is None for v in rhs_parts):
            undecided += 1
            continue
        decided += 1
        if int(lhs) != sum(int(v) for v in rhs_parts):
            violations += 1
    return {"violations": violations, "decided": decided, "undecided": undecided}


# operator identities -----------------------------------------------------------

def operator_identity_suite(system, rng: np.random.Generator, count: int = 100) -> dict:
    """Exact checks of U T U^{-1} = T^N, unitarity of U and T, and H o sigma = p H.

    Returns failure counts per identity (all zero when the algebra is right).
    """
    from .cells import cell_measure, random_cell, random_cell_function

    N = system.N
    fails = {"UTU^-1=T^N": 0, "U unitary": 0, "U^-1 U = id": 0, "T unitary": 0, "H(sigma(c)) = pH(c)": 0}
    for _ in range(count):
        f = random_cell_function(system, rng)
        g = random_cell_function(system, rng)
        if apply_U(apply_T(apply_U(f, -1), 1), 1) != apply_T(f, N):
            fails["UTU^-1=T^N"] += 1
        if _inner_parts_value(apply_U(f, 1), apply_U(g, 1)) != _inner_parts_value(f, g):
            fails["U unitary"] += 1
        if apply_U(apply_U(f, 1), -1) != f:
            fails["U^-1 U = id"] += 1
        if _inner_parts_value(apply_T(f, 3), apply_T(g, 3)) != _inner_parts_value(f, g):
            fails["T unitary"] += 1
        c = random_cell(system, rng)
        image = sigma_image(system, c)
        if sum(cell_measure(system, d) for d in image) != system.p * cell_measure(system, c):
            fails["H(sigma(c)) = pH(c)"] += 1
    return {"count": count, "failures": fails, "ok": not any(fails.values())}


def _inner_parts_value(f: CellFunction, g: CellFunction):
    """Exact <f|g> as (S, parity); even root powers already folded into S."""
    s, r = _inner_parts(f, g)
    return (s * Fraction(f.system.p) ** (r // 2), r % 2) if s != 0 else (0, 0)
