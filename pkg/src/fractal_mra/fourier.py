"""Fourier bases for homogeneous linear Cantor measures and their transport.

The linear system is x -> (x + a) / N, a in A, with equal weights 1/p. Its
Fourier transform is the infinite product of ``kappa_A(t / N**k)``; a dual set
L generates the candidate spectrum Lambda = {sum l_j N**j}.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Callable, Optional, Sequence

import numpy as np

from .cells import quadrature_nodes
from .config import BudgetExceeded, budget
from .conjugacy import Conjugacy, phi_inverse_eval
from .ifs import Affine

TWO_PI = 2.0 * math.pi


def as_fraction(v) -> Fraction:
    """Exact rational from int, Fraction, 'a/b' string or an exactly representable float."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, bool):
        raise ValueError("booleans are not numbers here")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, float):
        q = Fraction(v).limit_denominator(10**6)
        if abs(float(q) - v) > 1e-12:
            raise ValueError(f"{v!r} is not a recognisable rational")
        return q
    raise ValueError(f"cannot interpret {v!r} as a rational")


@dataclass(frozen=True)
class SpectralPair:
    N: int
    A: tuple
    L: tuple

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        A = tuple(sorted(set(int(a) for a in self.A)))
        L = tuple(sorted(set(as_fraction(l) for l in self.L)))
        if 0 not in A:
            raise ValueError("0 must belong to A")
        if L and 0 not in L:
            raise ValueError("0 must belong to L")
        if L and len(L) != len(A):
            raise ValueError("|L| must equal |A|")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "L", L)

    @property
    def p(self) -> int:
        return len(self.A)

    @property
    def integral(self) -> bool:
        return all(l.denominator == 1 for l in self.L)

    @property
    def hausdorff_dimension(self) -> float:
        return math.log(self.p) / math.log(self.N)

    def with_L(self, L) -> "SpectralPair":
        return SpectralPair(self.N, self.A, tuple(L))

    def linear_core_maps(self) -> list:
        return [Affine(1.0 / self.N, a / self.N) for a in self.A]


def kappa_A(pair: SpectralPair, t):
    t = np.asarray(t, dtype=float)
    a = np.asarray(pair.A, dtype=float)
    out = np.exp(1j * TWO_PI * np.multiply.outer(t, a) / pair.N).mean(axis=-1)
    return complex(out) if out.ndim == 0 else out


def _tail(pair: SpectralPair, t_abs: float, K: int) -> float:
    """Bound on |prod_{k >= K} kappa_A(t / N**k) - 1|."""
    s = TWO_PI * t_abs * max(pair.A) / (pair.N**K * (pair.N - 1))
    return math.expm1(s) if s < 700 else math.inf


def truncation_order(pair: SpectralPair, t_abs: float, tol: float) -> int:
    if tol <= 0:
        raise ValueError("tol must be positive")
    K = 0
    while _tail(pair, t_abs, K) >= tol:
        K += 1
    return K


@dataclass
class MuHat:
    value: complex
    terms: int
    bound: float


def mu_hat(pair: SpectralPair, t: float, tol: float = 1e-12) -> MuHat:
    """Fourier transform of the equal-weight self-similar measure, with truncation certificate."""
    K = truncation_order(pair, abs(t), tol)
    value = complex(1.0)
    for k in range(K):
        value *= kappa_A(pair, t / pair.N**k)
    return MuHat(value, K, _tail(pair, abs(t), K))


def mu_hat_array(pair: SpectralPair, ts, tol: float = 1e-12):
    """Vectorised mu_hat; returns (values, max truncation order)."""
    ts = np.asarray(ts, dtype=float)
    if ts.size == 0:
        return ts.astype(complex), 0
    K = truncation_order(pair, float(np.max(np.abs(ts))), tol)
    out = np.ones(ts.shape, dtype=complex)
    for k in range(K):
        out *= kappa_A(pair, ts / pair.N**k)
    return out, K


def dual_matrix(pair: SpectralPair) -> np.ndarray:
    a = np.asarray(pair.A, dtype=float)
    l = np.asarray([float(x) for x in pair.L])
    return np.exp(1j * TWO_PI * np.outer(a, l) / pair.N) / math.sqrt(pair.p)


def check_dual_set(pair: SpectralPair, threshold: float = 1e-10):
    H = dual_matrix(pair)
    dev = float(np.max(np.abs(H.conj().T @ H - np.eye(pair.p))))
    return dev < threshold, dev


def find_dual_sets(A: Sequence[int], N: int, threshold: float = 1e-10) -> list:
    A = tuple(sorted(set(int(a) for a in A)))
    p = len(A)
    found = []
    for rest in itertools.combinations(range(1, N), p - 1):
        L = (0,) + rest
        ok, _ = check_dual_set(SpectralPair(N, A, L), threshold)
        if ok:
            found.append(L)
    return found


@dataclass
class Spectrum:
    elements: list  # sorted Fractions
    k_max: int
    orders: list = field(default_factory=list)  # highest digit position used

    def as_array(self) -> np.ndarray:
        return np.array([float(x) for x in self.elements])

    def smallest(self, n: int) -> list:
        return self.elements[:n]

    def __len__(self):
        return len(self.elements)


def lambda_set(pair: SpectralPair, k_max: int) -> Spectrum:
    """All sums l_0 + N l_1 + ... + N**k l_k with k <= k_max."""
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    if pair.p ** (k_max + 1) > budget():
        raise BudgetExceeded(f"{pair.p}**{k_max + 1} spectrum words exceed budget")
    order = {Fraction(0): 0}
    for j in range(k_max + 1):
        scale = pair.N**j
        new = {}
        for lam, o in order.items():
            for l in pair.L:
                v = lam + l * scale
                if v not in order and v not in new:
                    new[v] = j
        order.update(new)
    elems = sorted(order)
    return Spectrum(elems, k_max, [order[e] for e in elems])


@dataclass
class FourierGram:
    matrix: np.ndarray
    max_offdiag: float
    witness: Optional[tuple]  # (lambda, lambda', |entry|) at the largest off-diagonal
    truncation: int


def fourier_gram(pair: SpectralPair, lambdas: Sequence, tol: float = 1e-12) -> FourierGram:
    """Entries <e_l | e_l'> = mu_hat(l - l') in L^2(mu)."""
    lam = np.array([float(x) for x in lambdas])
    n = lam.size
    diff = np.subtract.outer(lam, lam)
    vals, K = mu_hat_array(pair, diff, tol)
    np.fill_diagonal(vals, 1.0)
    witness = None
    max_off = 0.0
    if n > 1:
        mag = np.abs(vals)
        np.fill_diagonal(mag, -1.0)
        max_off = float(mag.max())
        # first pair attaining the maximum up to rounding, smaller index first
        hits = np.argwhere(np.triu(mag, 1) >= max_off - 1e-12)
        i, j = hits[0]
        witness = (lambdas[i], lambdas[j], float(mag[i, j]))
    return FourierGram(vals, max_off, witness, K)


@dataclass
class QResult:
    t: float
    value: float
    increment: float
    curve: list  # partial sums by spectrum order 0..k_max
    k_max: int


def q_function(pair: SpectralPair, t: float, k_max: int, tol: float = 1e-12,
               spectrum: Optional[Spectrum] = None) -> QResult:
    """Partial sums of Q(t) = sum |mu_hat(t - lambda)|**2 ordered by digit count."""
    spec = spectrum or lambda_set(pair, k_max)
    lam = spec.as_array()
    vals, _ = mu_hat_array(pair, t - lam, tol)
    sq = np.abs(vals) ** 2
    orders = np.asarray(spec.orders)
    top = int(orders.max()) if orders.size else 0
    per_order = np.array([sq[orders == o].sum() for o in range(top + 1)])
    curve = np.cumsum(per_order).tolist()
    inc = float(per_order[-1]) if per_order.size else 0.0
    return QResult(float(t), float(curve[-1]) if curve else 0.0, inc, curve, k_max)


def m0_fourier(pair: SpectralPair, t):
    t = np.asarray(t, dtype=float)
    a = np.asarray(pair.A, dtype=float)
    return np.exp(1j * TWO_PI * np.multiply.outer(t, a)).sum(axis=-1) / math.sqrt(pair.p)


def ruelle_apply(pair: SpectralPair, f: Callable, x):
    """(R_L f)(x) = (1/p) sum_l |m0((x - l)/N)|**2 f((x - l)/N)."""
    xa = np.asarray(x, dtype=float)
    total = np.zeros(xa.shape, dtype=float)
    for l in pair.L:
        y = (xa - float(l)) / pair.N
        total = total + np.abs(m0_fourier(pair, y)) ** 2 * np.asarray(f(y), dtype=float)
    out = total / pair.p
    return float(out) if out.ndim == 0 else out


# L-cycles ------------------------------------------------------------------------

@dataclass(frozen=True)
class Cycle:
    points: tuple  # xi_1..xi_k with xi_j = (xi_{j+1} - b_j) / N
    pairing: tuple  # b_1..b_k
    mode: str

    @property
    def trivial(self) -> bool:
        return self.points == (Fraction(0),)

    def to_dict(self) -> dict:
        return {"points": [str(x) for x in self.points], "pairing": [str(b) for b in self.pairing],
                "mode": self.mode}


def extremal_denominator(pair: SpectralPair) -> int:
    """d = gcd of pairwise differences of A; |m0(xi)|**2 = p iff d * xi is an integer."""
    if pair.p < 2:
        raise ValueError("cycle search needs p >= 2")
    return reduce(math.gcd, (abs(a - b) for a, b in itertools.combinations(pair.A, 2)))


def is_extremal(pair: SpectralPair, xi: Fraction) -> bool:
    return (xi * extremal_denominator(pair)).denominator == 1


def _canonical(points: tuple, pairing: tuple):
    k = len(points)
    r = min(range(k), key=lambda i: (points[i], pairing[i]))
    return points[r:] + points[:r], pairing[r:] + pairing[:r]


def _primitive(word: tuple) -> bool:
    k = len(word)
    return all(word != word[d:] + word[:d] for d in range(1, k) if k % d == 0)


def l_cycle_search(pair: SpectralPair, mode: str = "mod1", k_max: int = 6) -> list:
    """All L-cycles up to length k_max under the literal extremality definition.

    ``mod1``: points live in [0, 1) and xi_j = (xi_{j+1} - b_j)/N mod 1, with
    xi_{j+1} represented in [0, 1). ``real_fixed_point``: the cycle is a real
    fixed point of sigma_{b_1} o ... o sigma_{b_k}, no reduction.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    N = pair.N
    d = extremal_denominator(pair)
    found = {}
    if mode == "mod1":
        E = [Fraction(j, d) for j in range(d)]
        Eset = set(E)
        edges = {x: [] for x in E}  # xi' -> [(xi, b)]
        for src in E:
            for b in pair.L:
                dst = ((src - b) / N) % 1
                if dst in Eset:
                    edges[src].append((dst, b))

        # a cycle xi_1 <- xi_2 <- ... <- xi_k <- xi_1 along edges xi_{j+1} -> xi_j
        def dfs(start, node, pts, labels):
            for dst, b in edges[node]:
                if dst == start:
                    # pts are xi_k..., reverse to xi_1 order
                    points = tuple(reversed(pts))
                    pairing = tuple(reversed(labels + [b]))
                    key = _canonical(points, pairing)
                    found.setdefault(key, Cycle(key[0], key[1], mode))
                elif dst not in pts and len(pts) < k_max:
                    dfs(start, dst, pts + [dst], labels + [b])

        for start in E:
            dfs(start, start, [start], [])
        # dfs walks xi_1 -> ... in edge direction; relabel so that xi_j = sigma_{b_j}(xi_{j+1})
        out = []
        for c in found.values():
            out.append(_orient_mod1(pair, c))
        return _dedupe(out)
    if mode == "real_fixed_point":
        total = sum(pair.p**k for k in range(1, k_max + 1))
        if total > budget():
            raise BudgetExceeded("too many pairing words")
        for k in range(1, k_max + 1):
            for word in itertools.product(pair.L, repeat=k):
                if not _primitive(word):
                    continue
                xi1 = -sum(b * Fraction(N) ** (k - 1 - j) for j, b in enumerate(word)) / (Fraction(N) ** k - 1)
                pts = [xi1]
                # xi_j = (xi_{j+1} - b_j)/N  =>  xi_{j+1} = N xi_j + b_j
                for b in word[:-1]:
                    pts.append(N * pts[-1] + b)
                if all(is_extremal(pair, x) for x in pts):
                    key = _canonical(tuple(pts), tuple(word))
                    found.setdefault(key, Cycle(key[0], key[1], mode))
        return sorted(found.values(), key=lambda c: (len(c.points), c.points))
    raise ValueError(f"unknown cycle mode {mode!r}")


def _orient_mod1(pair: SpectralPair, cycle: Cycle) -> Cycle:
    """Re-derive pairing labels so that xi_j = (xi_{j+1} - b_j)/N (mod 1) for each j."""
    pts = cycle.points
    k = len(pts)
    for order in (pts, tuple(reversed(pts))):
        labels = []
        for j in range(k):
            nxt = order[(j + 1) % k]
            match = [b for b in pair.L if ((nxt - b) / pair.N) % 1 == order[j]]
            if not match:
                break
            labels.append(match[0])
        else:
            key = _canonical(order, tuple(labels))
            return Cycle(key[0], key[1], "mod1")
    return cycle


def _dedupe(cycles):
    seen = {}
    for c in cycles:
        seen.setdefault((c.points, c.pairing), c)
    return sorted(seen.values(), key=lambda c: (len(c.points), c.points))


def cycle_spectrum(pair: SpectralPair, cycles: Sequence[Cycle], k_max: int) -> Spectrum:
    """Orbits of the cycle points under x -> N x + l, up to k_max steps.

    The trivial cycle contributes Lambda itself. Elements are tagged with the
    step count, so ``q_function`` partial sums stay monotone in k_max.
    """
    order = {}
    for c in cycles:
        frontier = {x: 0 for x in c.points}
        for x in frontier:
            order.setdefault(x, 0)
        for step in range(1, k_max + 2):
            new = {}
            for x in frontier:
                for l in pair.L:
                    y = pair.N * x + l
                    if y not in order and y not in new:
                        new[y] = step - 1
            if len(order) + len(new) > budget():
                raise BudgetExceeded("cycle spectrum exceeds budget")
            order.update(new)
            frontier = new
    elems = sorted(order)
    return Spectrum(elems, k_max, [order[e] for e in elems])


# transport to the conjugate fractal --------------------------------------------

@dataclass
class GeneralizedGram:
    change_of_variables: np.ndarray
    quadrature: np.ndarray
    max_discrepancy: float
    max_identity_deviation: float
    depth: int


def _check_linear_source(pair: SpectralPair, conj: Conjugacy):
    src_core = [conj.source.maps[a] for a in conj.source.core]
    expected = pair.linear_core_maps()
    ok = len(src_core) == len(expected) and all(
        isinstance(m, Affine) and math.isclose(m.a, e.a) and math.isclose(m.b, e.b, abs_tol=1e-15)
        for m, e in zip(src_core, expected)
    )
    if not ok:
        raise ValueError("conjugacy source core maps are not the linear system of the spectral pair")


def generalized_fourier_gram(pair: SpectralPair, conj: Conjugacy, lambdas: Sequence, depth: int = 12,
                             tol: float = 1e-12, phi_depth: int = 40) -> GeneralizedGram:
    """Gram matrix of e_lambda o phi^{-1} in L^2(mu), mu the target measure.

    (a) change of variables gives fourier_gram exactly; (b) direct quadrature of
    the target measure at the given depth, with phi^{-1} by digit transport.
    """
    _check_linear_source(pair, conj)
    G_a = fourier_gram(pair, lambdas, tol).matrix
    nodes = quadrature_nodes(conj.target, depth)
    y = phi_inverse_eval(conj, nodes, phi_depth)
    lam = np.array([float(x) for x in lambdas])
    E = np.exp(1j * TWO_PI * np.outer(lam, y))
    G_b = (E @ E.conj().T) / y.size
    return GeneralizedGram(
        G_a,
        G_b,
        float(np.max(np.abs(G_a - G_b))),
        float(np.max(np.abs(G_b - np.eye(lam.size)))),
        depth,
    )


# named pairs --------------------------------------------------------------------

def quarter_cantor_pair() -> SpectralPair:
    return SpectralPair(4, (0, 3), (0, 2))


def third_cantor_relaxed_pair() -> SpectralPair:
    return SpectralPair(3, (0, 2), (0, Fraction(3, 4)))



# report ---------------------------------------------------------------------------

def fourier_report(pair: SpectralPair, k_max: int = 12, tol: float = 1e-12, gram_size: int = 64,
                   q_points: int = 21, orth_tol: float = 1e-6, q_floor: float = 0.95,
                   cycle_k_max: int = 6) -> dict:
    """Spectral checks for ``pair``. The verdict follows the Gram and Q numerics only;
    cycles, the Ruelle check and the cycle-completed Q are diagnostics."""
    unitary, dev = check_dual_set(pair)
    spec = lambda_set(pair, k_max)
    gram = fourier_gram(pair, spec.smallest(gram_size), tol)
    ts = [j / q_points for j in range(q_points)]
    qs = [q_function(pair, t, k_max, tol, spectrum=spec) for t in ts]
    monotone = all(all(b >= a - 1e-15 for a, b in zip(q.curve, q.curve[1:])) for q in qs)
    bessel = all(q.value <= 1 + 1e-9 for q in qs)

    cycles, completed = [], None
    if pair.p >= 2:
        for mode in ("mod1", "real_fixed_point"):
            cycles += [c.to_dict() for c in l_cycle_search(pair, mode, cycle_k_max)]
        real = l_cycle_search(pair, "real_fixed_point", cycle_k_max)
        if len(real) > 1:
            cspec = cycle_spectrum(pair, real, k_max)
            completed = [{"t": t, "value": q_function(pair, t, k_max, tol, spectrum=cspec).value,
                          "k_max": k_max} for t in ts]

    xs = np.linspace(-1.0, 1.0, 101)
    ruelle_dev = float(np.max(np.abs(ruelle_apply(pair, lambda y: np.ones_like(y), xs) - 1.0)))

    if gram.max_offdiag >= orth_tol:
        verdict = "orthonormality-fails"
    elif bessel and monotone and min(q.value for q in qs) >= q_floor:
        verdict = "ONB-consistent"
    else:
        verdict = "inconclusive"
    out = {
        "N": pair.N,
        "A": list(pair.A),
        "L": [str(l) for l in pair.L],
        "L_integral": pair.integral,
        "unitary": unitary,
        "unitarity_dev": dev,
        "dual_sets_mod_N": [list(L) for L in find_dual_sets(pair.A, pair.N)],
        "cycles": cycles,
        "gram_size": len(gram.matrix),
        "gram_max_offdiag": gram.max_offdiag,
        "gram_truncation_terms": gram.truncation,
        "Q_samples": [{"t": q.t, "value": q.value, "k_max": q.k_max, "last_increment": q.increment}
                      for q in qs],
        "Q_monotone": monotone,
        "Q_bessel": bessel,
        "ruelle_constant_dev": ruelle_dev,
        "verdict": verdict,
    }
    if gram.witness is not None and verdict == "orthonormality-fails":
        a, b, v = gram.witness
        out["witness"] = {"lambda": str(a), "lambda_prime": str(b), "abs_inner_product": v}
    if completed is not None:
        out["Q_samples_cycle_completed"] = completed
    return out
