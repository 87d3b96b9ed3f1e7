"""Exact measure algebra of cells ``tau_w(C) + m`` and quadrature against mu.

A cell has H-measure ``p**-len(w)`` whatever the maps are; two cells meet in
positive measure only when they are nested, so every inner product of finite
cell combinations reduces to word combinatorics with exact rationals.

Coefficients may be ``int``/``Fraction`` (kept exact) or float/complex. A
``CellFunction`` also carries ``root`` in {0, 1}: the whole function is
multiplied by ``sqrt(p)**root``. This keeps the 1/sqrt(p) factors of the
scaling operator exact.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional

import numpy as np

from .config import BudgetExceeded, budget
from .ifs import IFSystem, word_apply


@dataclass(frozen=True, order=True)
class Cell:
    word: tuple
    shift: int = 0

    def __post_init__(self):
        object.__setattr__(self, "word", tuple(int(c) for c in self.word))
        object.__setattr__(self, "shift", int(self.shift))

    def __len__(self):
        return len(self.word)


def cell_measure(system, cell: Cell) -> Fraction:
    return Fraction(1, system.p ** len(cell.word))


def _is_ancestor(core, coarse: tuple, fine: tuple) -> bool:
    """True when tau_fine(C) is contained in tau_coarse(C) up to H-null sets."""
    extra = len(fine) - len(coarse)
    if extra < 0:
        return False
    if coarse and fine[extra:] != coarse:
        return False
    return all(c in core for c in fine[:extra])


def cell_intersection_measure(system, c1: Cell, c2: Cell) -> Fraction:
    if c1.shift != c2.shift:
        return Fraction(0)
    core = set(system.core)
    if len(c1.word) > len(c2.word):
        c1, c2 = c2, c1
    if _is_ancestor(core, c1.word, c2.word):
        return cell_measure(system, c2)
    return Fraction(0)


def sigma_image(system, cell: Cell) -> list:
    """sigma(cell) as a list of disjoint cells (H-measure scales by exactly p)."""
    if cell.word:
        return [Cell(cell.word[:-1], cell.word[-1] + system.N * cell.shift)]
    return [Cell((), a + system.N * cell.shift) for a in system.core]


def sigma_preimage(system, cell: Cell) -> Cell:
    q, r = divmod(cell.shift, system.N)
    return Cell(cell.word + (r,), q)


def children(system, cell: Cell) -> list:
    """Split tau_w(C) + m into the p cells tau_{(a,)+w}(C) + m."""
    return [Cell((a,) + cell.word, cell.shift) for a in system.core]


def _scale(c, factor: Fraction):
    if isinstance(c, (int, Fraction)):
        return c * factor
    return c * float(factor)


def _is_zero(c) -> bool:
    return c == 0


class CellFunction:
    """Finite linear combination ``sqrt(p)**root * sum coef * chi_cell``."""

    __slots__ = ("system", "terms", "root")

    def __init__(self, system, terms=None, root: int = 0):
        self.system = system
        acc = defaultdict(int)
        for cell, coef in (terms or {}).items():
            if not isinstance(cell, Cell):
                cell = Cell(*cell)
            acc[cell] += coef
        p = system.p
        # fold even powers of sqrt(p) into the coefficients
        shift = root - (root % 2)
        if shift:
            factor = Fraction(p) ** (shift // 2)
            acc = {c: _scale(v, factor) for c, v in acc.items()}
        self.terms = {c: v for c, v in acc.items() if not _is_zero(v)}
        self.root = root % 2

    @classmethod
    def indicator(cls, system, cell: Cell, coef=1, root: int = 0):
        return cls(system, {cell: coef}, root)

    def __repr__(self):
        body = ", ".join(f"{c.word}+{c.shift}: {v}" for c, v in sorted(self.terms.items()))
        pre = f"sqrt({self.system.p})*" if self.root else ""
        return f"CellFunction({pre}{{{body}}})"

    def __len__(self):
        return len(self.terms)

    def __bool__(self):
        return bool(self.terms)

    @property
    def depth(self) -> int:
        return max((len(c.word) for c in self.terms), default=0)

    @property
    def shifts(self) -> set:
        return {c.shift for c in self.terms}

    def map_cells(self, fn: Callable, root_delta: int = 0) -> "CellFunction":
        out = defaultdict(int)
        for cell, coef in self.terms.items():
            for new in fn(cell):
                out[new] += coef
        return CellFunction(self.system, out, self.root + root_delta)

    def scaled(self, value, root: int = 0) -> "CellFunction":
        """Multiply by ``value * sqrt(p)**root``."""
        return CellFunction(self.system, {c: v * value for c, v in self.terms.items()}, self.root + root)

    def _with_root(self, root: int) -> dict:
        if root == self.root:
            return self.terms
        # root 1 -> 0 needs an irrational factor
        factor = math.sqrt(self.system.p) if self.root > root else 1.0 / math.sqrt(self.system.p)
        return {c: v * factor for c, v in self.terms.items()}

    def __add__(self, other: "CellFunction") -> "CellFunction":
        root = min(self.root, other.root)
        acc = defaultdict(int, self._with_root(root))
        for c, v in other._with_root(root).items():
            acc[c] += v
        return CellFunction(self.system, acc, root)

    def __neg__(self):
        return self.scaled(-1)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, value):
        return self.scaled(value)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, CellFunction):
            return NotImplemented
        # equality in L^2(H): exact for rational coefficients
        d = self - other
        s, _ = _inner_parts(d, d)
        return s == 0

    __hash__ = None

    def allclose(self, other: "CellFunction", tol: float = 1e-12) -> bool:
        """||self - other||_H <= tol, for coefficients that are not exact."""
        d = self - other
        s, r = _inner_parts(d, d)
        return abs(_surd_value(s, r, self.system.p)) <= tol * tol

    def to_json(self) -> list:
        s = math.sqrt(self.system.p) ** self.root
        out = []
        for cell, coef in sorted(self.terms.items()):
            z = complex(coef) * s
            out.append({"word": list(cell.word), "shift": cell.shift, "re": z.real, "im": z.imag})
        return out

    @classmethod
    def from_json(cls, system, data: Iterable[dict]) -> "CellFunction":
        terms = defaultdict(int)
        for item in data:
            coef = complex(item.get("re", 0.0), item.get("im", 0.0))
            if coef.imag == 0:
                coef = coef.real
            terms[Cell(tuple(item["word"]), item.get("shift", 0))] += coef
        return cls(system, terms)


def _ancestors(core, word: tuple):
    """Proper coarser words whose cell contains tau_word(C)."""
    j = 0
    while j < len(word) and word[j] in core:
        j += 1
        yield word[j:]


def normalize(f: CellFunction) -> CellFunction:
    """Split coarse cells until no two stored cells are nested; merge and drop zeros."""
    system = f.system
    core = set(system.core)
    terms = defaultdict(int, f.terms)
    while True:
        present = set(terms)
        to_split = set()
        for cell in present:
            for anc in _ancestors(core, cell.word):
                cand = Cell(anc, cell.shift)
                if cand in present:
                    to_split.add(cand)
        if not to_split:
            break
        for cell in to_split:
            coef = terms.pop(cell)
            for child in children(system, cell):
                terms[child] += coef
    return CellFunction(system, terms, f.root)


def _inner_parts(f: CellFunction, g: CellFunction):
    """(S, r) with <f|g> = S * sqrt(p)**r, S exact for exact coefficients."""
    system = f.system
    core = set(system.core)
    p = system.p
    by_shift = defaultdict(list)
    for cell, coef in g.terms.items():
        by_shift[cell.shift].append((cell.word, coef))
    total = 0
    for cell, cf in f.terms.items():
        bucket = by_shift.get(cell.shift)
        if not bucket:
            continue
        w1 = cell.word
        for w2, cg in bucket:
            if len(w1) <= len(w2):
                hit = _is_ancestor(core, w1, w2)
                depth = len(w2)
            else:
                hit = _is_ancestor(core, w2, w1)
                depth = len(w1)
            if hit:
                total += cf * cg.conjugate() * Fraction(1, p**depth)
    return total, f.root + g.root


def _surd_value(s, r: int, p: int):
    if r % 2:
        return s * math.sqrt(p) ** r
    factor = Fraction(p) ** (r // 2)
    return s * factor if isinstance(s, (int, Fraction)) else s * float(factor)


def inner_product(f: CellFunction, g: CellFunction):
    """<f|g> = integral of f * conj(g) dH.

    Exact (``Fraction``) for rational coefficients whenever the combined
    sqrt(p) power is even.
    """
    s, r = _inner_parts(f, g)
    return _surd_value(s, r, f.system.p)


def inner_product_abs2(f: CellFunction, g: CellFunction):
    """|<f|g>|**2, exact for rational coefficients."""
    s, r = _inner_parts(f, g)
    if isinstance(s, (int, Fraction)):
        return Fraction(s) ** 2 * Fraction(f.system.p) ** r
    return abs(s) ** 2 * f.system.p**r


def norm_squared(f: CellFunction):
    s, r = _inner_parts(f, f)
    v = _surd_value(s, r, f.system.p)
    return v if isinstance(v, (int, Fraction)) else complex(v).real


# quadrature against the self-similar probability measure mu -------------------

def fixed_point(contraction, tol: float = 1e-14, max_iter: int = 10_000) -> float:
    x = 0.5
    for _ in range(max_iter):
        y = float(contraction.forward(x))
        if abs(y - x) <= tol:
            return y
        x = y
    return x


def quadrature_nodes(system: IFSystem, depth: int, anchor: Optional[float] = None) -> np.ndarray:
    """Points tau_w(anchor), w over the core alphabet to the given depth."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if system.p**depth > budget():
        raise BudgetExceeded(f"p**depth = {system.p ** depth} exceeds budget {budget()}")
    if anchor is None:
        anchor = fixed_point(system.maps[system.core[0]])
    pts = np.array([anchor], dtype=float)
    for _ in range(depth):
        pts = np.concatenate([np.asarray(system.maps[a].forward(pts), dtype=float) for a in system.core])
    return pts


@dataclass
class QuadratureResult:
    value: complex
    error_bound: float
    depth: int
    certified: bool


def quadrature_mu(system: IFSystem, f: Callable, depth: int, lipschitz: Optional[float] = None,
                  anchor: Optional[float] = None) -> QuadratureResult:
    """p**-depth * sum f(tau_w(x0)) over core words of the given length.

    With a Lipschitz bound for f the error bound Lip * c**depth is certified,
    where c is the largest core contraction constant; otherwise the reported
    bound is the spread between depths ``depth - 1`` and ``depth``.
    """
    pts = quadrature_nodes(system, depth, anchor)
    vals = np.asarray(f(pts))
    if vals.shape != pts.shape:
        vals = np.broadcast_to(vals, pts.shape)
    # numpy's sum is pairwise; cheaper than fsum and deterministic
    value = complex(np.mean(vals)) if np.iscomplexobj(vals) else float(np.mean(vals))
    c = max(system.maps[a].lipschitz for a in system.core)
    if lipschitz is not None:
        return QuadratureResult(value, lipschitz * c**depth, depth, True)
    if depth == 0:
        return QuadratureResult(value, float("inf"), depth, False)
    coarse_pts = quadrature_nodes(system, depth - 1, anchor)
    coarse = np.mean(np.asarray(f(coarse_pts)))
    return QuadratureResult(value, float(abs(value - coarse)), depth, False)


# Monte Carlo oracle ------------------------------------------------------------

def chaos_game_points(system: IFSystem, n: int, rng: np.random.Generator, depth: int = 40) -> np.ndarray:
    """n samples of mu: random core words applied to uniform random anchors."""
    x = rng.random(n)
    letters = rng.integers(0, system.p, size=(depth, n))
    core = np.asarray(system.core)
    for row in letters:
        chosen = core[row]
        out = np.empty_like(x)
        for a in system.core:
            mask = chosen == a
            out[mask] = system.maps[a].forward(x[mask])
        x = out
    return x


def chaos_game_intersection(system: IFSystem, c1: Cell, c2: Cell, n: int = 10**6,
                            seed: int = 0, tail_depth: Optional[int] = None):
    """Monte Carlo estimate of H(c1 & c2) with its standard error.

    Samples H restricted to c1 (mass p**-len(c1)) geometrically and tests
    membership in c2 by inverting the branches numerically, see ``in_cell``.
    Points whose membership cannot be resolved in floating point count one
    half, and their spread is added to the binomial standard error.
    """
    rng = np.random.default_rng(seed)
    y = np.asarray(word_apply(system, c1.word, chaos_game_points(system, n, rng)), dtype=float)
    y = y + c1.shift
    mass = float(cell_measure(system, c1))
    depth = tail_depth if tail_depth is not None else max(len(c1.word) - len(c2.word), 0) + 2
    inside, ambiguous = in_cell(system, y, c2, depth, return_ambiguous=True)
    amb = float(np.mean(ambiguous))
    frac = float(np.mean(inside & ~ambiguous)) + amb / 2
    se = mass * math.sqrt(frac * (1.0 - frac) / n + (amb / 2) ** 2)
    return mass * frac, se


def _inverse_step(system, d, u, err):
    """Map u through branch d inverse; propagate the error bound with the local slope."""
    knots = np.append(system.knots[: system.N], 1.0)
    lo, hi = knots[d], knots[d + 1]
    uu = np.clip(u, lo, hi)
    h = 1e-7
    a = np.clip(uu - h, lo, hi)
    b = np.clip(uu + h, lo, hi)
    out = np.empty_like(uu)
    slope = np.empty_like(uu)
    for i, m in enumerate(system.maps):
        mask = d == i
        if np.any(mask):
            out[mask] = m.inverse(uu[mask])
            fa, fb = m.inverse(a[mask]), m.inverse(b[mask])
            slope[mask] = np.abs(fb - fa) / np.maximum(b[mask] - a[mask], 1e-300)
    return np.clip(out, 0.0, 1.0), err * slope * 1.01 + 1e-16


def in_cell(system, y, cell: Cell, tail_depth: int = 2, err0: float = 2e-15,
            return_ambiguous: bool = False):
    """Numerical membership of points y in tau_w(C) + m.

    Peels the letters of w outermost first, then checks ``tail_depth`` further
    letters lie in the core alphabet. An error bound is carried along each
    path. A point whose path comes within it of a knot is re-decided by
    following every admissible branch; when that disagrees with the plain
    floating-point coding the point is ambiguous at this resolution.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    core = np.asarray(system.core)
    knots = np.append(system.knots[: system.N], 1.0)
    steps = list(reversed(cell.word)) + [None] * tail_depth
    u = y - cell.shift
    err = np.full(u.shape, err0)
    ok = (u >= 0) & (u <= 1)
    near = (np.abs(u) < err) | (np.abs(u - 1) < err)
    u = np.clip(u, 0.0, 1.0)
    for t in steps:
        if t is None:
            d = np.asarray(np.clip(np.searchsorted(knots, u, side="right") - 1, 0, system.N - 1))
            ok &= np.isin(d, core)
        else:
            d = np.full(u.shape, t)
            ok &= (u >= knots[t]) & (u <= knots[t + 1])
        near |= (d > 0) & (np.abs(u - knots[d]) < err)
        near |= (d < system.N - 1) & (np.abs(u - knots[d + 1]) < err)
        u, err = _inverse_step(system, d, u, err)
    ambiguous = np.zeros(y.shape, dtype=bool)
    for i in np.flatnonzero(near):
        tolerant = _in_cell_search(system, float(y[i] - cell.shift), err0, steps, knots)
        if tolerant != ok[i]:
            ambiguous[i] = True
            ok[i] = tolerant
    return (ok, ambiguous) if return_ambiguous else ok


def _in_cell_search(system, u: float, err: float, steps: list, knots) -> bool:
    if u < -err or u > 1 + err:
        return False
    u = min(max(u, 0.0), 1.0)
    core = set(system.core)

    def walk(u, err, j):
        if j == len(steps):
            return True
        t = steps[j]
        cands = [t] if t is not None else list(system.core)
        for d in cands:
            if knots[d] - err <= u <= knots[d + 1] + err and (t is not None or d in core):
                v, e = _inverse_step(system, np.array([d]), np.array([u]), np.array([err]))
                if walk(float(v[0]), float(e[0]), j + 1):
                    return True
        return False

    return walk(u, err, 0)


# seeded random objects for property checks -------------------------------------

def random_cell(system, rng: np.random.Generator, max_depth: int = 4, max_shift: int = 3) -> Cell:
    depth = int(rng.integers(0, max_depth + 1))
    word = tuple(int(a) for a in rng.integers(0, system.N, size=depth))
    return Cell(word, int(rng.integers(-max_shift, max_shift + 1)))


def random_cell_function(system, rng: np.random.Generator, n_terms: int = 5, max_depth: int = 4,
                         max_shift: int = 3, denominator: int = 12, root: int = 0) -> CellFunction:
    """Random combination with rational (Fraction) real coefficients."""
    terms = defaultdict(int)
    for _ in range(n_terms):
        num = int(rng.integers(-denominator, denominator + 1))
        den = int(rng.integers(1, denominator + 1))
        terms[random_cell(system, rng, max_depth, max_shift)] += Fraction(num, den)
    return CellFunction(system, terms, root)
