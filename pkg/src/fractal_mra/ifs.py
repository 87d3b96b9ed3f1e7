"""Contractions, gap-filled iterated function systems and the scaling map.

Words are plain tuples ``(i_1, ..., i_k)`` composed innermost-first:
``tau_w = tau_{i_k} o ... o tau_{i_1}``, so the last letter is the coarsest.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

Word = tuple  # tuple[int, ...]

CHAIN_TOL = 1e-12
BISECTION_TOL = 1e-13


class NumericError(ArithmeticError):
    """Raised when a map cannot be inverted numerically."""


def _scalar_or_array(x, out):
    if np.ndim(x) == 0:
        return float(out)
    return out


class Contraction:
    """Increasing injective map of [0, 1] into itself."""

    family: str = "abstract"

    def __call__(self, x):
        return self.forward(x)

    def forward(self, x):
        raise NotImplementedError

    def inverse(self, y):
        raise NotImplementedError

    @property
    def lipschitz(self) -> float:
        raise NotImplementedError

    def is_increasing(self) -> bool:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Affine(Contraction):
    a: float
    b: float
    family = "affine"

    def forward(self, x):
        return self.a * x + self.b

    def inverse(self, y):
        return (y - self.b) / self.a

    @property
    def lipschitz(self) -> float:
        return abs(float(self.a))

    def is_increasing(self) -> bool:
        return self.a > 0

    def to_dict(self) -> dict:
        return {"family": "affine", "a": float(self.a), "b": float(self.b)}


def rho(j: int, n: int) -> Affine:
    """The standard branch x -> (x + j) / n."""
    return Affine(1.0 / n, j / n)


@dataclass(frozen=True)
class Quadratic(Contraction):
    """x -> alpha x^2 + beta x + gamma."""

    alpha: float
    beta: float
    gamma: float
    family = "quadratic"

    def forward(self, x):
        return (self.alpha * x + self.beta) * x + self.gamma

    def inverse(self, y):
        # rationalised root of the increasing branch; stable for alpha -> 0
        d = np.asarray(y, dtype=float) - self.gamma
        disc = np.maximum(self.beta**2 + 4.0 * self.alpha * d, 0.0)
        out = 2.0 * d / (self.beta + np.sqrt(disc))
        return _scalar_or_array(y, out)

    @property
    def lipschitz(self) -> float:
        # derivative 2 alpha x + beta is affine: extremes at the endpoints
        return max(abs(self.beta), abs(2.0 * self.alpha + self.beta))

    def is_increasing(self) -> bool:
        return self.beta > 0 and 2.0 * self.alpha + self.beta > 0

    def to_dict(self) -> dict:
        return {"family": "quadratic", "alpha": self.alpha, "beta": self.beta, "gamma": self.gamma}


@dataclass(frozen=True)
class LogExp(Contraction):
    """x -> s * log_base(x + 1) + t."""

    s: float
    base: float
    t: float
    family = "logexp"

    def __post_init__(self):
        if self.base <= 1:
            raise ValueError("logexp base must exceed 1")

    def forward(self, x):
        out = self.s * np.log1p(np.asarray(x, dtype=float)) / math.log(self.base) + self.t
        return _scalar_or_array(x, out)

    def inverse(self, y):
        out = np.expm1((np.asarray(y, dtype=float) - self.t) * math.log(self.base) / self.s)
        return _scalar_or_array(y, out)

    @property
    def lipschitz(self) -> float:
        # derivative s / ((x + 1) ln base) is largest at 0
        return abs(self.s) / math.log(self.base)

    def is_increasing(self) -> bool:
        return self.s > 0

    def to_dict(self) -> dict:
        return {"family": "logexp", "s": self.s, "base": self.base, "t": self.t}


@dataclass(frozen=True)
class Generic(Contraction):
    """Arbitrary increasing contraction with a caller-certified Lipschitz constant.

    Without an explicit inverse, inversion is by vectorised bisection on [0, 1].
    """

    fn: Callable
    certified_lipschitz: float
    inverse_fn: Optional[Callable] = None
    tol: float = BISECTION_TOL
    family = "generic"

    def forward(self, x):
        return self.fn(x)

    def inverse(self, y):
        if self.inverse_fn is not None:
            return self.inverse_fn(y)
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        lo = np.zeros_like(y_arr)
        hi = np.ones_like(y_arr)
        f_lo = np.asarray(self.fn(lo), dtype=float)
        f_hi = np.asarray(self.fn(hi), dtype=float)
        if np.any(y_arr < f_lo - CHAIN_TOL) or np.any(y_arr > f_hi + CHAIN_TOL):
            raise NumericError("bisection does not bracket the requested value")
        while np.max(hi - lo) > self.tol:
            mid = 0.5 * (lo + hi)
            below = np.asarray(self.fn(mid), dtype=float) < y_arr
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
        return float(out[0]) if np.ndim(y) == 0 else out

    @property
    def lipschitz(self) -> float:
        return float(self.certified_lipschitz)

    def is_increasing(self) -> bool:
        xs = np.linspace(0.0, 1.0, 257)
        return bool(np.all(np.diff(np.asarray(self.fn(xs), dtype=float)) > 0))

    def to_dict(self) -> dict:
        raise TypeError("generic contractions are not serialisable")


@dataclass(frozen=True)
class IFSystem:
    """Gap-filled system ``maps`` whose positions ``core`` hold the original IFS."""

    maps: tuple
    core: tuple
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(self, "core", tuple(sorted(int(a) for a in self.core)))

    @property
    def N(self) -> int:
        return len(self.maps)

    @property
    def p(self) -> int:
        return len(self.core)

    @property
    def gaps(self) -> tuple:
        core = set(self.core)
        return tuple(i for i in range(self.N) if i not in core)

    @property
    def c_max(self) -> float:
        return max(m.lipschitz for m in self.maps)

    @property
    def knots(self) -> np.ndarray:
        """Left endpoints tau_i(0) of the branch intervals."""
        return np.array([float(m.forward(0.0)) for m in self.maps])

    def is_homogeneous_linear(self) -> bool:
        return all(
            isinstance(m, Affine) and math.isclose(m.a, 1.0 / self.N) and math.isclose(m.b, i / self.N)
            for i, m in enumerate(self.maps)
        )

    @property
    def hausdorff_dimension(self) -> Optional[float]:
        if not self.is_homogeneous_linear():
            return None
        return math.log(self.p) / math.log(self.N)

    def in_sigma(self, word: Sequence[int]) -> bool:
        """Membership in the restricted word set: non-empty, first letter a gap letter."""
        return len(word) > 0 and word[0] not in self.core


@dataclass
class ValidationReport:
    ok: bool
    violations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": list(self.violations)}


def validate(system: IFSystem) -> ValidationReport:
    problems = []
    N = system.N
    if N == 0:
        return ValidationReport(False, ["system has no maps"])
    if system.p < 1:
        problems.append("core index set is empty")
    for a in system.core:
        if not 0 <= a < N:
            problems.append(f"core index {a} out of range 0..{N - 1}")
    if len(set(system.core)) != len(system.core):
        problems.append("core indices repeat")
    for i, m in enumerate(system.maps):
        if not m.is_increasing():
            problems.append(f"map {i} is not increasing")
            continue
        lip = m.lipschitz
        if not lip < 1:
            problems.append(f"map {i} has Lipschitz constant {lip:.6g} >= 1")
        lo, hi = float(m.forward(0.0)), float(m.forward(1.0))
        if lo < -CHAIN_TOL or hi > 1 + CHAIN_TOL:
            problems.append(f"map {i} does not map [0,1] into [0,1]")
    if problems:
        return ValidationReport(False, problems)
    first = float(system.maps[0].forward(0.0))
    last = float(system.maps[-1].forward(1.0))
    if abs(first) > CHAIN_TOL:
        problems.append(f"ordering: tau_0(0) = {first:.12g} != 0")
    if abs(last - 1.0) > CHAIN_TOL:
        problems.append(f"ordering: tau_{N - 1}(1) = {last:.12g} != 1")
    for i in range(N - 1):
        right = float(system.maps[i].forward(1.0))
        left = float(system.maps[i + 1].forward(0.0))
        if abs(right - left) > CHAIN_TOL:
            problems.append(
                f"endpoint chaining: tau_{i}(1) = {right:.12g} != tau_{i + 1}(0) = {left:.12g}"
            )
    return ValidationReport(not problems, problems)


def gap_fill(core_maps: Sequence[Contraction], subdivisions=1, name: str = "") -> IFSystem:
    """Insert affine fillers so the branch images tile [0, 1] end to end.

    ``subdivisions`` is an int applied to every gap or a per-gap sequence
    (gaps counted left to right, zero-length gaps included).
    """
    core_maps = list(core_maps)
    if not core_maps:
        raise ValueError("need at least one core map")
    for i, m in enumerate(core_maps):
        if not m.is_increasing():
            raise ValueError(f"core map {i} is not increasing")
        if not m.lipschitz < 1:
            raise ValueError(f"core map {i} is not a contraction")
    ends = [(float(m.forward(0.0)), float(m.forward(1.0))) for m in core_maps]
    for (_, r), (l, _) in zip(ends, ends[1:]):
        if l < r - CHAIN_TOL:
            raise ValueError("core maps are not in ascending order")
    bounds = [0.0] + [e for pair in ends for e in pair] + [1.0]
    gaps = [(bounds[2 * j], bounds[2 * j + 1]) for j in range(len(core_maps) + 1)]
    if isinstance(subdivisions, int):
        subdivisions = [subdivisions] * len(gaps)
    if len(subdivisions) != len(gaps):
        raise ValueError(f"expected {len(gaps)} subdivision counts")

    maps, core = [], []
    for j, (lo, hi) in enumerate(gaps):
        width = hi - lo
        if width > CHAIN_TOL:
            s = int(subdivisions[j])
            if s < 1:
                raise ValueError("subdivisions must be positive")
            piece = width / s
            if not piece < 1:
                raise ValueError("gap filler would not be a contraction")
            maps.extend(Affine(piece, lo + q * piece) for q in range(s))
        if j < len(core_maps):
            core.append(len(maps))
            maps.append(core_maps[j])
    return IFSystem(tuple(maps), tuple(core), name)


def word_apply(system: IFSystem, word: Sequence[int], x):
    for letter in word:
        if not 0 <= letter < system.N:
            raise IndexError(f"letter {letter} out of range for N={system.N}")
        x = system.maps[letter].forward(x)
    return x


def branch_index(system: IFSystem, u):
    """Index i with u in [tau_i(0), tau_i(1)); u = 1 belongs to the last branch."""
    idx = np.searchsorted(system.knots, u, side="right") - 1
    return np.clip(idx, 0, system.N - 1)


def _apply_branchwise(system: IFSystem, branch, u, inverse: bool):
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    for i, m in enumerate(system.maps):
        mask = branch == i
        if np.any(mask):
            out[mask] = m.inverse(u[mask]) if inverse else m.forward(u[mask])
    return out


def scaling_eval(system: IFSystem, x):
    """The expanding scaling map sigma on R; sigma(x + m) = sigma(x) + N m."""
    xa = np.asarray(x, dtype=float)
    k = np.floor(xa)
    u = xa - k
    i = branch_index(system, u)
    out = _apply_branchwise(system, i, u, inverse=True) + i + system.N * k
    return _scalar_or_array(x, out)


def scaling_inverse_eval(system: IFSystem, x):
    xa = np.asarray(x, dtype=float)
    N = system.N
    k = np.floor(xa / N)
    r = xa - N * k
    i = np.clip(np.floor(r), 0, N - 1).astype(int)
    out = _apply_branchwise(system, i, r - i, inverse=False) + k
    return _scalar_or_array(x, out)


def digit_code(system: IFSystem, x, depth: int):
    """Greedy branch digits of x in [0, 1], coarsest first.

    Scalar input gives a tuple of ``depth`` letters; array input an
    (n, depth) integer array.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    xa = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if np.any(~np.isfinite(xa)):
        raise NumericError("cannot digit-code a non-finite value")
    xa = np.clip(xa, 0.0, 1.0)
    digits = np.empty((xa.size, depth), dtype=int)
    at_one = xa >= 1.0
    for j in range(depth):
        d = branch_index(system, xa)
        d = np.where(at_one, system.N - 1, d)
        digits[:, j] = d
        xa = np.clip(_apply_branchwise(system, d, xa, inverse=True), 0.0, 1.0)
        at_one = at_one | (xa >= 1.0)
    if np.ndim(x) == 0:
        return tuple(int(v) for v in digits[0])
    return digits


def reconstruct(system: IFSystem, digits: Sequence[int], anchor: float = 0.0) -> float:
    """Inverse of ``digit_code``: apply the maps outermost-first to ``anchor``."""
    return word_apply(system, tuple(reversed(tuple(digits))), anchor)


YES, NO, UNKNOWN = "yes", "no", "unknown"


def in_enlarged_fractal(system: IFSystem, x: float, depth: int):
    """Three-valued membership of x in the enlarged fractal R.

    Returns ``("yes", j)`` when the digits from position j onward (1-based)
    all lie in the core alphabet over at least half of the computed depth,
    so x is within c_max**(depth - j + 1) of a point of tau_w(C) and the tail
    is stable; ``("unknown", depth)`` otherwise. Because R is dense no finite
    digit prefix certifies non-membership, so ``"no"`` is only returned for
    non-finite input.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if not math.isfinite(x):
        return NO, 0
    u = x - math.floor(x)
    digits = digit_code(system, u, depth)
    core = set(system.core)
    entry = depth + 1
    for j in range(depth - 1, -1, -1):
        if digits[j] in core:
            entry = j + 1
        else:
            break
    tail = depth - entry + 1
    if tail >= 1 and (tail * 2 >= depth or entry == 1):
        return YES, entry
    return UNKNOWN, depth


def in_limit_set(system: IFSystem, y: float, depth: int, knot_tol: float = 1e-12):
    """Membership of y in C to ``depth`` digits, following both codings at knots.

    True when some coding keeps all ``depth`` digits in the core alphabet,
    False when every coding meets a gap letter.
    """
    if not math.isfinite(y):
        return None
    if y < -knot_tol or y > 1 + knot_tol:
        return False
    core = set(system.core)
    knots = system.knots
    N = system.N

    def walk(u: float, remaining: int) -> bool:
        if remaining == 0:
            return True
        u = min(max(u, 0.0), 1.0)
        if u >= 1.0:
            cands = [(N - 1, 1.0)]
        else:
            i = int(branch_index(system, u))
            cands = []
            if i > 0 and abs(u - knots[i]) <= knot_tol:
                cands.append((i - 1, 1.0))
                cands.append((i, 0.0))
            elif i < N - 1 and abs(u - knots[i + 1]) <= knot_tol:
                cands.append((i, 1.0))
                cands.append((i + 1, 0.0))
            else:
                cands.append((i, float(system.maps[i].inverse(u))))
        return any(d in core and walk(v, remaining - 1) for d, v in cands)

    return walk(float(y), depth)


# serialisation -------------------------------------------------------------

def _number(v) -> float:
    if isinstance(v, str):
        return float(Fraction(v))
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"expected a number, got {v!r}")
    return float(v)


def contraction_from_dict(d: dict) -> Contraction:
    family = d.get("family")
    if family == "affine":
        return Affine(_number(d["a"]), _number(d["b"]))
    if family == "quadratic":
        return Quadratic(_number(d["alpha"]), _number(d["beta"]), _number(d["gamma"]))
    if family == "logexp":
        return LogExp(_number(d["s"]), _number(d["base"]), _number(d["t"]))
    raise ValueError(f"unknown contraction family {family!r}")


def system_from_dict(d: dict) -> IFSystem:
    name = d.get("name", "")
    if d.get("auto_fill") or "core_maps" in d:
        core_maps = [contraction_from_dict(m) for m in d["core_maps"]]
        return gap_fill(core_maps, d.get("subdivisions", 1), name=name)
    maps = [contraction_from_dict(m) for m in d["maps"]]
    core = d["core"]
    if not isinstance(core, list) or not all(isinstance(a, int) for a in core):
        raise ValueError("core must be a list of integers")
    return IFSystem(tuple(maps), tuple(core), name)


def system_to_dict(system: IFSystem) -> dict:
    return {
        "name": system.name,
        "maps": [m.to_dict() for m in system.maps],
        "core": list(system.core),
    }


def load_system(path) -> IFSystem:
    with open(path) as fh:
        return system_from_dict(json.load(fh))


# named systems used throughout the examples and tests ------------------------

def cantor_third() -> IFSystem:
    return IFSystem((rho(0, 3), rho(1, 3), rho(2, 3)), (0, 2), "cantor-1/3")


def cantor_quarter_with_gap() -> IFSystem:
    """C_4 core (x/4, (x+3)/4) with the single filler x/2 + 1/4."""
    return IFSystem((rho(0, 4), Affine(0.5, 0.25), rho(3, 4)), (0, 2), "cantor-1/4-gap")


def nonlinear_example() -> IFSystem:
    """Quadratic / affine / logarithmic branches with a middle filler."""
    return IFSystem(
        (Quadratic(0.2, 0.4, 0.0), Affine(0.2, 0.6), LogExp(0.2, 2.0, 0.8)),
        (0, 2),
        "nonlinear-example",
    )


def linear_system(N: int, core: Sequence[int], name: str = "") -> IFSystem:
    """Homogeneous system rho_{i,N}, i = 0..N-1, with the given core digits."""
    return IFSystem(tuple(rho(i, N) for i in range(N)), tuple(core), name or f"linear-{N}")
