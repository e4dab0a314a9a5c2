"""
Agent: Nilmanifold
Unipotent matrix groups: exp/log as finite series, Baker–Campbell–Hausdorff
products, real powers, polynomial sequences g(t) = Π g_j^{C(t,j)}, the
Heisenberg fundamental domain, nilsequences F(g(n)Γ), discorrelation sums
and equidistribution defects.

Elements hold either a sympy Matrix of Rationals (exact mode, used by the
algebraic checks) or a numpy array (float mode, used by the sums).
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import sympy
from scipy.integrate import dblquad

from ulab.agents.base import AgentInput, AgentOutput, BaseAgent, parse_spec
from ulab.agents.poly_algebra import RationalPoly, bezout_split, binomial_poly
from ulab.core.errors import InvalidParameterError
from ulab.core.numerics import compensated_sum, ordered_map
from ulab.core.tables import FunctionTable, MultSpec

logger = logging.getLogger(__name__)

FLOAT_TOL = 1e-12
CHUNK = 1 << 16

Scalar = Union[int, float, Fraction]


def _is_exact_scalar(v) -> bool:
    return isinstance(v, (int, Fraction, sympy.Rational)) and not isinstance(v, bool)


def _sym(v):
    if isinstance(v, Fraction):
        return sympy.Rational(v.numerator, v.denominator)
    if isinstance(v, int):
        return sympy.Integer(v)
    return v


def _eye(d: int, exact: bool):
    return sympy.eye(d) if exact else np.eye(d)


def _mm(A, B):
    return A * B if isinstance(A, sympy.MatrixBase) else A @ B


def _exp_series(N, d: int):
    exact = isinstance(N, sympy.MatrixBase)
    out = _eye(d, exact) if exact else np.broadcast_to(np.eye(d), N.shape).copy()
    term = out.copy()
    for i in range(1, d):
        term = _mm(term, N) / i
        out = out + term
    return out


def _log_series(N, d: int):
    out = N * 0
    power = N
    for i in range(1, d):
        out = out + power * (sympy.Rational((-1) ** (i + 1), i) if isinstance(N, sympy.MatrixBase)
                             else (-1) ** (i + 1) / i)
        power = _mm(power, N)
    return out


@dataclass(frozen=True, eq=False)
class LieElement:
    """Strictly upper-triangular d x d matrix."""
    matrix: Any

    def __post_init__(self):
        M = self.matrix
        if not isinstance(M, sympy.MatrixBase):
            M = np.asarray(M, dtype=float)
            object.__setattr__(self, "matrix", M)
        if M.shape[0] != M.shape[1]:
            raise InvalidParameterError(f"Lie element must be square, got {M.shape}")
        d = M.shape[0]
        for i in range(d):
            for j in range(i + 1):
                if abs(M[i, j]) > (0 if self.exact else FLOAT_TOL):
                    raise InvalidParameterError("Lie element must be strictly upper triangular")

    @property
    def exact(self) -> bool:
        return isinstance(self.matrix, sympy.MatrixBase)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def heisenberg(cls, x: Scalar, y: Scalar, z: Scalar) -> "LieElement":
        if all(_is_exact_scalar(v) for v in (x, y, z)):
            return cls(sympy.Matrix([[0, _sym(x), _sym(z)], [0, 0, _sym(y)], [0, 0, 0]]))
        return cls(np.array([[0, x, z], [0, 0, y], [0, 0, 0]], dtype=float))

    def coords(self) -> tuple:
        return self.matrix[0, 1], self.matrix[1, 2], self.matrix[0, 2]

    def __add__(self, other: "LieElement") -> "LieElement":
        _same_shape(self, other)
        return LieElement(self.matrix + other.matrix)

    def __sub__(self, other: "LieElement") -> "LieElement":
        _same_shape(self, other)
        return LieElement(self.matrix - other.matrix)

    def scale(self, t) -> "LieElement":
        return LieElement(self.matrix * (_sym(t) if self.exact else float(t)))

    def bracket(self, other: "LieElement") -> "LieElement":
        _same_shape(self, other)
        return LieElement(_mm(self.matrix, other.matrix) - _mm(other.matrix, self.matrix))

    def __eq__(self, other) -> bool:
        if not isinstance(other, LieElement):
            return NotImplemented
        if self.exact and other.exact:
            return self.matrix == other.matrix
        return np.allclose(np.asarray(self.matrix, dtype=float), np.asarray(other.matrix, dtype=float),
                           atol=FLOAT_TOL)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class NilGroupElement:
    """Upper unitriangular d x d matrix."""
    matrix: Any

    def __post_init__(self):
        M = self.matrix
        if not isinstance(M, sympy.MatrixBase):
            M = np.asarray(M, dtype=float)
            object.__setattr__(self, "matrix", M)
        if M.shape[0] != M.shape[1]:
            raise InvalidParameterError(f"group element must be square, got {M.shape}")
        tol = 0 if self.exact else FLOAT_TOL
        d = M.shape[0]
        for i in range(d):
            if abs(M[i, i] - 1) > tol:
                raise InvalidParameterError("group element must have unit diagonal")
            for j in range(i):
                if abs(M[i, j]) > tol:
                    raise InvalidParameterError("group element must be upper triangular")

    @property
    def exact(self) -> bool:
        return isinstance(self.matrix, sympy.MatrixBase)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, d: int, exact: bool = True) -> "NilGroupElement":
        return cls(_eye(d, exact))

    @classmethod
    def heisenberg(cls, x: Scalar, y: Scalar, z: Scalar) -> "NilGroupElement":
        """The matrix [[1, x, z], [0, 1, y], [0, 0, 1]]."""
        if all(_is_exact_scalar(v) for v in (x, y, z)):
            return cls(sympy.Matrix([[1, _sym(x), _sym(z)], [0, 1, _sym(y)], [0, 0, 1]]))
        return cls(np.array([[1, x, z], [0, 1, y], [0, 0, 1]], dtype=float))

    def coords(self) -> tuple:
        return self.matrix[0, 1], self.matrix[1, 2], self.matrix[0, 2]

    def to_float(self) -> "NilGroupElement":
        return self if not self.exact else NilGroupElement(np.array(self.matrix.tolist(), dtype=float))

    def _coerce(self, other: "NilGroupElement"):
        _same_shape(self, other)
        if self.exact and other.exact:
            return self.matrix, other.matrix
        return self.to_float().matrix, other.to_float().matrix

    def __mul__(self, other: "NilGroupElement") -> "NilGroupElement":
        A, B = self._coerce(other)
        return NilGroupElement(_mm(A, B))

    def inverse(self) -> "NilGroupElement":
        N = self.matrix - _eye(self.d, self.exact)
        out, term = _eye(self.d, self.exact), _eye(self.d, self.exact)
        for _ in range(1, self.d):
            term = _mm(term, -N)
            out = out + term
        return NilGroupElement(out)

    def __pow__(self, t) -> "NilGroupElement":
        return real_power(self, t)

    def is_identity(self) -> bool:
        if self.exact:
            return self.matrix == sympy.eye(self.d)
        return bool(np.allclose(self.matrix, np.eye(self.d), atol=FLOAT_TOL))

    def in_lattice(self) -> bool:
        """Integer entries, i.e. membership in the standard lattice."""
        if self.exact:
            return all(v.is_integer for v in self.matrix)
        return bool(np.allclose(self.matrix, np.round(self.matrix), atol=1e-9))

    def __eq__(self, other) -> bool:
        if not isinstance(other, NilGroupElement):
            return NotImplemented
        if self.exact and other.exact:
            return self.matrix == other.matrix
        A, B = self._coerce(other)
        return bool(np.allclose(A, B, atol=FLOAT_TOL))

    __hash__ = None

    def __repr__(self) -> str:
        return f"NilGroupElement({self.matrix.tolist()})"


def _same_shape(a, b) -> None:
    if a.matrix.shape != b.matrix.shape:
        raise InvalidParameterError(f"dimension mismatch: {a.matrix.shape} vs {b.matrix.shape}")


# ---------------------------------------------------------------------------
# exp / log / BCH / powers
# ---------------------------------------------------------------------------

def nil_exp(X: LieElement) -> NilGroupElement:
    return NilGroupElement(_exp_series(X.matrix, X.d))


def nil_log(g: NilGroupElement) -> LieElement:
    return LieElement(_log_series(g.matrix - _eye(g.d, g.exact), g.d))


def bch_product(X: LieElement, Y: LieElement) -> LieElement:
    """X ∗ Y = log(exp X exp Y)."""
    _same_shape(X, Y)
    return nil_log(nil_exp(X) * nil_exp(Y))


def real_power(g: NilGroupElement, t) -> NilGroupElement:
    """g^t = exp(t log g); exact when g is exact and t rational."""
    if g.exact and not _is_exact_scalar(t):
        g = g.to_float()
    return nil_exp(nil_log(g).scale(t))


# ---------------------------------------------------------------------------
# Filtrations and polynomial sequences
# ---------------------------------------------------------------------------

@dataclass
class Filtration:
    """
    Coordinate masks for G_0 ⊇ G_1 ⊇ ... ⊇ G_{k+1} = {1}; masks[i][a, b] marks
    the entries that log of an element of G_i may occupy.
    """
    d: int
    masks: List[np.ndarray]

    def __post_init__(self):
        self.masks = [np.triu(np.asarray(m, dtype=bool), 1) for m in self.masks]
        if len(self.masks) < 2:
            raise InvalidParameterError("a filtration needs at least G_0 and G_1")
        if self.masks[-1].any():
            raise InvalidParameterError("the last filtration step must be trivial")
        if not np.array_equal(self.masks[0], self.masks[1]):
            raise InvalidParameterError("G_0 and G_1 must coincide")
        self.validate()

    @property
    def degree(self) -> int:
        return len(self.masks) - 2

    def mask(self, i: int) -> np.ndarray:
        return self.masks[min(i, len(self.masks) - 1)]

    def validate(self) -> None:
        """[G_i, G_j] ⊆ G_{i+j} on basis brackets [E_ab, E_cd] = δ_bc E_ad - δ_da E_cb."""
        for i in range(1, len(self.masks)):
            for j in range(1, len(self.masks)):
                target = self.mask(i + j)
                for a, b in zip(*np.nonzero(self.masks[i])):
                    for c, e in zip(*np.nonzero(self.masks[j])):
                        if b == c and not target[a, e]:
                            raise InvalidParameterError(f"[G_{i}, G_{j}] not inside G_{i + j} at E_{a}{e}")
                        if e == a and not target[c, b]:
                            raise InvalidParameterError(f"[G_{i}, G_{j}] not inside G_{i + j} at E_{c}{b}")
        for i in range(1, len(self.masks)):
            if (self.masks[i] & ~self.masks[i - 1]).any():
                raise InvalidParameterError("filtration must be decreasing")

    def contains(self, g: NilGroupElement, i: int) -> bool:
        L = nil_log(g).matrix
        outside = ~self.mask(i)
        if g.exact:
            return all(L[int(a), int(b)] == 0 for a, b in zip(*np.nonzero(outside)))
        return bool(np.all(np.abs(np.asarray(L, dtype=float)[outside]) <= 1e-9))


def lower_central_filtration(d: int) -> Filtration:
    """G_i = {entries (a, b) with b - a >= i}; degree d - 1."""
    if d < 2:
        raise InvalidParameterError("dimension must be >= 2")
    a, b = np.indices((d, d))
    masks = [(b - a) >= max(i, 1) for i in range(d + 1)]
    return Filtration(d, masks)


def _binom(t, j: int):
    """C(t, j) for integer, rational or float t."""
    out = Fraction(1) if _is_exact_scalar(t) else 1.0
    for i in range(j):
        out = out * (t - i) / (i + 1)
    return out


@dataclass
class NilPolySeq:
    """g(t) = g_0 g_1^{C(t,1)} ... g_k^{C(t,k)}."""
    coeffs: List[NilGroupElement]
    filtration: Optional[Filtration] = None

    def __post_init__(self):
        if not self.coeffs:
            raise InvalidParameterError("a polynomial sequence needs at least g_0")
        d = self.coeffs[0].d
        if any(g.d != d for g in self.coeffs):
            raise InvalidParameterError("all Taylor coefficients must share a dimension")
        if self.filtration is None:
            self.filtration = lower_central_filtration(d)
        for j, g in enumerate(self.coeffs):
            if not self.filtration.contains(g, j):
                raise InvalidParameterError(f"Taylor coefficient g_{j} is not in G_{j}")

    @property
    def d(self) -> int:
        return self.coeffs[0].d

    @property
    def exact(self) -> bool:
        return all(g.exact for g in self.coeffs)

    def __call__(self, t) -> NilGroupElement:
        return eval_polyseq(self, t)


def eval_polyseq(seq: NilPolySeq, t) -> NilGroupElement:
    out = seq.coeffs[0]
    for j, g in enumerate(seq.coeffs[1:], start=1):
        out = out * real_power(g, _binom(t, j))
    return out


def eval_polyseq_many(seq: NilPolySeq, ns) -> np.ndarray:
    """Float matrices g(n) for an array of n, shape (len(ns), d, d)."""
    ns = np.asarray(ns, dtype=float)
    d = seq.d
    out = np.broadcast_to(seq.coeffs[0].to_float().matrix, (len(ns), d, d)).copy()
    for j, g in enumerate(seq.coeffs[1:], start=1):
        L = np.asarray(nil_log(g.to_float()).matrix, dtype=float)
        if not L.any():
            continue
        e = np.ones(len(ns))
        for i in range(j):
            e = e * (ns - i) / (i + 1)
        out = out @ _exp_series(e[:, None, None] * L[None, :, :], d)
    return out


def taylor_coefficients(values: Sequence[NilGroupElement],
                        filtration: Optional[Filtration] = None) -> NilPolySeq:
    """g_j = (Π_{i<j} g_i^{C(j,i)})^{-1} g(j) from the values g(0), ..., g(k)."""
    coeffs: List[NilGroupElement] = []
    for j, value in enumerate(values):
        prefix = NilGroupElement.identity(value.d, value.exact)
        for i, g in enumerate(coeffs):
            prefix = prefix * real_power(g, math.comb(j, i))
        coeffs.append(prefix.inverse() * value)
    return NilPolySeq(coeffs, filtration)


def heisenberg_seq(coefficients: Sequence[Tuple[int, Scalar, Scalar, Scalar]],
                   filtration: Optional[Filtration] = None) -> NilPolySeq:
    """Sequence from (level j, x, y, z) Heisenberg coefficients; missing levels are identity."""
    if not coefficients:
        return NilPolySeq([NilGroupElement.identity(3)], filtration)
    exact = all(_is_exact_scalar(v) for c in coefficients for v in c[1:])
    top = max(int(c[0]) for c in coefficients)
    coeffs = [NilGroupElement.identity(3, exact) for _ in range(top + 1)]
    for j, x, y, z in coefficients:
        coeffs[int(j)] = coeffs[int(j)] * NilGroupElement.heisenberg(x, y, z)
    return NilPolySeq(coeffs, filtration)


# ---------------------------------------------------------------------------
# Polynomial maps with polynomial exponents, nilpotent Bezout and CRT
# ---------------------------------------------------------------------------

@dataclass
class PolyMap:
    """t -> Π_i g_i^{p_i(t)} for group elements g_i and rational polynomials p_i."""
    factors: List[Tuple[NilGroupElement, RationalPoly]] = field(default_factory=list)
    d: int = 3

    @classmethod
    def from_seq(cls, seq: NilPolySeq) -> "PolyMap":
        return cls([(g, binomial_poly(j)) for j, g in enumerate(seq.coeffs)], seq.d)

    def __call__(self, t) -> NilGroupElement:
        out = NilGroupElement.identity(self.d, _is_exact_scalar(t))
        for g, p in self.factors:
            out = out * real_power(g, p(t))
        return out

    def __mul__(self, other: "PolyMap") -> "PolyMap":
        return PolyMap(self.factors + other.factors, self.d)

    def inverse(self) -> "PolyMap":
        return PolyMap([(g, -p) for g, p in reversed(self.factors)], self.d)

    def taylor(self, degree: int, filtration: Optional[Filtration] = None) -> NilPolySeq:
        return taylor_coefficients([self(j) for j in range(degree + 1)], filtration)


def _level_split(seq: NilPolySeq, a: int, b: int) -> Tuple[PolyMap, PolyMap]:
    parts_a, parts_b = [], []
    for j, g in enumerate(seq.coeffs):
        pa, pb = bezout_split(binomial_poly(j), a, b)
        parts_a.append((g, pa))
        parts_b.append((g, pb))
    return PolyMap(parts_a, seq.d), PolyMap(parts_b, seq.d)


def nil_bezout_split(gamma: NilPolySeq, a: int, b: int) -> Tuple[PolyMap, PolyMap]:
    """
    Factor γ ∈ Poly(ℤ→Γ) as γ_a γ_b with γ_a(t) ∈ Γ on (1/a)ℤ and γ_b(t) ∈ Γ
    on (1/b)ℤ. Each level splits every C(t, j) by the scalar Bezout identity
    and leaves a remainder σ one step deeper in the filtration.
    """
    if math.gcd(a, b) != 1:
        raise InvalidParameterError(f"a={a} and b={b} are not coprime")
    if not gamma.exact or not all(g.in_lattice() for g in gamma.coeffs):
        raise InvalidParameterError("gamma must have exact lattice-valued Taylor coefficients")
    filtration = gamma.filtration
    degree = max(filtration.degree, len(gamma.coeffs) - 1)
    A, B = PolyMap([], gamma.d), PolyMap([], gamma.d)
    sigma = gamma
    for _ in range(filtration.degree + 1):
        if all(g.is_identity() for g in sigma.coeffs):
            break
        ga, gb = _level_split(sigma, a, b)
        A, B = A * ga, gb * B
        sigma = (ga.inverse() * PolyMap.from_seq(sigma) * gb.inverse()).taylor(degree, filtration)
    if not all(g.is_identity() for g in sigma.coeffs):
        raise InvalidParameterError("descent did not terminate; filtration too short for gamma")
    return A, B


def nil_crt_align(pairs: Sequence[Tuple[int, NilPolySeq]]) -> PolyMap:
    """γ with γ^{-1} γ_i integral on (1/a_i)ℤ for pairwise coprime a_i."""
    if not pairs:
        raise InvalidParameterError("nil_crt_align needs at least one pair")
    moduli = [a for a, _ in pairs]
    for i, a in enumerate(moduli):
        for b in moduli[i + 1:]:
            if math.gcd(a, b) != 1:
                raise InvalidParameterError(f"moduli {a} and {b} are not coprime")
    M, first = pairs[0]
    filtration = first.filtration
    degree = max(filtration.degree, max(len(s.coeffs) for _, s in pairs) - 1)
    gamma = PolyMap.from_seq(first)
    for a, seq in pairs[1:]:
        delta = (gamma.inverse() * PolyMap.from_seq(seq)).taylor(degree, filtration)
        part_m, _ = nil_bezout_split(delta, M, a)
        gamma = gamma * part_m
        M *= a
    return gamma


# ---------------------------------------------------------------------------
# Heisenberg nilmanifold
# ---------------------------------------------------------------------------

def _floor(v):
    return sympy.floor(v) if isinstance(v, sympy.Basic) else math.floor(v)


def heisenberg_reduce(g: NilGroupElement) -> Tuple[tuple, NilGroupElement]:
    """
    g = h γ with h = (x̃, ỹ, z̃) ∈ [0,1)^3 and γ in the integer lattice:
    a = ⌊x⌋, b = ⌊y⌋, c = ⌊z - x̃ b⌋.
    """
    if g.d != 3:
        raise InvalidParameterError("heisenberg_reduce needs a 3 x 3 element")
    x, y, z = g.coords()
    a, b = _floor(x), _floor(y)
    xr, yr = x - a, y - b
    c = _floor(z - xr * b)
    zr = z - xr * b - c
    if g.exact:
        gamma = NilGroupElement(sympy.Matrix([[1, a, c], [0, 1, b], [0, 0, 1]]))
    else:
        gamma = NilGroupElement(np.array([[1, a, c], [0, 1, b], [0, 0, 1]], dtype=float))
    return (xr, yr, zr), gamma


def heisenberg_reduce_many(mats: np.ndarray) -> np.ndarray:
    """Fundamental-domain coordinates for a stack of float Heisenberg matrices, shape (n, 3)."""
    x, y, z = mats[:, 0, 1], mats[:, 1, 2], mats[:, 0, 2]
    b = np.floor(y)
    xr = x - np.floor(x)
    yr = y - b
    w = z - xr * b
    zr = w - np.floor(w)
    return np.stack([xr, yr, zr], axis=1)


def bump(u):
    """w(u) = (1 - cos 2πu) / 2."""
    return (1.0 - np.cos(2 * np.pi * np.asarray(u, dtype=float))) / 2.0


@dataclass(frozen=True)
class NilFunction:
    """Built-in F on the Heisenberg nilmanifold."""
    kind: str
    a: int = 0
    b: int = 0
    m: int = 0

    def __post_init__(self):
        if self.kind not in ("horizontal", "vertical_smoothed"):
            raise InvalidParameterError(f"unknown nilsequence function '{self.kind}'. "
                                        f"Options: horizontal, vertical_smoothed")

    @classmethod
    def horizontal(cls, a: int, b: int) -> "NilFunction":
        return cls("horizontal", a=int(a), b=int(b))

    @classmethod
    def vertical_smoothed(cls, m: int) -> "NilFunction":
        return cls("vertical_smoothed", m=int(m))

    @classmethod
    def parse(cls, text: str) -> "NilFunction":
        """'horizontal(1,0)' or 'vertical_smoothed(1)'."""
        name, _, rest = text.replace(" ", "").partition("(")
        args = [int(v) for v in rest.rstrip(")").split(",") if v]
        if name == "horizontal" and len(args) == 2:
            return cls.horizontal(*args)
        if name == "vertical_smoothed" and len(args) == 1:
            return cls.vertical_smoothed(*args)
        raise InvalidParameterError(f"cannot parse nilsequence function {text!r}")

    def label(self) -> str:
        return f"horizontal({self.a},{self.b})" if self.kind == "horizontal" else f"vertical_smoothed({self.m})"

    def __call__(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=float).reshape(-1, 3)
        x, y, z = coords[:, 0], coords[:, 1], coords[:, 2]
        if self.kind == "horizontal":
            return np.exp(2j * np.pi * (self.a * x + self.b * y))
        return np.exp(2j * np.pi * self.m * z) * bump(x) * bump(y)

    def mean(self) -> float:
        """∫ F dμ over the fundamental domain."""
        if self.kind == "horizontal":
            return 1.0 if self.a == 0 and self.b == 0 else 0.0
        return _vertical_mean() if self.m == 0 else 0.0


@lru_cache(maxsize=1)
def _vertical_mean() -> float:
    value, _ = dblquad(lambda y, x: float(bump(x) * bump(y)), 0.0, 1.0, 0.0, 1.0)
    return value


def nilsequence_values(F: NilFunction, seq: NilPolySeq, ns) -> np.ndarray:
    return F(heisenberg_reduce_many(eval_polyseq_many(seq, ns)))


def eval_nilsequence(F: NilFunction, seq: NilPolySeq, n: int) -> complex:
    """F(g(n)Γ)."""
    if seq.d != 3:
        raise InvalidParameterError("built-in nilsequence functions live on the Heisenberg nilmanifold")
    coords, _ = heisenberg_reduce(eval_polyseq(seq, n).to_float())
    return complex(F([float(c) for c in coords])[0])


def _chunked_sum(fn: Callable[[np.ndarray], np.ndarray], lo: int, hi: int,
                 workers: Optional[int]) -> complex:
    starts = list(range(lo, hi, CHUNK))
    parts = ordered_map(lambda s: fn(np.arange(s, min(s + CHUNK, hi))), starts, workers)
    return compensated_sum(np.concatenate(parts)) if parts else 0j


def discorrelation(f: FunctionTable, x: int, H: int, F: NilFunction, seq: NilPolySeq,
                   workers: Optional[int] = None) -> complex:
    """(1/H) Σ_{n=x}^{x+H-1} f(n) conj F(g(n)Γ)."""
    if H < 1:
        raise InvalidParameterError(f"H must be >= 1, got {H}")
    values = f.window(x, H).astype(np.complex128)
    total = _chunked_sum(lambda ns: values[ns - x] * np.conj(nilsequence_values(F, seq, ns)),
                         x, x + H, workers)
    return total / H


def equidistribution_defect(seq: NilPolySeq, F: NilFunction, N: int,
                            workers: Optional[int] = None) -> float:
    """|(1/N) Σ_{n=1}^{N} F(g(n)Γ) - ∫F|."""
    if N < 1:
        raise InvalidParameterError(f"N must be >= 1, got {N}")
    total = _chunked_sum(lambda ns: nilsequence_values(F, seq, ns), 1, N + 1, workers)
    return abs(total / N - F.mean())


# ---------------------------------------------------------------------------
# Randomised self-check
# ---------------------------------------------------------------------------

def _random_rational(rng: np.random.Generator, num: int = 9, den: int = 5) -> Fraction:
    return Fraction(int(rng.integers(-num, num + 1)), int(rng.integers(1, den + 1)))


def random_lie(rng: np.random.Generator, d: int) -> LieElement:
    M = sympy.zeros(d, d)
    for i in range(d):
        for j in range(i + 1, d):
            M[i, j] = _sym(_random_rational(rng))
    return LieElement(M)


def random_lattice_seq(rng: np.random.Generator) -> NilPolySeq:
    """Heisenberg sequence with lattice Taylor coefficients g_0, g_1 and central g_2."""
    ints = [int(v) for v in rng.integers(-4, 5, size=7)]
    return NilPolySeq([NilGroupElement.heisenberg(*ints[0:3]),
                       NilGroupElement.heisenberg(*ints[3:6]),
                       NilGroupElement.heisenberg(0, 0, ints[6])])


def verify_group_law(heisenberg_trials: int = 1000, four_dim_trials: int = 100,
                     bezout_trials: int = 5, seed: int = 0) -> pd.DataFrame:
    """BCH exactness, cubes against real powers and the nilpotent Bezout split."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    rows = []

    for d, trials in ((3, heisenberg_trials), (4, four_dim_trials)):
        bad = 0
        for _ in range(trials):
            X, Y = random_lie(rng, d), random_lie(rng, d)
            if nil_exp(bch_product(X, Y)) != nil_exp(X) * nil_exp(Y):
                bad += 1
        rows.append({"check": f"bch_exact_d{d}", "trials": trials, "failures": bad})

    bad = 0
    for _ in range(heisenberg_trials):
        g = NilGroupElement.heisenberg(*[float(v) for v in rng.uniform(-3, 3, size=3)])
        if not np.allclose(real_power(g, 3).matrix, (g * g * g).matrix, rtol=0, atol=1e-12):
            bad += 1
    rows.append({"check": "real_power_cube", "trials": heisenberg_trials, "failures": bad})

    bad = 0
    grid = [Fraction(j, 6) for j in range(-6, 7)]
    for _ in range(bezout_trials):
        gamma = random_lattice_seq(rng)
        A, B = nil_bezout_split(gamma, 2, 3)
        for t in grid:
            ok = A(t) * B(t) == gamma(t)
            if (t * 2).denominator == 1:
                ok = ok and A(t).in_lattice()
            if (t * 3).denominator == 1:
                ok = ok and B(t).in_lattice()
            if not ok:
                bad += 1
                break
    rows.append({"check": "nil_bezout_split", "trials": bezout_trials, "failures": bad})

    logger.info("group law self-check: %s", {r["check"]: r["failures"] for r in rows})
    return pd.DataFrame(rows)


def parse_coefficients(text: str) -> List[Tuple[int, Scalar, Scalar, Scalar]]:
    """'1:0.414:0.732:0, 2:0:0:0.5' -> [(1, 0.414, 0.732, 0.0), (2, 0.0, 0.0, 0.5)]."""
    out = []
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 4:
            raise InvalidParameterError(f"coefficient {item!r} is not j:x:y:z")
        try:
            j = int(parts[0])
        except ValueError as exc:
            raise InvalidParameterError(f"coefficient index {parts[0]!r} is not an integer") from exc
        out.append((j,) + tuple(_parse_scalar(p) for p in parts[1:]))
    return out


def _parse_scalar(text: str) -> Scalar:
    text = text.strip()
    try:
        if text.startswith("sqrt"):
            value = math.sqrt(float(text[4:].strip("()")))
            return value - math.floor(value)
        if "/" in text or text.lstrip("-").isdigit():
            return Fraction(text)
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidParameterError(f"cannot read coefficient {text!r}") from exc


class NilmanifoldAgent(BaseAgent):
    name = "Nilmanifold"
    description = (
        "Unipotent matrix groups, polynomial sequences, Heisenberg nilsequences, "
        "discorrelation sums and equidistribution defects."
    )

    def run(self, agent_input: AgentInput) -> AgentOutput:
        return self._dispatch(agent_input, {
            "nilsequence": self._nilsequence,
            "eval_nilsequence": self._nilsequence,
            "discorrelation": self._discorrelation,
            "defect": self._defect,
            "equidistribution_defect": self._defect,
            "bch": self._bch,
            "bch_product": self._bch,
            "verify": self._verify,
            "self_correlation": self._self_correlation,
        })

    def _seq(self, params: dict) -> NilPolySeq:
        coeffs = params.get("coeffs", "1:0.414213562:0.732050808:0")
        return heisenberg_seq(parse_coefficients(coeffs) if isinstance(coeffs, str) else coeffs)

    # ------------------------------------------------------------------
    def _nilsequence(self, params: dict, context: str) -> AgentOutput:
        F = NilFunction.parse(params.get("F", "horizontal(1,0)"))
        seq = self._seq(params)
        ns = np.arange(int(params.get("start", 0)), int(params.get("end", 10)) + 1)
        vals = nilsequence_values(F, seq, ns)
        df = pd.DataFrame({"n": ns, "re": vals.real, "im": vals.imag, "abs": np.abs(vals)})
        return self._output("nilsequence", params, df, f"{F.label()} along {len(ns)} points.")

    # ------------------------------------------------------------------
    def _discorrelation(self, params: dict, context: str) -> AgentOutput:
        spec = parse_spec(params.get("spec", "liouville"))
        F = NilFunction.parse(params.get("F", "horizontal(1,0)"))
        seq = self._seq(params)
        x, H = int(params.get("x", 100_000)), int(params.get("H", 1000))
        value = discorrelation(self.table(spec, x, x + H), x, H, F, seq, params.get("workers"))
        df = pd.DataFrame([{"x": x, "H": H, "F": F.label(), "coeffs": str(params.get("coeffs", "")),
                            "re": value.real, "im": value.imag, "abs": abs(value)}])
        return self._output("discorrelation", params, df,
                            f"|(1/H) Σ {spec.label()}(n) conj F(g(n)Γ)| = {abs(value):.6g}")

    # ------------------------------------------------------------------
    def _defect(self, params: dict, context: str) -> AgentOutput:
        F = NilFunction.parse(params.get("F", "horizontal(1,1)"))
        seq = self._seq(params)
        N = int(params.get("N", 1000))
        value = equidistribution_defect(seq, F, N, params.get("workers"))
        df = pd.DataFrame([{"N": N, "F": F.label(), "defect": value}])
        return self._output("equidistribution_defect", params, df, f"defect at N={N}: {value:.6g}")

    # ------------------------------------------------------------------
    def _bch(self, params: dict, context: str) -> AgentOutput:
        X = LieElement.heisenberg(*[Fraction(str(v)) for v in params.get("X", [1, 0, 0])])
        Y = LieElement.heisenberg(*[Fraction(str(v)) for v in params.get("Y", [0, 1, 0])])
        Z = bch_product(X, Y)
        x, y, z = Z.coords()
        df = pd.DataFrame([{"x": str(x), "y": str(y), "z": str(z)}])
        return self._output("bch", params, df, f"X * Y = ({x}, {y}, {z})")

    # ------------------------------------------------------------------
    def _self_correlation(self, params: dict, context: str) -> AgentOutput:
        """Discorrelation of f(n) := F(g(n)Γ) with itself on [x, x+H)."""
        F = NilFunction.parse(params.get("F", "horizontal(1,0)"))
        seq = self._seq(params)
        x, H = int(params.get("x", 1000)), int(params.get("H", 1000))
        f = FunctionTable(x, x + H - 1, nilsequence_values(F, seq, np.arange(x, x + H)),
                          MultSpec.custom({}))
        value = discorrelation(f, x, H, F, seq, params.get("workers"))
        df = pd.DataFrame([{"x": x, "H": H, "F": F.label(), "re": value.real, "im": value.imag,
                            "abs": abs(value)}])
        return self._output("self_correlation", params, df, f"self-correlation of {F.label()}: {abs(value):.12g}")

    # ------------------------------------------------------------------
    def _verify(self, params: dict, context: str) -> AgentOutput:
        df = verify_group_law(int(params.get("heisenberg_trials", 1000)), int(params.get("four_dim_trials", 100)),
                              int(params.get("bezout_trials", 5)), int(params.get("seed", 0)))
        failed = int(df["failures"].sum())
        return self._output("verify", params, df, f"{int(df['trials'].sum())} group-law checks, {failed} failures",
                            failures=failed)
