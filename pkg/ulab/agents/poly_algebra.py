"""
Agent: Poly Algebra
Exact rational polynomial algebra: the binomial (discrete Taylor) basis,
integrality on δℤ, constructive Bezout splitting, Chinese-remainder
alignment and the ∼_δ comparability decision between local polynomial
phases.

Every coefficient is a fractions.Fraction; floats only appear when the sup
of a smooth remainder is reported.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import sympy
from sympy import isprime

from ulab.agents.base import AgentInput, AgentOutput, BaseAgent
from ulab.core.errors import InvalidParameterError

logger = logging.getLogger(__name__)

Number = Union[int, Fraction]

SUP_SAMPLES = 1000
MAX_ROOT_DEGREE = 24


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10**12) if not v.is_integer() else Fraction(int(v))
    return Fraction(v)


def _trim(coeffs: Sequence[Fraction]) -> Tuple[Fraction, ...]:
    coeffs = list(coeffs)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs) if coeffs else (Fraction(0),)


@dataclass(frozen=True, eq=False)
class RationalPoly:
    """
    Polynomial of degree <= k with exact coefficients in the monomial basis
    (coeffs[i] multiplies t^i). t0 and delta only fix the default binomial
    view C((t - t0)/delta, j); they take no part in equality.
    """
    coeffs: Tuple[Fraction, ...]
    k: int = -1
    t0: Fraction = Fraction(0)
    delta: Fraction = Fraction(1)

    def __post_init__(self):
        coeffs = _trim(tuple(_frac(c) for c in self.coeffs))
        object.__setattr__(self, "coeffs", coeffs)
        k = self.k if self.k >= 0 else max(len(coeffs) - 1, 0)
        if self.degree > k:
            raise InvalidParameterError(f"degree {self.degree} exceeds bound {k}")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "t0", _frac(self.t0))
        object.__setattr__(self, "delta", _frac(self.delta))
        if self.delta <= 0:
            raise InvalidParameterError("scale delta must be positive")

    # -- constructors ---------------------------------------------------
    @classmethod
    def zero(cls, k: int = 0) -> "RationalPoly":
        return cls((Fraction(0),), k)

    @classmethod
    def constant(cls, c: Number, k: int = 0) -> "RationalPoly":
        return cls((_frac(c),), k)

    @classmethod
    def monomial(cls, j: int, c: Number = 1) -> "RationalPoly":
        return cls((Fraction(0),) * j + (_frac(c),), j)

    @classmethod
    def from_binomial(cls, cs: Sequence[Number], delta: Number = 1, t0: Number = 0) -> "RationalPoly":
        """Σ c_j C((t - t0)/delta, j) expanded to the monomial basis."""
        k = max(len(cs) - 1, 0)
        out = cls.zero(k)
        for j, c in enumerate(cs):
            if c:
                out = out + binomial_poly(j, delta, t0) * _frac(c)
        return RationalPoly(out.coeffs, k, _frac(t0), _frac(delta))

    # -- views ------------------------------------------------------------
    @property
    def degree(self) -> int:
        return 0 if self.is_zero() else len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 0

    def binomial(self) -> Tuple[Fraction, ...]:
        return to_binomial_basis(self, self.delta, self.t0)

    def with_bound(self, k: int) -> "RationalPoly":
        return RationalPoly(self.coeffs, k, self.t0, self.delta)

    # -- arithmetic -------------------------------------------------------
    def _lift(self, other) -> "RationalPoly":
        return other if isinstance(other, RationalPoly) else RationalPoly.constant(_frac(other))

    def __add__(self, other) -> "RationalPoly":
        other = self._lift(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return RationalPoly(tuple(x + y for x, y in zip(a, b)), max(self.k, other.k))

    __radd__ = __add__

    def __neg__(self) -> "RationalPoly":
        return RationalPoly(tuple(-c for c in self.coeffs), self.k)

    def __sub__(self, other) -> "RationalPoly":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "RationalPoly":
        return self._lift(other) - self

    def __mul__(self, other) -> "RationalPoly":
        if not isinstance(other, RationalPoly):
            c = _frac(other)
            return RationalPoly(tuple(x * c for x in self.coeffs), self.k)
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, x in enumerate(self.coeffs):
            if x:
                for j, y in enumerate(other.coeffs):
                    out[i + j] += x * y
        return RationalPoly(tuple(out), self.k + other.k)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = RationalPoly.constant(other)
        if not isinstance(other, RationalPoly):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __call__(self, t):
        if isinstance(t, (int, Fraction)):
            acc = Fraction(0)
            for c in reversed(self.coeffs):
                acc = acc * t + c
            return acc
        return np.polyval([float(c) for c in reversed(self.coeffs)], t)

    def derivative(self, order: int = 1) -> "RationalPoly":
        coeffs = list(self.coeffs)
        for _ in range(order):
            coeffs = [c * i for i, c in enumerate(coeffs)][1:] or [Fraction(0)]
        return RationalPoly(tuple(coeffs), max(self.k - order, 0))

    def compose_affine(self, a: Number, b: Number = 0) -> "RationalPoly":
        """t -> p(a t + b)."""
        inner = RationalPoly((_frac(b), _frac(a)), 1)
        acc = RationalPoly.zero()
        for c in reversed(self.coeffs):
            acc = acc * inner + c
        return RationalPoly(acc.coeffs, self.k)

    def __repr__(self) -> str:
        return f"RationalPoly({format_poly(self)!r}, k={self.k})"


def binomial_poly(j: int, delta: Number = 1, t0: Number = 0) -> RationalPoly:
    """C((t - t0)/delta, j) in the monomial basis."""
    delta, t0 = _frac(delta), _frac(t0)
    u = RationalPoly((-t0 / delta, 1 / delta), 1)
    out = RationalPoly.constant(1)
    for i in range(j):
        out = out * (u - i)
    return RationalPoly((out * Fraction(1, math.factorial(j))).coeffs, j)


# ---------------------------------------------------------------------------
# Textual format "c0 + c1*x + c2*x^2"
# ---------------------------------------------------------------------------

_X = sympy.Symbol("x")


def parse_poly(text: str, k: Optional[int] = None) -> RationalPoly:
    """Parse "c0 + c1*x + c2*x^2" (rationals as p/q, t accepted for x)."""
    try:
        expr = sympy.sympify(text.replace("^", "**"), locals={"x": _X, "t": _X}, rational=True)
        poly = sympy.Poly(expr, _X, domain="QQ")
    except (sympy.SympifyError, sympy.PolynomialError, TypeError) as exc:
        raise InvalidParameterError(f"cannot parse polynomial {text!r}: {exc}") from exc
    coeffs = [Fraction(int(c.p), int(c.q)) for c in reversed(poly.all_coeffs())]
    return RationalPoly(tuple(coeffs), -1 if k is None else k)


def _fmt_frac(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_poly(p: RationalPoly, var: str = "x") -> str:
    terms = []
    for i, c in enumerate(p.coeffs):
        if c == 0:
            continue
        mag = _fmt_frac(abs(c))
        body = mag if i == 0 else f"{mag}*{var}" if i == 1 else f"{mag}*{var}^{i}"
        terms.append(("-" if c < 0 else "+", body))
    if not terms:
        return "0"
    sign, body = terms[0]
    out = ("-" if sign == "-" else "") + body
    for sign, body in terms[1:]:
        out += f" {sign} {body}"
    return out


# ---------------------------------------------------------------------------
# Binomial basis and integrality
# ---------------------------------------------------------------------------

def to_binomial_basis(p: RationalPoly, delta: Number = 1, t0: Number = 0) -> Tuple[Fraction, ...]:
    """c_0..c_k with p(t) = Σ c_j C((t - t0)/delta, j); c_j is the j-th forward difference at t0."""
    delta, t0 = _frac(delta), _frac(t0)
    if delta <= 0:
        raise InvalidParameterError("delta must be positive")
    values = [p(t0 + i * delta) for i in range(p.k + 1)]
    out = []
    for j in range(p.k + 1):
        out.append(sum((Fraction((-1) ** (j - i) * math.comb(j, i)) * values[i] for i in range(j + 1)),
                       Fraction(0)))
    return tuple(out)


def is_integral(p: RationalPoly, delta: Number = 1) -> bool:
    """True iff p(δℤ) ⊂ ℤ."""
    return all(c.denominator == 1 for c in to_binomial_basis(p, delta, 0))


def intersection_integral(p: RationalPoly, a: int, b: int) -> bool:
    """Membership in Poly((1/a)ℤ→ℤ) ∩ Poly((1/b)ℤ→ℤ), decided at the single scale 1/(ab)."""
    if math.gcd(a, b) != 1:
        raise InvalidParameterError(f"a={a} and b={b} are not coprime")
    return is_integral(p, Fraction(1, a * b))


# ---------------------------------------------------------------------------
# Bezout splitting and CRT alignment
# ---------------------------------------------------------------------------

def bezout_coefficients(c: int, A: int, B: int) -> Tuple[int, int]:
    """(q, r) with c = q A + r B and |q| minimal (q <= B/2 on ties)."""
    if math.gcd(A, B) != 1:
        raise InvalidParameterError(f"{A} and {B} are not coprime")
    if B == 1:
        return 0, c
    q = (c * pow(A, -1, B)) % B
    if q > B // 2:
        q -= B
    r, rem = divmod(c - q * A, B)
    assert rem == 0
    return q, r


def bezout_split(gamma: RationalPoly, a: int, b: int) -> Tuple[RationalPoly, RationalPoly]:
    """
    Split a 1-integral γ as γ_a + γ_b with γ_a integral on (1/a)ℤ and γ_b on
    (1/b)ℤ: peel the top binomial coefficient c = q a^j + r b^j into
    q C(at, j) + r C(bt, j) and recurse on the remainder.
    """
    if a < 1 or b < 1:
        raise InvalidParameterError("a and b must be positive")
    if math.gcd(a, b) != 1:
        raise InvalidParameterError(f"a={a} and b={b} are not coprime")
    if not is_integral(gamma, 1):
        raise InvalidParameterError("gamma is not integer valued on the integers")

    k = gamma.k
    ga, gb = RationalPoly.zero(k), RationalPoly.zero(k)
    rem = gamma
    for j in range(gamma.degree, -1, -1):
        c = to_binomial_basis(rem.with_bound(j), 1, 0)[j]
        q, r = bezout_coefficients(int(c), a ** j, b ** j)
        pa = binomial_poly(j, Fraction(1, a)) * q
        pb = binomial_poly(j, Fraction(1, b)) * r
        ga, gb = ga + pa, gb + pb
        rem = rem - pa - pb
    assert rem.is_zero()
    return ga.with_bound(k), gb.with_bound(k)


def crt_align(gammas: Sequence[Tuple[int, RationalPoly]]) -> RationalPoly:
    """γ with γ_p - γ integral on (1/p)ℤ for every listed (p, γ_p)."""
    if not gammas:
        raise InvalidParameterError("crt_align needs at least one (prime, polynomial) pair")
    primes = [p for p, _ in gammas]
    if len(set(primes)) != len(primes):
        raise InvalidParameterError(f"repeated primes in {primes}")
    for p, g in gammas:
        if not isprime(p):
            raise InvalidParameterError(f"{p} is not prime")
        if not is_integral(g, 1):
            raise InvalidParameterError(f"gamma for p={p} is not integer valued on the integers")

    k = max(g.k for _, g in gammas)
    A, gamma = gammas[0][0], gammas[0][1].with_bound(k)
    for p, gp in gammas[1:]:
        d_A, _ = bezout_split((gp - gamma).with_bound(k), A, p)
        gamma = gamma + d_A
        A *= p
    return gamma.with_bound(k)


# ---------------------------------------------------------------------------
# Intervals, local phases and ∼_δ
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    """Closed interval stored as midpoint and length."""
    mid: Fraction
    length: Fraction

    def __post_init__(self):
        object.__setattr__(self, "mid", _frac(self.mid))
        object.__setattr__(self, "length", _frac(self.length))
        if self.length <= 0:
            raise InvalidParameterError(f"interval length must be positive, got {self.length}")

    @classmethod
    def from_endpoints(cls, lo: Number, hi: Number) -> "Interval":
        lo, hi = _frac(lo), _frac(hi)
        return cls((lo + hi) / 2, hi - lo)

    @property
    def lo(self) -> Fraction:
        return self.mid - self.length / 2

    @property
    def hi(self) -> Fraction:
        return self.mid + self.length / 2

    def dilate(self, lam: Number) -> "Interval":
        lam = _frac(lam)
        return Interval(self.mid * lam, self.length * lam)

    def relative_distance(self, other: "Interval") -> Fraction:
        """⟨other⟩_self = diam(self ∪ other) / |self|."""
        return (max(self.hi, other.hi) - min(self.lo, other.lo)) / self.length


@dataclass(frozen=True)
class LocalPhase:
    interval: Interval
    poly: RationalPoly


@dataclass(frozen=True)
class PhaseDecomposition:
    """P1 - P2 = eps + gamma with gamma integral on δℤ."""
    eps: RationalPoly
    gamma: RationalPoly
    smooth_bound: float
    delta: Fraction = Fraction(1)
    base_point: Fraction = Fraction(0)


def interval_comparable(I: Interval, J: Interval, C: float) -> bool:
    return I.relative_distance(J) <= C and J.relative_distance(I) <= C


def smooth_sup(eps: RationalPoly, I: Interval) -> float:
    """sup_{t ∈ I} |eps(t)| from the real critical points plus the endpoints."""
    points = [I.lo, I.hi]
    values = [abs(float(eps(t))) for t in points]
    if eps.degree <= 1:
        return max(values)
    dp = eps.derivative()
    try:
        if dp.degree > MAX_ROOT_DEGREE:
            raise InvalidParameterError(f"derivative degree {dp.degree} above root-isolation limit")
        poly = sympy.Poly([sympy.Rational(c.numerator, c.denominator) for c in reversed(dp.coeffs)], _X)
        for (s, u), _ in poly.intervals():
            lo, hi = Fraction(int(s.p), int(s.q)), Fraction(int(u.p), int(u.q))
            if hi < I.lo or lo > I.hi:
                continue
            if hi - lo > Fraction(1, 10**15):
                s, u = poly.refine_root(s, u, eps=sympy.Rational(1, 10**15))
                lo, hi = Fraction(int(s.p), int(s.q)), Fraction(int(u.p), int(u.q))
            r = (lo + hi) / 2
            if I.lo <= r <= I.hi:
                values.append(abs(float(eps(r))))
    except (InvalidParameterError, sympy.PolynomialError) as exc:
        logger.warning("root isolation failed (%s); sampling %d points", exc, SUP_SAMPLES)
        ts = np.linspace(float(I.lo), float(I.hi), SUP_SAMPLES)
        values.append(float(np.max(np.abs(eps(ts)))))
    return max(values)


def _round_half_to_zero(c: Fraction) -> int:
    f = math.floor(c)
    frac = c - f
    if frac > Fraction(1, 2):
        return f + 1
    if frac < Fraction(1, 2):
        return f
    return f + 1 if c < 0 else f


def nearest_grid_point(x: Fraction, delta: Fraction) -> Fraction:
    return math.floor(x / delta + Fraction(1, 2)) * delta


def compare_phases(phi1: LocalPhase, phi2: LocalPhase, delta: Number, C: float) -> Optional[PhaseDecomposition]:
    """
    Decide φ1 ∼_δ φ2 at tolerance C. The candidate γ rounds each binomial
    coefficient of P1 - P2 (scale δ, based at the point of δℤ nearest x_{I1})
    to the nearest integer, ties toward zero; ε is the remainder.
    """
    delta = _frac(delta)
    if delta <= 0 or C <= 0:
        raise InvalidParameterError("delta and C must be positive")
    if not interval_comparable(phi1.interval, phi2.interval, C):
        return None
    k = max(phi1.poly.k, phi2.poly.k)
    diff = (phi1.poly - phi2.poly).with_bound(k)
    t0 = nearest_grid_point(phi1.interval.mid, delta)
    rounded = [_round_half_to_zero(c) for c in to_binomial_basis(diff, delta, t0)]
    gamma = RationalPoly.from_binomial(rounded, delta, t0).with_bound(k)
    eps = (diff - gamma).with_bound(k)
    bound = smooth_sup(eps, phi1.interval)
    if bound > C:
        return None
    return PhaseDecomposition(eps, gamma, bound, delta, t0)


def dilate_phase(phi: LocalPhase, lam: Number) -> LocalPhase:
    """λ∗(I, P) = (λI, P(·/λ))."""
    lam = _frac(lam)
    if lam <= 0:
        raise InvalidParameterError("dilation factor must be positive")
    return LocalPhase(phi.interval.dilate(lam), phi.poly.compose_affine(1 / lam))


def sparsify(decomposition: PhaseDecomposition, ell: int) -> PhaseDecomposition:
    """The same splitting witnesses ∼_{ℓδ}: Poly(δℤ→ℤ) ⊂ Poly(ℓδℤ→ℤ)."""
    if ell < 1:
        raise InvalidParameterError("ell must be a natural number")
    new_delta = decomposition.delta * ell
    if not is_integral(decomposition.gamma, new_delta):
        raise InvalidParameterError("gamma is not integral at the coarser scale")
    return PhaseDecomposition(decomposition.eps, decomposition.gamma, decomposition.smooth_bound,
                              new_delta, decomposition.base_point)


# ---------------------------------------------------------------------------
# Randomised exact self-check
# ---------------------------------------------------------------------------

def _random_fraction(rng: np.random.Generator, num: int = 20, den: int = 6) -> Fraction:
    return Fraction(int(rng.integers(-num, num + 1)), int(rng.integers(1, den + 1)))


def _random_integral(rng: np.random.Generator, k: int, delta: Number = 1, t0: Number = 0) -> RationalPoly:
    cs = [int(c) for c in rng.integers(-9, 10, size=k + 1)]
    return RationalPoly.from_binomial(cs, delta, t0).with_bound(k)


def verify_algebra(trials: int = 2500, seed: int = 0) -> pd.DataFrame:
    """Run `trials` randomised exact checks of each identity; one row per identity."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    scales = [Fraction(1), Fraction(1, 2), Fraction(1, 3), Fraction(2), Fraction(3, 5)]
    pairs = [(2, 3), (3, 4), (5, 2), (7, 9), (4, 5)]
    failures = {"binomial_round_trip": 0, "bezout_split": 0, "crt_align": 0, "compare_phases": 0}

    for _ in range(trials):
        k = int(rng.integers(0, 5))
        p = RationalPoly(tuple(_random_fraction(rng) for _ in range(k + 1)), k)
        delta, t0 = scales[int(rng.integers(len(scales)))], _random_fraction(rng)
        if RationalPoly.from_binomial(to_binomial_basis(p, delta, t0), delta, t0) != p:
            failures["binomial_round_trip"] += 1

        a, b = pairs[int(rng.integers(len(pairs)))]
        gamma = _random_integral(rng, k)
        ga, gb = bezout_split(gamma, a, b)
        if ga + gb != gamma or not is_integral(ga, Fraction(1, a)) or not is_integral(gb, Fraction(1, b)):
            failures["bezout_split"] += 1

        primes = [int(q) for q in rng.choice([2, 3, 5, 7], size=int(rng.integers(1, 4)), replace=False)]
        parts = [(q, _random_integral(rng, k)) for q in primes]
        aligned = crt_align(parts)
        if not all(is_integral(g - aligned, Fraction(1, q)) for q, g in parts):
            failures["crt_align"] += 1

        lo = _random_fraction(rng, 50, 1)
        I = Interval.from_endpoints(lo, lo + int(rng.integers(1, 20)))
        shift = _random_integral(rng, k, delta, nearest_grid_point(I.mid, delta))
        dec = compare_phases(LocalPhase(I, p + shift), LocalPhase(I, p), delta, 1.0)
        if dec is None or not dec.eps.is_zero() or dec.gamma != shift or not is_integral(dec.gamma, delta):
            failures["compare_phases"] += 1

    logger.info("exact algebra self-check: %d trials, failures %s", trials, failures)
    return pd.DataFrame([{"check": name, "trials": trials, "failures": n} for name, n in failures.items()])


class PolyAlgebraAgent(BaseAgent):
    name = "PolyAlgebra"
    description = (
        "Exact rational polynomial algebra: binomial basis, integrality, Bezout "
        "splitting, CRT alignment and comparability of local polynomial phases."
    )

    def run(self, agent_input: AgentInput) -> AgentOutput:
        return self._dispatch(agent_input, {
            "binomial": self._binomial,
            "to_binomial_basis": self._binomial,
            "is_integral": self._is_integral,
            "bezout": self._bezout,
            "bezout_split": self._bezout,
            "crt": self._crt,
            "crt_align": self._crt,
            "compare": self._compare,
            "compare_phases": self._compare,
            "interval_comparable": self._intervals,
            "verify": self._verify,
        })

    # ------------------------------------------------------------------
    def _binomial(self, params: dict, context: str) -> AgentOutput:
        p = parse_poly(params["poly"])
        delta, t0 = _frac(params.get("delta", 1)), _frac(params.get("t0", 0))
        cs = to_binomial_basis(p, delta, t0)
        df = pd.DataFrame({"j": range(len(cs)), "c": [_fmt_frac(c) for c in cs]})
        return self._output("binomial", params, df,
                            f"{format_poly(p)} = Σ c_j C((t-{_fmt_frac(t0)})/{_fmt_frac(delta)}, j) "
                            f"with c = ({', '.join(_fmt_frac(c) for c in cs)})")

    # ------------------------------------------------------------------
    def _is_integral(self, params: dict, context: str) -> AgentOutput:
        p = parse_poly(params["poly"])
        delta = _frac(params.get("delta", 1))
        ok = is_integral(p, delta)
        df = pd.DataFrame([{"poly": format_poly(p), "delta": _fmt_frac(delta), "integral": ok}])
        return self._output("is_integral", params, df,
                            f"{format_poly(p)} is {'' if ok else 'not '}integral on {_fmt_frac(delta)}Z.")

    # ------------------------------------------------------------------
    def _bezout(self, params: dict, context: str) -> AgentOutput:
        p = parse_poly(params["poly"])
        a, b = int(params.get("a", 2)), int(params.get("b", 3))
        ga, gb = bezout_split(p, a, b)
        df = pd.DataFrame([{"poly": format_poly(p), "a": a, "b": b,
                            "gamma_a": format_poly(ga), "gamma_b": format_poly(gb)}])
        return self._output("bezout", params, df,
                            f"{format_poly(p)} = ({format_poly(ga)}) + ({format_poly(gb)})")

    # ------------------------------------------------------------------
    def _crt(self, params: dict, context: str) -> AgentOutput:
        """params: {"pairs": [[p, "poly"], ...]}"""
        pairs = [(int(p), parse_poly(text)) for p, text in params["pairs"]]
        gamma = crt_align(pairs)
        df = pd.DataFrame([{"p": p, "gamma_p": format_poly(g), "difference": format_poly(g - gamma),
                            "integral": is_integral(g - gamma, Fraction(1, p))} for p, g in pairs])
        return self._output("crt", params, df, f"gamma = {format_poly(gamma)}", gamma=format_poly(gamma))

    # ------------------------------------------------------------------
    def _compare(self, params: dict, context: str) -> AgentOutput:
        """params: {"p1", "p2", "I1": [lo, hi], "I2": [lo, hi], "delta", "C"}"""
        I1 = Interval.from_endpoints(*[_frac(Fraction(str(v))) for v in params["I1"]])
        I2 = Interval.from_endpoints(*[_frac(Fraction(str(v))) for v in params.get("I2", params["I1"])])
        phi1 = LocalPhase(I1, parse_poly(params["p1"]))
        phi2 = LocalPhase(I2, parse_poly(params["p2"]))
        C = float(params.get("C", 1.0))
        dec = compare_phases(phi1, phi2, _frac(Fraction(str(params.get("delta", 1)))), C)
        row = {"accepted": dec is not None}
        if dec is not None:
            row.update(eps=format_poly(dec.eps), gamma=format_poly(dec.gamma), smooth_bound=dec.smooth_bound)
        summary = ("comparable: " + f"eps={row['eps']}, gamma={row['gamma']}" if dec is not None
                   else "not comparable at the given tolerance")
        return self._output("compare", params, pd.DataFrame([row]), summary)

    # ------------------------------------------------------------------
    def _intervals(self, params: dict, context: str) -> AgentOutput:
        I = Interval.from_endpoints(*[Fraction(str(v)) for v in params["I"]])
        J = Interval.from_endpoints(*[Fraction(str(v)) for v in params["J"]])
        C = float(params.get("C", 1.0))
        ok = interval_comparable(I, J, C)
        df = pd.DataFrame([{"<J>_I": float(I.relative_distance(J)), "<I>_J": float(J.relative_distance(I)),
                            "C": C, "comparable": ok}])
        return self._output("interval_comparable", params, df, f"comparable={ok}")

    # ------------------------------------------------------------------
    def _verify(self, params: dict, context: str) -> AgentOutput:
        trials, seed = int(params.get("trials", 2500)), int(params.get("seed", 0))
        df = verify_algebra(trials, seed)
        failed = int(df["failures"].sum())
        return self._output("verify", params, df,
                            f"{len(df) * trials} exact polynomial checks, {failed} failures", failures=failed)
