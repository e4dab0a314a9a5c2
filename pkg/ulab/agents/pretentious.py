"""
Agent: Pretentious
Dirichlet characters, the pretentious distance D(f, g; X) and the score
M(f; X, Q) = inf over |t| <= X and characters of modulus <= Q of
D(f, n -> chi(n) n^{it}; X).
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from sympy import factorint, primitive_root, totient

from ulab.agents.base import AgentInput, AgentOutput, BaseAgent, parse_spec
from ulab.agents.mult_sieve import primes_up_to
from ulab.core.errors import InvalidParameterError
from ulab.core.numerics import check_budget, compensated_sum, ordered_map
from ulab.core.tables import MultSpec

logger = logging.getLogger(__name__)

PrimeFunction = Union[MultSpec, Callable[[np.ndarray], np.ndarray]]


def root_of_unity(r: Fraction) -> complex:
    """e(r) for rational r, exact at quarter turns."""
    r = r - math.floor(r)
    exact = {Fraction(0): 1 + 0j, Fraction(1, 4): 1j, Fraction(1, 2): -1 + 0j, Fraction(3, 4): -1j}
    if r in exact:
        return exact[r]
    return complex(np.exp(2j * np.pi * float(r)))


@dataclass(frozen=True, eq=False)
class DirichletCharacter:
    """A character mod q, stored as its value table on [0, q)."""
    modulus: int
    index: int
    values: np.ndarray
    exponents: Tuple[int, ...] = ()

    def __call__(self, n):
        return self.values[np.asarray(n) % self.modulus]

    @property
    def is_principal(self) -> bool:
        return self.index == 0

    def is_real(self) -> bool:
        return bool(np.all(np.abs(self.values.imag) < 1e-12))


def _cyclic_factors(q: int) -> List[Tuple[int, int, np.ndarray]]:
    """
    Decompose (Z/qZ)^x into cyclic factors.
    Returns (prime-power modulus, order, discrete-log table on [0, q)) with
    -1 marking residues that are not coprime to q.
    """
    factors = []
    residues = np.arange(q, dtype=np.int64)
    coprime = np.gcd(residues, q) == 1
    for p, e in sorted(factorint(q).items()):
        m = p ** e
        local = residues % m
        if p == 2:
            if e == 1:
                continue
            # (Z/2^e)^x = {±1} x <5>
            logs_sign = {}
            logs_five = {}
            order_five = 1 << max(e - 2, 0)
            for a in (0, 1):
                g = 1 if a == 0 else m - 1
                v = g
                for b in range(order_five):
                    logs_sign[v] = a
                    logs_five[v] = b
                    v = (v * 5) % m
            table = np.array([logs_sign.get(int(x), -1) for x in local], dtype=np.int64)
            table[~coprime] = -1
            factors.append((m, 2, table))
            if e >= 3:
                table5 = np.array([logs_five.get(int(x), -1) for x in local], dtype=np.int64)
                table5[~coprime] = -1
                factors.append((m, order_five, table5))
        else:
            g = int(primitive_root(m))
            order = int(totient(m))
            logs = {}
            v = 1
            for i in range(order):
                logs[v] = i
                v = (v * g) % m
            table = np.array([logs.get(int(x), -1) for x in local], dtype=np.int64)
            table[~coprime] = -1
            factors.append((m, order, table))
    return factors


@lru_cache(maxsize=256)
def characters_mod(q: int) -> Tuple[DirichletCharacter, ...]:
    """All phi(q) characters mod q, principal first, in mixed-radix index order."""
    if q < 1:
        raise InvalidParameterError(f"modulus must be >= 1, got {q}")
    residues = np.arange(q, dtype=np.int64)
    coprime = np.gcd(residues, q) == 1
    factors = _cyclic_factors(q)
    orders = [order for _, order, _ in factors]
    count = int(np.prod(orders)) if orders else 1

    chars = []
    for index in range(count):
        exps = []
        rem = index
        for order in reversed(orders):
            exps.append(rem % order)
            rem //= order
        exps = tuple(reversed(exps))
        values = np.zeros(q, dtype=np.complex128)
        for n in np.flatnonzero(coprime):
            r = sum((Fraction(j * int(table[n]), order) for j, (_, order, table) in zip(exps, factors)),
                    Fraction(0))
            values[n] = root_of_unity(r)
        values.setflags(write=False)
        chars.append(DirichletCharacter(q, index, values, exps))
    return tuple(chars)


def twisted_character_on_primes(chi: DirichletCharacter, t: float) -> Callable[[np.ndarray], np.ndarray]:
    """p -> chi(p) p^{it}."""
    def values(primes: np.ndarray) -> np.ndarray:
        return chi(primes) * np.exp(1j * t * np.log(primes.astype(float)))
    return values


def prime_values(f: PrimeFunction, primes: np.ndarray) -> np.ndarray:
    """Values of f at the given primes."""
    if callable(f) and not isinstance(f, MultSpec):
        return np.asarray(f(primes), dtype=np.complex128)
    spec = f
    if spec.kind in ("liouville", "moebius"):
        return -np.ones(len(primes), dtype=np.complex128)
    if spec.kind == "character_twist":
        chi = characters_mod(spec.modulus)[spec.character_index]
        return twisted_character_on_primes(chi, spec.t)(primes)
    if spec.kind == "custom_prime_map":
        out = np.full(len(primes), spec.default_value, dtype=np.complex128)
        lookup = dict(spec.prime_values)
        for i in np.flatnonzero(np.isin(primes, list(lookup))):
            out[i] = lookup[int(primes[i])]
        return out
    raise InvalidParameterError(f"{spec.kind} is not 1-bounded; no pretentious distance")


def pretentious_distance(f: PrimeFunction, g: PrimeFunction, X: int) -> float:
    """D(f, g; X) = (sum_{p<=X} (1 - Re f(p) conj g(p)) / p)^{1/2}."""
    if X < 2:
        raise InvalidParameterError(f"X must be >= 2, got {X}")
    primes = primes_up_to(X)
    fp = prime_values(f, primes)
    gp = prime_values(g, primes)
    if np.any(np.abs(fp) > 1 + 1e-12) or np.any(np.abs(gp) > 1 + 1e-12):
        raise InvalidParameterError("prime values must be bounded by 1")
    terms = (1.0 - (fp * np.conj(gp)).real) / primes
    return math.sqrt(max(compensated_sum(terms), 0.0))


@dataclass
class MScore:
    value: float
    argmin_t: float
    argmin_character: Tuple[int, int]
    grid_points: int = 0
    refined: bool = False


def _t_grid(t_max: float, t_resolution: float) -> np.ndarray:
    m = int(math.floor(t_max / t_resolution + 1e-12))
    return t_resolution * np.arange(-m, m + 1, dtype=float)


def m_score_cost(X: int, Q: int, t_resolution: float, t_max: Optional[float] = None) -> float:
    """Work units of the m_score grid: t points x primes <= X x characters mod q <= Q."""
    t_max = float(X) if t_max is None else float(t_max)
    n_chars = sum(int(totient(q)) for q in range(1, Q + 1))
    return float(len(_t_grid(t_max, t_resolution))) * len(primes_up_to(X)) * n_chars


def m_score(f: PrimeFunction, X: int, Q: int, t_resolution: float,
            t_max: Optional[float] = None, budget: Optional[float] = None,
            workers: Optional[int] = None, chunk: int = 1 << 22) -> MScore:
    """
    Grid minimisation of D(f, chi n^{it}; X) over chi mod q <= Q and |t| <= t_max
    (default X), then one golden-section refinement in t at the grid argmin.
    A grid spacing of eps / (2 log X) bounds the D^2 error by eps.
    """
    if Q < 1:
        raise InvalidParameterError(f"Q must be >= 1, got {Q}")
    if t_resolution <= 0:
        raise InvalidParameterError("t_resolution must be positive")
    if X < 2:
        raise InvalidParameterError(f"X must be >= 2, got {X}")
    t_max = float(X) if t_max is None else float(t_max)

    primes = primes_up_to(X)
    logp = np.log(primes.astype(float))
    inv_p = 1.0 / primes.astype(float)
    fp = prime_values(f, primes)
    base = compensated_sum(inv_p)
    grid = _t_grid(t_max, t_resolution)
    chars = [chi for q in range(1, Q + 1) for chi in characters_mod(q)]
    check_budget("m_score grid", m_score_cost(X, Q, t_resolution, t_max), budget)

    rows = max(1, chunk // max(len(primes), 1))

    def d2(chi: DirichletCharacter, ts: np.ndarray) -> np.ndarray:
        a = fp * np.conj(chi(primes)) * inv_p
        out = np.empty(len(ts))
        for lo in range(0, len(ts), rows):
            block = ts[lo:lo + rows]
            out[lo:lo + rows] = base - (np.exp(-1j * np.outer(block, logp)) @ a).real
        return out

    def best_for(chi: DirichletCharacter) -> Tuple[float, float]:
        values = d2(chi, grid)
        i = int(np.argmin(values))
        return float(values[i]), float(grid[i])

    results = ordered_map(best_for, chars, workers)
    best_d2, best_t, best_chi = math.inf, 0.0, chars[0]
    for chi, (v, t) in zip(chars, results):
        if v < best_d2:
            best_d2, best_t, best_chi = v, t, chi

    refined = False
    objective = lambda t: float(d2(best_chi, np.array([t]))[0])
    lo, hi = best_t - t_resolution, best_t + t_resolution
    try:
        if lo >= -t_max and hi <= t_max and objective(lo) > best_d2 and objective(hi) > best_d2:
            res = minimize_scalar(objective, bracket=(lo, best_t, hi), method="golden")
        else:
            res = minimize_scalar(objective, bounds=(max(lo, -t_max), min(hi, t_max)), method="bounded")
        if res.fun < best_d2 and abs(res.x) <= t_max:
            best_d2, best_t, refined = float(res.fun), float(res.x), True
    except ValueError as exc:
        logger.warning("t refinement skipped: %s", exc)

    return MScore(value=math.sqrt(max(best_d2, 0.0)), argmin_t=best_t,
                  argmin_character=(best_chi.modulus, best_chi.index),
                  grid_points=len(grid), refined=refined)


class PretentiousAgent(BaseAgent):
    name = "Pretentious"
    description = (
        "Dirichlet characters, the pretentious distance D(f,g;X) and the "
        "non-pretentiousness score M(f;X,Q)."
    )

    def run(self, agent_input: AgentInput) -> AgentOutput:
        return self._dispatch(agent_input, {
            "characters": self._characters,
            "characters_mod": self._characters,
            "distance": self._distance,
            "pretentious_distance": self._distance,
            "m_score": self._m_score,
            "score": self._m_score,
        })

    # ------------------------------------------------------------------
    def _characters(self, params: dict, context: str) -> AgentOutput:
        q = int(params.get("q", 1))
        chars = characters_mod(q)
        rows = []
        for chi in chars:
            for n in range(q):
                v = complex(chi.values[n])
                rows.append({"q": q, "index": chi.index, "n": n, "re": v.real, "im": v.imag})
        return self._output("characters", params, pd.DataFrame(rows),
                            f"{len(chars)} characters mod {q}.", count=len(chars))

    # ------------------------------------------------------------------
    def _distance(self, params: dict, context: str) -> AgentOutput:
        """params: {"f": spec, "g": spec, "X": int}"""
        f = parse_spec(params.get("f", "liouville"))
        g = parse_spec(params.get("g", {"kind": "character_twist"}))
        X = int(params.get("X", 10))
        d = pretentious_distance(f, g, X)
        df = pd.DataFrame([{"f": f.label(), "g": g.label(), "X": X, "distance": d, "distance_sq": d * d}])
        return self._output("distance", params, df, f"D({f.label()}, {g.label()}; {X}) = {d:.6g}")

    # ------------------------------------------------------------------
    def _m_score(self, params: dict, context: str) -> AgentOutput:
        """params: {"f": spec, "X", "Q", "t_resolution", "t_max"}"""
        f = parse_spec(params.get("f", "liouville"))
        X = int(params.get("X", 1000))
        Q = int(params.get("Q", 1))
        t_res = float(params.get("t_resolution", 1.0))
        t_max = params.get("t_max")
        score = m_score(f, X, Q, t_res, None if t_max is None else float(t_max),
                        workers=params.get("workers"))
        df = pd.DataFrame([{
            "X": X, "Q": Q, "t_res": t_res, "value": score.value,
            "argmin_t": score.argmin_t, "argmin_q": score.argmin_character[0],
            "argmin_index": score.argmin_character[1],
        }])
        return self._output("m_score", params, df,
                            f"M({f.label()}; {X}, {Q}) ~ {score.value:.6g} at t={score.argmin_t:.4g}, "
                            f"chi={score.argmin_character}", refined=score.refined)
