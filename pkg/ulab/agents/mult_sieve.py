"""
Agent: Mult Sieve
Segmented sieving of Liouville, Möbius, von Mangoldt, character-twisted and
custom completely multiplicative functions into FunctionTables.

One sweep per segment records, for every n in the segment, the number of
prime factors with and without multiplicity, squarefreeness and (for prime
powers) the prime base. All tables are derived from those four arrays.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ulab.agents.base import AgentInput, AgentOutput, BaseAgent, parse_spec
from ulab.core.errors import InvalidParameterError
from ulab.core.numerics import check_budget, ordered_map
from ulab.core.tables import FunctionTable, MultSpec, check_table_budget

logger = logging.getLogger(__name__)

SEGMENT = 1 << 20


@lru_cache(maxsize=16)
def primes_up_to(n: int) -> np.ndarray:
    """All primes <= n, ascending (read-only array)."""
    if n < 2:
        out = np.zeros(0, dtype=np.int64)
    else:
        mark = np.ones(n + 1, dtype=bool)
        mark[:2] = False
        for p in range(2, math.isqrt(n) + 1):
            if mark[p]:
                mark[p * p::p] = False
        out = np.flatnonzero(mark).astype(np.int64)
    out.setflags(write=False)
    return out


@dataclass
class SegmentFactors:
    """Per-n factor statistics on one segment [lo, hi]."""
    lo: int
    hi: int
    big_omega: np.ndarray     # Ω(n)
    small_omega: np.ndarray   # ω(n)
    squarefree: np.ndarray
    base: np.ndarray          # p when n = p^m, else 0


def _sweep(lo: int, hi: int, small_primes: np.ndarray) -> SegmentFactors:
    size = hi - lo + 1
    rem = np.arange(lo, hi + 1, dtype=np.int64)
    big = np.zeros(size, dtype=np.int16)
    small = np.zeros(size, dtype=np.int16)
    sqfree = np.ones(size, dtype=bool)
    base = np.zeros(size, dtype=np.int64)

    for p in small_primes:
        p = int(p)
        if p > hi:
            break
        first = -(-lo // p) * p
        if first > hi:
            continue
        sl = slice(first - lo, size, p)
        small[sl] += 1
        base[sl] = p
        pk = p
        while pk <= hi:
            first = -(-lo // pk) * pk
            if first > hi:
                break
            sl = slice(first - lo, size, pk)
            big[sl] += 1
            rem[sl] //= p
            if pk != p:
                sqfree[sl] = False
            pk *= p

    # at most one prime factor above sqrt(hi) survives
    large = rem > 1
    big[large] += 1
    small[large] += 1
    base[large] = rem[large]
    base[small != 1] = 0
    return SegmentFactors(lo, hi, big, small, sqfree, base)


def _segments(start: int, end: int) -> List[Tuple[int, int]]:
    return [(lo, min(lo + SEGMENT - 1, end)) for lo in range(start, end + 1, SEGMENT)]


def _sieve(start: int, end: int, per_segment: Callable[[SegmentFactors], np.ndarray],
           workers: Optional[int] = None) -> np.ndarray:
    check_table_budget(start, end)
    small_primes = primes_up_to(math.isqrt(end))
    parts = ordered_map(lambda seg: per_segment(_sweep(seg[0], seg[1], small_primes)),
                        _segments(start, end), workers)
    return np.concatenate(parts) if parts else np.zeros(0)


def sieve_liouville(start: int, end: int, workers: Optional[int] = None) -> FunctionTable:
    """λ(n) = (-1)^Ω(n) on [start, end]."""
    values = _sieve(start, end, lambda s: (1 - 2 * (s.big_omega & 1)).astype(np.int8), workers)
    return FunctionTable(start, end, values, MultSpec.liouville())


def sieve_moebius(start: int, end: int, workers: Optional[int] = None) -> FunctionTable:
    def mu(s: SegmentFactors) -> np.ndarray:
        out = (1 - 2 * (s.small_omega & 1)).astype(np.int8)
        out[~s.squarefree] = 0
        return out
    return FunctionTable(start, end, _sieve(start, end, mu, workers), MultSpec.moebius())


def sieve_von_mangoldt(start: int, end: int, workers: Optional[int] = None) -> FunctionTable:
    def lam(s: SegmentFactors) -> np.ndarray:
        out = np.zeros(len(s.base), dtype=np.float64)
        hit = s.base > 0
        out[hit] = np.log(s.base[hit].astype(np.float64))
        return out
    return FunctionTable(start, end, _sieve(start, end, lam, workers), MultSpec.von_mangoldt())


def _character(spec: MultSpec):
    from ulab.agents.pretentious import characters_mod
    return characters_mod(spec.modulus)[spec.character_index]


def _twist_values(spec: MultSpec, n: np.ndarray) -> np.ndarray:
    chi = _character(spec)
    out = chi.values[n % spec.modulus].astype(np.complex128)
    if spec.t != 0.0:
        out = out * np.exp(1j * spec.t * np.log(n.astype(np.float64)))
    return out


def sieve_character_twist(spec: MultSpec, start: int, end: int) -> FunctionTable:
    """χ(n) n^{it}; no sieving needed, the values are closed-form."""
    check_table_budget(start, end)
    parts = [_twist_values(spec, np.arange(lo, hi + 1, dtype=np.int64)) for lo, hi in _segments(start, end)]
    return FunctionTable(start, end, np.concatenate(parts), spec)


def _prime_lookup(spec: MultSpec, primes: np.ndarray) -> np.ndarray:
    out = np.full(len(primes), spec.default_value, dtype=np.complex128)
    if spec.prime_values:
        keys = np.array([p for p, _ in spec.prime_values], dtype=np.int64)
        vals = np.array([v for _, v in spec.prime_values], dtype=np.complex128)
        pos = np.searchsorted(keys, primes)
        pos_c = np.minimum(pos, len(keys) - 1)
        hit = keys[pos_c] == primes
        out[hit] = vals[pos_c[hit]]
    return out


def sieve_custom(spec: MultSpec, start: int, end: int, workers: Optional[int] = None) -> FunctionTable:
    """Completely multiplicative f with f(p) from the prime map, default elsewhere."""
    check_table_budget(start, end)
    small_primes = primes_up_to(math.isqrt(end))
    small_vals = _prime_lookup(spec, small_primes)

    def segment(bounds: Tuple[int, int]) -> np.ndarray:
        lo, hi = bounds
        size = hi - lo + 1
        rem = np.arange(lo, hi + 1, dtype=np.int64)
        out = np.ones(size, dtype=np.complex128)
        for p, fp in zip(small_primes, small_vals):
            p = int(p)
            pk = p
            while pk <= hi:
                first = -(-lo // pk) * pk
                if first > hi:
                    break
                sl = slice(first - lo, size, pk)
                out[sl] *= fp
                rem[sl] //= p
                pk *= p
        large = rem > 1
        out[large] *= _prime_lookup(spec, rem[large])
        return out

    parts = ordered_map(segment, _segments(start, end), workers)
    return FunctionTable(start, end, np.concatenate(parts), spec)


def build_table(spec: MultSpec, start: int, end: int) -> FunctionTable:
    """Sieve the table for any MultSpec kind."""
    if spec.kind == "liouville":
        return sieve_liouville(start, end)
    if spec.kind == "moebius":
        return sieve_moebius(start, end)
    if spec.kind == "von_mangoldt":
        return sieve_von_mangoldt(start, end)
    if spec.kind == "character_twist":
        return sieve_character_twist(spec, start, end)
    return sieve_custom(spec, start, end)


def eval_character_twist(n: int, spec: MultSpec) -> complex:
    """χ(n)·e(t ln n / 2π); zero for n < 1 or gcd(n, q) > 1."""
    if spec.kind != "character_twist":
        raise InvalidParameterError(f"expected a character_twist spec, got {spec.kind}")
    if n < 1:
        return 0j
    return complex(_twist_values(spec, np.array([n], dtype=np.int64))[0])


# ---------------------------------------------------------------------------
# Reduction of multiplicative f to completely multiplicative f1 and h
# ---------------------------------------------------------------------------

PrimePowerValues = Union[Callable[[int, int], complex], Dict[Tuple[int, int], complex]]


@dataclass
class ConvolutionReduction:
    """f = f1 * h on [1, X]: f1 completely multiplicative with f1(p) = f(p), h(p) = 0."""
    X: int
    f: np.ndarray
    f1: np.ndarray
    h: np.ndarray
    f1_spec: MultSpec


def _multiplicative_table(X: int, local: Callable[[int, int], complex]) -> np.ndarray:
    """Values on [1, X] of the multiplicative function with g(p^k) = local(p, k)."""
    out = np.ones(X, dtype=np.complex128)
    idx = np.arange(1, X + 1, dtype=np.int64)
    for p in primes_up_to(X):
        p = int(p)
        mult = idx[p - 1::p]
        val = np.zeros(len(mult), dtype=np.int64)
        rem = mult.copy()
        while True:
            hit = rem % p == 0
            if not hit.any():
                break
            val[hit] += 1
            rem[hit] //= p
        for k in np.unique(val):
            out[mult[val == k] - 1] *= local(p, int(k))
    return out


def dirichlet_convolution_reduction(prime_powers: PrimePowerValues, X: int,
                                    budget: Optional[float] = None) -> ConvolutionReduction:
    """
    Split a multiplicative f into f1 * h with f1 completely multiplicative
    and h supported on powerful numbers: h(p^k) = f(p^k) - f(p) f(p^{k-1}).
    `prime_powers` gives f(p^k); a dict falls back to f(p)^k for missing keys.
    """
    if X < 1:
        raise InvalidParameterError(f"X must be >= 1, got {X}")
    check_budget("convolution reduction", float(X) * math.log(max(X, 2)), budget)
    if isinstance(prime_powers, dict):
        table = dict(prime_powers)
        fp = lambda p, k: table.get((p, k), table.get((p, 1), 1.0) ** k)
    else:
        fp = prime_powers

    f = _multiplicative_table(X, lambda p, k: fp(p, k))
    f1 = _multiplicative_table(X, lambda p, k: fp(p, 1) ** k)
    h = _multiplicative_table(X, lambda p, k: 1.0 if k == 0 else fp(p, k) - fp(p, 1) * (fp(p, k - 1) if k > 1 else 1.0))
    spec = MultSpec.custom({int(p): fp(int(p), 1) for p in primes_up_to(X)}) if X >= 2 else MultSpec.custom({})
    return ConvolutionReduction(X, f, f1, h, spec)


def dirichlet_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a * b)(n) = Σ_{d | n} a(n/d) b(d) for arrays indexed from n = 1."""
    X = min(len(a), len(b))
    out = np.zeros(X, dtype=np.result_type(a, b))
    for d in range(1, X + 1):
        if b[d - 1] != 0:
            out[d - 1::d] += b[d - 1] * a[: X // d]
    return out


PRESET_PRIME_POWERS: Dict[str, Callable[[int, int], complex]] = {
    "moebius": lambda p, k: -1.0 if k == 1 else 0.0,
    "liouville": lambda p, k: (-1.0) ** k,
    "squarefree": lambda p, k: 1.0 if k <= 1 else 0.0,
}


class MultSieveAgent(BaseAgent):
    name = "MultSieve"
    description = (
        "Segmented sieve for Liouville, Möbius, von Mangoldt and twisted "
        "character tables; reduction of multiplicative to completely multiplicative functions."
    )

    def run(self, agent_input: AgentInput) -> AgentOutput:
        return self._dispatch(agent_input, {
            "sieve": self._sieve,
            "table": self._sieve,
            "eval_character_twist": self._eval_twist,
            "twist": self._eval_twist,
            "reduction": self._reduction,
            "convolution_reduction": self._reduction,
        })

    # ------------------------------------------------------------------
    def _sieve(self, params: dict, context: str) -> AgentOutput:
        """params: {"kind" | "spec", "start", "end"}"""
        spec = parse_spec(params.get("spec", params.get("kind", "liouville")))
        start = int(params.get("start", 1))
        end = int(params.get("end", 100))
        table = self.table(spec, start, end)
        n = np.arange(start, end + 1)
        values = table.values
        df = pd.DataFrame({"n": n, "value": values if not np.iscomplexobj(values) else values.real})
        if np.iscomplexobj(values):
            df["imag"] = values.imag
        partial = values.sum()
        summary = f"{spec.label()} on [{start}, {end}]: {len(df)} values, partial sum {partial:.6g}."
        return self._output("sieve", params, df, summary, kind=spec.kind)

    # ------------------------------------------------------------------
    def _eval_twist(self, params: dict, context: str) -> AgentOutput:
        spec = MultSpec.character_twist(int(params.get("modulus", 1)),
                                        int(params.get("character_index", 0)),
                                        float(params.get("t", 0.0)))
        ns = params.get("n", [1])
        ns = ns if isinstance(ns, list) else [ns]
        vals = [eval_character_twist(int(n), spec) for n in ns]
        df = pd.DataFrame({"n": ns, "re": [v.real for v in vals], "im": [v.imag for v in vals],
                           "abs": [abs(v) for v in vals]})
        return self._output("eval_character_twist", params, df, f"{spec.label()} at {len(ns)} points.")

    # ------------------------------------------------------------------
    def _reduction(self, params: dict, context: str) -> AgentOutput:
        """params: {"preset": name, "X": int}"""
        preset = params.get("preset", "moebius")
        if preset not in PRESET_PRIME_POWERS:
            raise InvalidParameterError(f"unknown preset '{preset}'. Options: {sorted(PRESET_PRIME_POWERS)}")
        X = int(params.get("X", 100))
        red = dirichlet_convolution_reduction(PRESET_PRIME_POWERS[preset], X)
        df = pd.DataFrame({"n": np.arange(1, X + 1), "f": red.f.real, "f1": red.f1.real, "h": red.h.real})
        support = int(np.count_nonzero(red.h))
        return self._output("reduction", params, df,
                            f"{preset} = f1 * h on [1, {X}]; h has {support} nonzero values.",
                            h_support=support)
