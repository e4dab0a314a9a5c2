"""
Agent: Patterns
Sign and value pattern counts of multiplicative functions, Chowla-type
correlations averaged over short shifts, polynomial averages with
Liouville / von Mangoldt weights, and the W-tricked von Mangoldt weight.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import sympy

from ulab.agents.base import AgentInput, AgentOutput, BaseAgent, parse_spec
from ulab.core.errors import InvalidParameterError, TableRangeError
from ulab.core.numerics import check_budget, compensated_sum, ordered_map
from ulab.core.tables import FunctionTable, MultSpec, ensure_table

logger = logging.getLogger(__name__)

WEIGHTS = ("lambda", "von_mangoldt", "one")
_WEIGHT_SPECS = {"lambda": MultSpec.liouville(), "von_mangoldt": MultSpec.von_mangoldt()}


@dataclass
class PatternCount:
    k: int
    N: int
    count: int
    first_occurrence: Dict[tuple, int] = field(default_factory=dict)
    alphabet: int = 2

    def render(self, pattern: tuple) -> str:
        if self.alphabet == 2:
            return "".join("-" if s else "+" for s in pattern)
        return ",".join(str(s) for s in pattern)

    def to_records(self) -> List[dict]:
        """JSON-lines rows {pattern, first_n}, ordered by first occurrence."""
        items = sorted(self.first_occurrence.items(), key=lambda kv: kv[1])
        return [{"pattern": self.render(p), "first_n": n} for p, n in items]

    def at(self, N: int) -> int:
        """Count for a smaller scan bound, read off the first occurrences."""
        return sum(1 for n in self.first_occurrence.values() if n < N) if self.k else 1


@dataclass
class CorrelationResult:
    value: float
    X: int
    epsilon: float
    shifts: str
    weights: Tuple[str, ...]
    logarithmic: bool = False
    terms: int = 0


# ---------------------------------------------------------------------------
# Patterns
# ---------------------------------------------------------------------------

def _symbols(values: np.ndarray, ell: int) -> np.ndarray:
    """Exponent j of a μ_ℓ value e(j/ℓ)."""
    if np.iscomplexobj(values) or ell != 2:
        v = values.astype(np.complex128)
        if np.any(np.abs(np.abs(v) - 1.0) > 1e-9):
            raise InvalidParameterError("value patterns need a unimodular function")
        j = np.rint(np.angle(v) * ell / (2 * np.pi)).astype(np.int64) % ell
        if np.any(np.abs(np.exp(2j * np.pi * j / ell) - v) > 1e-6):
            raise InvalidParameterError(f"values are not {ell}-th roots of unity")
        return j
    if np.any(values == 0):
        raise InvalidParameterError("value patterns need a unimodular function")
    return (values < 0).astype(np.int64)


def value_patterns(spec: Union[MultSpec, str], k: int, N: int, ell: int,
                   table: Optional[FunctionTable] = None, cache_dir=None) -> PatternCount:
    """Distinct windows (g(n+1), ..., g(n+k)) for 0 <= n <= N-1, with first occurrences."""
    if k < 0:
        raise InvalidParameterError(f"k must be >= 0, got {k}")
    if ell < 2:
        raise InvalidParameterError(f"alphabet size must be >= 2, got {ell}")
    if k == 0:
        return PatternCount(0, N, 1, {(): 0}, ell)
    if N < k:
        raise InvalidParameterError(f"scan bound N={N} shorter than pattern length k={k}")
    if k * math.log2(ell) >= 63:
        raise InvalidParameterError(f"patterns of length {k} over {ell} symbols do not fit a 63-bit code")
    spec = parse_spec(spec)
    if table is None:
        table = ensure_table(spec, 1, N + k, cache_dir)
    sym = _symbols(table.window(1, N + k), ell)

    codes = np.zeros(N, dtype=np.int64)
    for i in range(k):
        codes = codes * ell + sym[i:i + N]
    uniq, first = np.unique(codes, return_index=True)

    def decode(c: int) -> tuple:
        digits = []
        for _ in range(k):
            c, r = divmod(c, ell)
            digits.append(int(r))
        return tuple(reversed(digits))

    occurrences = {decode(int(c)): int(n) for c, n in zip(uniq, first)}
    logger.debug("%d patterns of length %d in the first %d windows", len(occurrences), k, N)
    return PatternCount(k, N, len(occurrences), occurrences, ell)


def sign_patterns(k: int, N: int, table: Optional[FunctionTable] = None, cache_dir=None) -> PatternCount:
    """s(k) observed in the Liouville windows up to N."""
    return value_patterns(MultSpec.liouville(), k, N, 2, table=table, cache_dir=cache_dir)


def pattern_growth(k: int, Ns: Sequence[int], spec: Union[MultSpec, str] = "liouville",
                   ell: int = 2, cache_dir=None) -> pd.DataFrame:
    """Observed pattern count at each scan bound, from one scan at max(Ns)."""
    full = value_patterns(spec, k, max(Ns), ell, cache_dir=cache_dir)
    return pd.DataFrame({"k": k, "N": list(Ns), "count": [full.at(N) for N in Ns],
                         "bound": ell ** k})


# ---------------------------------------------------------------------------
# Correlation averages
# ---------------------------------------------------------------------------

def _shifted(values: np.ndarray, start: int, s: int, X: int) -> np.ndarray:
    """w(n + s) for n = 1..X with zeros outside the table."""
    out = np.zeros(X, dtype=values.dtype)
    lo = max(1, start - s)
    hi = min(X, start + len(values) - 1 - s)
    if lo <= hi:
        out[lo - 1:hi] = values[lo + s - start:hi + s - start + 1]
    return out


def _inner_weights(X: int, logarithmic: bool) -> Optional[np.ndarray]:
    if not logarithmic:
        return None
    w = 1.0 / np.arange(1, X + 1, dtype=float)
    return w / math.fsum(w)


def _inner_mean(prod: np.ndarray, weights: Optional[np.ndarray]) -> float:
    if weights is None:
        return compensated_sum(prod) / len(prod)
    return compensated_sum(prod * weights)


def _h_max(X: int, epsilon: float) -> int:
    h = math.floor(X ** epsilon + 1e-9)
    if h < 1:
        raise InvalidParameterError(f"X^epsilon = {X ** epsilon:.3g} < 1")
    return h


def _weight_tables(weights: Sequence[str], end: int, tables: Optional[Dict[str, FunctionTable]],
                   cache_dir) -> Dict[str, FunctionTable]:
    out = dict(tables or {})
    for w in set(weights):
        if w not in WEIGHTS:
            raise InvalidParameterError(f"unknown weight '{w}'. Options: {list(WEIGHTS)}")
        if w == "one" or w in out:
            continue
        out[w] = ensure_table(_WEIGHT_SPECS[w], 1, end, cache_dir)
    return out


def _weight_values(w: str, tables: Dict[str, FunctionTable], end: int) -> Tuple[np.ndarray, int]:
    if w == "one":
        return np.ones(end, dtype=float), 1
    t = tables[w]
    return t.values.astype(float), t.start


def chowla_average(shifts: Sequence[int], X: int, epsilon: float, logarithmic: bool = False,
                   weight: str = "lambda", table: Optional[FunctionTable] = None, cache_dir=None,
                   workers: Optional[int] = None, budget: Optional[float] = None) -> CorrelationResult:
    """ℰ_{h ≤ X^ε} |ℰ_{n ≤ X} Π_i λ(n + a_i h)|."""
    shifts = [int(a) for a in shifts]
    if not shifts:
        raise InvalidParameterError("at least one shift is required")
    if len(set(shifts)) != len(shifts) or min(shifts) < 0:
        raise InvalidParameterError(f"shifts must be distinct and nonnegative, got {shifts}")
    if X < 1:
        raise InvalidParameterError(f"X must be >= 1, got {X}")
    H = _h_max(X, epsilon)
    end = X + max(shifts) * H
    check_budget("Chowla average", float(H) * X * len(shifts), budget)

    if weight == "one":
        values, start = np.ones(end, dtype=float), 1
    else:
        if table is None:
            table = ensure_table(_WEIGHT_SPECS[weight], 1, end, cache_dir)
        elif table.end < end:
            raise TableRangeError(f"Chowla average needs λ up to {end}, table ends at {table.end}")
        values, start = table.values.astype(float), table.start
    w = _inner_weights(X, logarithmic)

    def one_h(h: int) -> float:
        prod = np.ones(X, dtype=float)
        for a in shifts:
            prod *= _shifted(values, start, a * h, X)
        return abs(_inner_mean(prod, w))

    per_h = ordered_map(one_h, range(1, H + 1), workers)
    value = compensated_sum(per_h) / H
    logger.debug("Chowla average shifts=%s X=%d H=%d: %.6g", shifts, X, H, value)
    return CorrelationResult(value, X, epsilon, ",".join(map(str, shifts)), (weight,) * len(shifts),
                             logarithmic, H)


def parse_polys(polys: Sequence[Union[str, sympy.Expr]]) -> Tuple[List[sympy.Expr], List[sympy.Symbol]]:
    """Integer polynomials in m or m1, m2, ...; variables in name order."""
    exprs = [sympy.sympify(str(p).replace("^", "**")) if isinstance(p, str) else sympy.sympify(p)
             for p in polys]
    variables = sorted(set().union(*[e.free_symbols for e in exprs]), key=lambda s: s.name)
    for e in exprs:
        if variables:
            poly = sympy.Poly(e, *variables)
            if not all(c.is_integer for c in poly.coeffs()):
                raise InvalidParameterError(f"{e} does not have integer coefficients")
        elif not e.is_integer:
            raise InvalidParameterError(f"{e} is not an integer constant")
    for i, p in enumerate(exprs):
        for q in exprs[i + 1:]:
            if sympy.simplify(p - q).free_symbols == set():
                raise InvalidParameterError(f"degenerate family: {p} - ({q}) is constant")
    return exprs, variables


def poly_average(polys: Sequence[Union[str, sympy.Expr]], X: int, epsilon: float,
                 weights: Sequence[str], logarithmic: bool = False,
                 tables: Optional[Dict[str, FunctionTable]] = None, cache_dir=None,
                 workers: Optional[int] = None, budget: Optional[float] = None) -> CorrelationResult:
    """ℰ_{m ∈ [X^ε]^r} |ℰ_{n ≤ X} Π_i w_i(n + P_i(m))|."""
    exprs, variables = parse_polys(polys)
    weights = list(weights)
    if len(weights) != len(exprs):
        raise InvalidParameterError(f"{len(exprs)} polynomials but {len(weights)} weights")
    if "von_mangoldt" in weights and "lambda" not in weights:
        logger.warning("von Mangoldt weights without a Liouville factor: no cancellation is expected")
    degree = max((sympy.Poly(e, *variables).total_degree() for e in exprs), default=0) if variables else 0
    if degree and epsilon >= 1.0 / degree:
        raise InvalidParameterError(f"epsilon={epsilon} must be < 1/deg = {1.0 / degree:.4g}")
    r = max(len(variables), 1)
    M = _h_max(X, epsilon)
    check_budget("polynomial average", float(M) ** r * X * len(exprs), budget)

    axes = np.meshgrid(*[np.arange(1, M + 1)] * r, indexing="ij")
    grid = [a.ravel() for a in axes]
    shifts = []
    for e in exprs:
        fn = sympy.lambdify(variables, e, "numpy")
        s = fn(*grid[:len(variables)]) if variables else int(e)
        shifts.append(np.broadcast_to(np.asarray(s, dtype=np.int64), grid[0].shape))
    shifts = np.stack(shifts, axis=1)

    max_shift = int(max(shifts.max(), 0))
    end = X + max_shift
    tables = _weight_tables(weights, end, tables, cache_dir)
    columns = [_weight_values(w, tables, end) for w in weights]
    reach = [start + len(values) - 1 for values, start in columns]
    if "von_mangoldt" in weights:
        short = reach[weights.index("von_mangoldt")]
        if short < end:
            lost = end - short
            logger.warning("von Mangoldt table ends at %d, %d shifted entries treated as 0 "
                           "(boundary loss <= %.3g)", short, lost, lost * math.log(end) / X)
    w = _inner_weights(X, logarithmic)

    def one_m(row: np.ndarray) -> float:
        prod = np.ones(X, dtype=float)
        for (values, start), s in zip(columns, row):
            prod *= _shifted(values, start, int(s), X)
        return abs(_inner_mean(prod, w))

    per_m = ordered_map(one_m, list(shifts), workers)
    value = compensated_sum(per_m) / len(per_m)
    label = ";".join(str(e) for e in exprs)
    logger.debug("polynomial average (%s) X=%d: %.6g", label, X, value)
    return CorrelationResult(value, X, epsilon, label, tuple(weights), logarithmic, len(per_m))


def von_mangoldt_value(n: int) -> float:
    if n < 2:
        return 0.0
    factors = sympy.factorint(n)
    return math.log(next(iter(factors))) if len(factors) == 1 else 0.0


def w_trick_weight(W: int, b: int, d: int) -> float:
    """Λ_{W,b}(d) = φ(W)/W · Λ(Wd + b)."""
    if W < 1 or not 1 <= b <= W:
        raise InvalidParameterError(f"need 1 <= b <= W, got W={W}, b={b}")
    return int(sympy.totient(W)) / W * von_mangoldt_value(W * d + b)


class PatternsAgent(BaseAgent):
    name = "Patterns"
    description = (
        "Sign and value pattern counts, Chowla averages over short shifts, "
        "polynomial correlation averages and W-tricked von Mangoldt weights."
    )

    def run(self, agent_input: AgentInput) -> AgentOutput:
        return self._dispatch(agent_input, {
            "sign_patterns": self._signs,
            "patterns": self._signs,
            "value_patterns": self._values,
            "pattern_growth": self._growth,
            "chowla": self._chowla,
            "chowla_average": self._chowla,
            "polyavg": self._polyavg,
            "poly_average": self._polyavg,
            "w_trick": self._w_trick,
            "w_trick_weight": self._w_trick,
        })

    def _count_output(self, op: str, params: dict, res: PatternCount, label: str) -> AgentOutput:
        df = pd.DataFrame([{"k": res.k, "N": res.N, "count": res.count, "bound": res.alphabet ** res.k}])
        return self._output(op, params, df,
                            f"{res.count} of {res.alphabet ** res.k} {label} patterns of length {res.k} "
                            f"up to N={res.N}",
                            patterns=res.to_records())

    # ------------------------------------------------------------------
    def _signs(self, params: dict, context: str) -> AgentOutput:
        k, N = int(params.get("k", 4)), int(params.get("N", 10**6))
        res = sign_patterns(k, N, cache_dir=self._cache_dir)
        return self._count_output("sign_patterns", params, res, "sign")

    # ------------------------------------------------------------------
    def _values(self, params: dict, context: str) -> AgentOutput:
        spec = parse_spec(params.get("spec", "liouville"))
        k, N, ell = int(params.get("k", 2)), int(params.get("N", 10**4)), int(params.get("ell", 2))
        res = value_patterns(spec, k, N, ell, cache_dir=self._cache_dir)
        return self._count_output("value_patterns", params, res, spec.label())

    # ------------------------------------------------------------------
    def _growth(self, params: dict, context: str) -> AgentOutput:
        k = int(params.get("k", 4))
        Ns = [int(n) for n in params.get("Ns", [10**3, 10**4, 10**5])]
        df = pattern_growth(k, Ns, cache_dir=self._cache_dir)
        return self._output("pattern_growth", params, df,
                            f"s({k}) by scan bound: " + ", ".join(f"{n}:{c}" for n, c in zip(df.N, df["count"])))

    # ------------------------------------------------------------------
    def _chowla(self, params: dict, context: str) -> AgentOutput:
        shifts = [int(a) for a in params.get("shifts", [0, 1])]
        X, eps = int(params.get("X", 10**4)), float(params.get("epsilon", 0.3))
        res = chowla_average(shifts, X, eps, logarithmic=bool(params.get("logarithmic", False)),
                             cache_dir=self._cache_dir, workers=params.get("workers"))
        df = pd.DataFrame([{"X": X, "epsilon": eps, "shifts": res.shifts, "value": res.value}])
        return self._output("chowla_average", params, df,
                            f"Chowla average over h <= {res.terms}, shifts ({res.shifts}) at X={X}: {res.value:.6g}")

    # ------------------------------------------------------------------
    def _polyavg(self, params: dict, context: str) -> AgentOutput:
        polys = params.get("polys", ["m", "2*m"])
        polys = [p.strip() for p in polys.split(";")] if isinstance(polys, str) else list(polys)
        weights = params.get("weights", ["lambda"] * len(polys))
        weights = [w.strip() for w in weights.split(",")] if isinstance(weights, str) else list(weights)
        X, eps = int(params.get("X", 10**4)), float(params.get("epsilon", 0.25))
        res = poly_average(polys, X, eps, weights, logarithmic=bool(params.get("logarithmic", False)),
                           cache_dir=self._cache_dir, workers=params.get("workers"))
        df = pd.DataFrame([{"X": X, "epsilon": eps, "polys": res.shifts, "weights": ",".join(res.weights),
                            "value": res.value}])
        return self._output("poly_average", params, df,
                            f"polynomial average ({res.shifts}) with weights {','.join(res.weights)} "
                            f"at X={X}: {res.value:.6g}")

    # ------------------------------------------------------------------
    def _w_trick(self, params: dict, context: str) -> AgentOutput:
        W, b = int(params.get("W", 6)), int(params.get("b", 1))
        ds = params.get("d", [1])
        ds = [int(d) for d in (ds if isinstance(ds, (list, tuple)) else [ds])]
        df = pd.DataFrame({"W": W, "b": b, "d": ds, "weight": [w_trick_weight(W, b, d) for d in ds]})
        return self._output("w_trick_weight", params, df, f"Λ_({W},{b}) at {len(ds)} points")
