"""
Agent: Norms
Gowers uniformity norms of finitely supported sequences, their short-interval
normalisation, Gowers box norms on ℤ/Nℤ and stratified averages over [X, 2X].
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ulab.agents.base import AgentInput, AgentOutput, BaseAgent, parse_spec
from ulab.core.errors import InvalidParameterError, NumericalFailureError
from ulab.core.numerics import (
    check_budget,
    compensated_sum,
    log_stratified_points,
    mean_and_stderr,
    ordered_map,
    stratified_points,
)
from ulab.core.tables import FunctionTable, MultSpec, ensure_table

logger = logging.getLogger(__name__)

METHODS = ("direct", "recursive")
NEGATIVE_TOLERANCE = 1e-9


@dataclass
class GowersResult:
    value: float
    k: int
    x: int
    H: int
    method: str = "direct"


def _shifted(f: np.ndarray, s: int) -> np.ndarray:
    """y -> f(y + s) on y = 0..H-1, zero outside the support."""
    H = len(f)
    out = np.zeros(H, dtype=f.dtype)
    if -H < s < H:
        if s >= 0:
            out[:H - s] = f[s:]
        else:
            out[-s:] = f[:H + s]
    return out


def _finish(total: complex, scale: float, order: int) -> float:
    """2^order-th root of a provably nonnegative real sum."""
    if abs(total.imag) > 1e-9 * max(abs(total), 1e-300) and abs(total.imag) > 1e-12 * scale:
        raise NumericalFailureError(f"Gowers sum has imaginary part {total.imag:.3g}")
    re = total.real
    if re < 0:
        if re < -NEGATIVE_TOLERANCE * max(scale, 1.0):
            raise NumericalFailureError(f"Gowers sum is negative: {re:.3g}")
        re = 0.0
    return re ** (1.0 / 2 ** order)


def gowers_unnormalized(f, k: int, budget: Optional[float] = None) -> float:
    """
    ‖f‖_{U^{k+1}(ℤ)} for f supported on 0..H-1: enumerate h_1..h_k, and for
    each tuple collapse the (y, h_{k+1}) sum to |Σ_y g(y)|^2 with
    g(y) = Π_ω C^{|ω|} f(y + ω·h).
    """
    f = np.asarray(f, dtype=np.complex128)
    if k < 0:
        raise InvalidParameterError(f"k must be >= 0, got {k}")
    H = len(f)
    check_budget(f"U^{k + 1} direct sum", float(H) ** (k + 2), budget)
    if H == 0 or not np.any(f):
        return 0.0

    cube = list(itertools.product((0, 1), repeat=k))
    terms = []
    for hs in itertools.product(range(-H + 1, H), repeat=k):
        g = np.ones(H, dtype=np.complex128)
        for omega in cube:
            s = sum(w * h for w, h in zip(omega, hs))
            factor = _shifted(f, s)
            g *= np.conj(factor) if sum(omega) % 2 else factor
            if not g.any():
                break
        S = g.sum()
        terms.append(S * np.conj(S))
    total = compensated_sum(terms)
    return _finish(total, compensated_sum(np.abs(terms)), k + 1)


def _power(f: np.ndarray, order: int) -> float:
    """‖f‖_{U^order}^{2^order} by Σ_h ‖Δ_h f‖_{U^{order-1}}^{2^{order-1}}."""
    if order == 1:
        return abs(f.sum()) ** 2
    if order == 2:
        corr = np.correlate(f, f, mode="full")
        return compensated_sum(np.abs(corr) ** 2)
    H = len(f)
    parts = []
    for h in range(-H + 1, H):
        d = _shifted(f, h) * np.conj(f)
        if d.any():
            parts.append(_power(d, order - 1))
    return compensated_sum(parts)


def gowers_recursive(f, k: int, budget: Optional[float] = None) -> float:
    f = np.asarray(f, dtype=np.complex128)
    if k < 0:
        raise InvalidParameterError(f"k must be >= 0, got {k}")
    H = len(f)
    check_budget(f"U^{k + 1} recursive sum", float(H) ** (k + 1), budget)
    if H == 0 or not np.any(f):
        return 0.0
    total = _power(f, k + 1)
    return _finish(complex(total), abs(total), k + 1)


_GOWERS = {"direct": gowers_unnormalized, "recursive": gowers_recursive}


@lru_cache(maxsize=256)
def _indicator_norm(H: int, k: int, method: str) -> float:
    return _GOWERS[method](np.ones(H), k, budget=math.inf)


def gowers_of_window(values, k: int, method: str = "direct", budget: Optional[float] = None) -> float:
    """‖f 1_I‖ / ‖1_I‖ for the values of f on an interval I."""
    if method not in _GOWERS:
        raise InvalidParameterError(f"unknown method '{method}'. Options: {list(METHODS)}")
    values = np.asarray(values)
    if len(values) == 0:
        raise InvalidParameterError("H must be >= 1")
    return _GOWERS[method](values, k, budget) / _indicator_norm(len(values), k, method)


def gowers_interval(f: FunctionTable, x: int, H: int, k: int, method: str = "direct",
                    budget: Optional[float] = None) -> GowersResult:
    """Normalised ‖f‖_{U^{k+1}} over the H integers x..x+H-1."""
    if H < 1:
        raise InvalidParameterError(f"H must be >= 1, got {H}")
    value = gowers_of_window(f.window(x, H), k, method, budget)
    return GowersResult(value, k, x, H, method)


def box_norm(f, boxes: Sequence[Sequence[int]], budget: Optional[float] = None) -> float:
    """
    ‖f‖_{□^d_{C_1..C_d}} on ℤ/Nℤ, averaging h_i over the difference
    distribution of C_i (c - c' with c, c' uniform in C_i).
    """
    f = np.asarray(f, dtype=np.complex128)
    N = len(f)
    if N < 1:
        raise InvalidParameterError("N must be >= 1")
    d = len(boxes)
    if d < 1:
        raise InvalidParameterError("box norm needs at least one box")

    supports = []
    for box in boxes:
        box = np.asarray(list(box), dtype=np.int64) % N
        if len(box) == 0:
            raise InvalidParameterError("boxes must be nonempty")
        diffs = (box[:, None] - box[None, :]).ravel() % N
        hs, counts = np.unique(diffs, return_counts=True)
        supports.append((hs, counts / counts.sum()))
    check_budget(f"box norm of order {d}", float(np.prod([len(h) for h, _ in supports])) * N, budget)

    x = np.arange(N)
    cube = list(itertools.product((0, 1), repeat=d - 1))
    last_h, last_w = supports[-1]
    idx = (x[:, None] + last_h[None, :]) % N
    terms = []
    for choice in itertools.product(*[range(len(h)) for h, _ in supports[:-1]]):
        hs = [supports[i][0][j] for i, j in enumerate(choice)]
        weight = float(np.prod([supports[i][1][j] for i, j in enumerate(choice)])) if choice else 1.0
        g = np.ones(N, dtype=np.complex128)
        for omega in cube:
            s = sum(w * h for w, h in zip(omega, hs))
            factor = f[(x + s) % N]
            g *= np.conj(factor) if sum(omega) % 2 else factor
        corr = (g[:, None] * np.conj(g[idx])).sum(axis=0) / N
        terms.append(weight * np.dot(last_w, corr))
    total = compensated_sum(terms)
    return _finish(total, float(np.max(np.abs(f))) ** (2 ** d), d)


def gowers_cyclic(f, d: int, budget: Optional[float] = None) -> float:
    """Normalised U^d on ℤ/Nℤ (all boxes equal to the whole group)."""
    N = len(f)
    return box_norm(f, [range(N)] * d, budget)


def averaged_gowers(spec: MultSpec, X: int, H: int, k: int, samples: int, seed: int,
                    method: str = "recursive", logarithmic: bool = False,
                    table: Optional[FunctionTable] = None, cache_dir=None,
                    workers: Optional[int] = None, budget: Optional[float] = None) -> tuple:
    """
    Stratified estimate of (1/X)∫_X^{2X} ‖f‖_{U^{k+1}[x,x+H]} dx, or of the
    logarithmic average over [1, X] with `logarithmic`.
    Returns (mean, stderr, per-stratum values).
    """
    if samples < 1:
        raise InvalidParameterError("samples must be >= 1")
    if H < 1 or X < 1:
        raise InvalidParameterError("X and H must be >= 1")
    per_sample = float(H) ** (k + 2 if method == "direct" else k + 1)
    check_budget("averaged Gowers norm", per_sample * samples, budget)

    points = log_stratified_points(X, samples, seed) if logarithmic else stratified_points(X, samples, seed)
    lo, hi = (1, X + H) if logarithmic else (X, 2 * X + H)
    if table is None:
        table = ensure_table(spec, lo, hi, cache_dir)
    values = ordered_map(lambda x: gowers_interval(table, x, H, k, method, budget=math.inf).value,
                         points, workers)
    mean, stderr = mean_and_stderr(values)
    logger.debug("averaged U^%d over %d strata at X=%d: %.6g", k + 1, samples, X, mean)
    return mean, stderr, values


def parse_h_rule(rule, X: int) -> int:
    """'X^0.4' -> ceil(X^0.4); plain integers pass through."""
    if isinstance(rule, (int, np.integer)):
        return int(rule)
    text = str(rule).replace(" ", "")
    if text.upper().startswith("X^"):
        theta = float(text[2:])
        return max(1, math.ceil(X ** theta - 1e-9))
    return int(text)


class NormsAgent(BaseAgent):
    name = "Norms"
    description = (
        "Gowers uniformity norms on short intervals and ℤ/Nℤ, Gowers box norms "
        "and stratified averages over [X, 2X]."
    )

    def run(self, agent_input: AgentInput) -> AgentOutput:
        return self._dispatch(agent_input, {
            "gowers": self._interval,
            "gowers_interval": self._interval,
            "box": self._box,
            "box_norm": self._box,
            "average": self._average,
            "averaged_gowers": self._average,
            "gowers_avg": self._average,
        })

    # ------------------------------------------------------------------
    def _interval(self, params: dict, context: str) -> AgentOutput:
        spec = parse_spec(params.get("spec", "liouville"))
        x, H, k = int(params.get("x", 1000)), int(params.get("H", 64)), int(params.get("k", 1))
        method = params.get("method", "direct")
        res = gowers_interval(self.table(spec, x, x + H), x, H, k, method)
        df = pd.DataFrame([{"x": x, "H": H, "k": k, "method": method, "value": res.value}])
        return self._output("gowers_interval", params, df,
                            f"‖{spec.label()}‖_U^{k + 1}[{x},{x + H}) = {res.value:.6g}")

    # ------------------------------------------------------------------
    def _box(self, params: dict, context: str) -> AgentOutput:
        """params: {"spec", "N", "boxes": [[...], ...]} or {"d", "box": [lo, hi]}"""
        spec = parse_spec(params.get("spec", "liouville"))
        N = int(params.get("N", 101))
        f = self.table(spec, 1, N).values
        if "boxes" in params:
            boxes = [list(b) for b in params["boxes"]]
        else:
            lo, hi = params.get("box", [1, N])
            boxes = [list(range(int(lo), int(hi) + 1))] * int(params.get("d", 2))
        value = box_norm(f, boxes)
        df = pd.DataFrame([{"N": N, "d": len(boxes), "value": value}])
        return self._output("box_norm", params, df, f"box norm of order {len(boxes)} on Z/{N}: {value:.6g}")

    # ------------------------------------------------------------------
    def _average(self, params: dict, context: str) -> AgentOutput:
        spec = parse_spec(params.get("spec", "liouville"))
        X = int(params.get("X", 10_000))
        H = parse_h_rule(params.get("H", 40), X)
        k = int(params.get("k", 1))
        samples, seed = int(params.get("samples", 100)), int(params.get("seed", 1))
        log_avg = bool(params.get("logarithmic", False))
        mean, stderr, _ = averaged_gowers(spec, X, H, k, samples, seed,
                                          method=params.get("method", "recursive"),
                                          logarithmic=log_avg, cache_dir=self._cache_dir,
                                          workers=params.get("workers"))
        df = pd.DataFrame([{"X": X, "H": H, "k": k, "samples": samples, "seed": seed,
                            "mean_norm": mean, "stderr": stderr}])
        return self._output("averaged_gowers", params, df,
                            f"mean ‖{spec.label()}‖_U^{k + 1} over {samples} strata at X={X}, H={H}: "
                            f"{mean:.6g} ± {stderr:.2g}")
