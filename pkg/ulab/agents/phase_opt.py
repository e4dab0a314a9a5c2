"""
Agent: Phase Optimiser
Weak Gowers norms u^{k+1} as a maximisation of |Σ f(n) e(-P(n))| over
polynomial phases, Weyl-style rationalisation of the optimal coefficients
and the Archimedean (T/2π) log t + γ fit of a local phase.

Exhaustive mode evaluates a full coefficient grid. The top coefficient α_k
is handled by one FFT per setting of the lower coefficients: placing
g(m) = f(x+m) e(-Σ_{j<k} α_j m^j) at position m^k of a length-M_k array and
transforming gives every α_k = i/M_k at once. Grid phases i·m^j/M_j are
reduced mod 1 in integer arithmetic.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from ulab.agents.base import AgentInput, AgentOutput, BaseAgent, parse_spec
from ulab.agents.norms import parse_h_rule
from ulab.agents.poly_algebra import (
    Interval,
    RationalPoly,
    _round_half_to_zero,
    format_poly,
    parse_poly,
    to_binomial_basis,
)
from ulab.core.errors import InvalidParameterError
from ulab.core.numerics import (
    TWO_PI,
    check_budget,
    mean_and_stderr,
    ordered_map,
    stratified_points,
    stratum_rng,
)
from ulab.core.tables import FunctionTable, MultSpec, ensure_table

logger = logging.getLogger(__name__)

DEFAULT_SIGMA = 0.05
SWEEPS = 3
FIT_SAMPLES = 1000
FIT_DENSE = 8001


@dataclass
class PhasePoint:
    """P(t) = Σ_j alphas[j] (t - t0)^j with alphas[j] in [0, 1)."""
    k: int
    t0: int
    alphas: np.ndarray

    def __post_init__(self):
        self.alphas = np.mod(np.asarray(self.alphas, dtype=float), 1.0)
        if len(self.alphas) != self.k + 1:
            raise InvalidParameterError(f"expected {self.k + 1} coefficients, got {len(self.alphas)}")


@dataclass
class WeakGowersResult:
    value: float
    argmax: PhasePoint
    guarantee: float
    mode: str = "exhaustive"
    evaluations: int = 0


@dataclass
class RationalApprox:
    q: int
    numerators: Tuple[int, ...]
    residuals: Tuple[float, ...]


@dataclass
class ArchimedeanFit:
    T: float
    gamma: RationalPoly
    eps_sup: float
    q: int
    interval: Optional[Interval] = None
    poly: Optional[RationalPoly] = None

    def remainder(self, t) -> np.ndarray:
        """P(t) - (T/2π) log t - γ(t)."""
        t = np.asarray(t, dtype=float)
        return _remainder(self.poly - self.gamma, self.T, self.interval, t)


# ---------------------------------------------------------------------------
# Correlation with a single phase
# ---------------------------------------------------------------------------

def _as_values(f: Union[FunctionTable, np.ndarray], x: int, H: int) -> np.ndarray:
    if isinstance(f, FunctionTable):
        return f.window(x, H).astype(np.complex128)
    values = np.asarray(f, dtype=np.complex128)
    if len(values) != H:
        raise InvalidParameterError(f"expected {H} values, got {len(values)}")
    return values


def _phase(alphas: Sequence[float], m: np.ndarray) -> np.ndarray:
    acc = np.zeros(len(m))
    for j in range(len(alphas) - 1, -1, -1):
        acc = np.mod(acc * m + alphas[j], 1.0)
    return acc


def correlation(values: np.ndarray, alphas: Sequence[float], offset: int = 0) -> float:
    """(1/H)|Σ_m f(m) e(-P(m + offset))| for f given on m = 0..H-1."""
    values = np.asarray(values, dtype=np.complex128)
    m = np.arange(len(values), dtype=float) + offset
    return float(abs(np.sum(values * np.exp(-2j * np.pi * _phase(alphas, m))))) / len(values)


# ---------------------------------------------------------------------------
# Exhaustive grid
# ---------------------------------------------------------------------------

def grid_sizes(H: int, k: int, sigma: float) -> List[int]:
    """M_j = ceil(H^j / σ) for j = 1..k, so the α_j step is at most σ/H^j."""
    return [int(math.ceil(H ** j / sigma - 1e-9)) for j in range(1, k + 1)]


def _grid_search(g: np.ndarray, sizes: List[int], workers: Optional[int],
                 cells: int = 1 << 22) -> Tuple[float, Tuple[int, ...]]:
    """Max of |Σ g(m) e(-Σ_j i_j m^j / M_j)| and its index tuple (i_1..i_k)."""
    H = len(g)
    k = len(sizes)
    m = np.arange(H, dtype=np.int64)
    Mk = sizes[-1]
    pos = (m ** k) % Mk
    powers = [(m ** j) for j in range(1, k)]
    outer_sizes = sizes[:-1]
    n_outer = int(np.prod(outer_sizes)) if outer_sizes else 1
    rows = max(1, cells // Mk)

    def chunk(lo: int) -> Tuple[float, Tuple[int, ...]]:
        hi = min(lo + rows, n_outer)
        flat = np.arange(lo, hi, dtype=np.int64)
        idx = []
        for size in reversed(outer_sizes):
            idx.append(flat % size)
            flat = flat // size
        idx = idx[::-1]
        phase = np.zeros((hi - lo, H))
        for j, (i_j, size) in enumerate(zip(idx, outer_sizes)):
            phase += ((i_j[:, None] * (powers[j][None, :] % size)) % size) / size
        block = np.zeros((hi - lo, Mk), dtype=np.complex128)
        block[:, pos] = g[None, :] * np.exp(-2j * np.pi * phase)
        mag = np.abs(np.fft.fft(block, axis=1))
        best_k = np.argmax(mag, axis=1)
        row_best = mag[np.arange(hi - lo), best_k]
        top = row_best.max()
        best = None
        for r in np.flatnonzero(row_best == top):
            key = (int(best_k[r]),) + tuple(int(i[r]) for i in reversed(idx))
            best = key if best is None or key < best else best
        return float(top), best

    results = ordered_map(chunk, range(0, n_outer, rows), workers)
    value, key = -1.0, None
    for v, kk in results:
        if v > value or (v == value and kk < key):
            value, key = v, kk
    # key is (i_k, i_{k-1}, ..., i_1)
    return value, tuple(reversed(key))


def _refine(values: np.ndarray, alphas: np.ndarray, steps: Sequence[float]) -> Tuple[np.ndarray, float]:
    """Coordinate descent on -|correlation|, golden section per coordinate, fixed sweeps."""
    alphas = alphas.copy()
    best = correlation(values, alphas)
    for _ in range(SWEEPS):
        for j in range(1, len(alphas)):
            def objective(a, j=j):
                trial = alphas.copy()
                trial[j] = a
                return -correlation(values, trial)
            a0, s = alphas[j], steps[j - 1]
            try:
                res = minimize_scalar(objective, bracket=(a0 - s, a0, a0 + s), method="golden")
            except ValueError:
                res = minimize_scalar(objective, bounds=(a0 - s, a0 + s), method="bounded")
            if -res.fun > best:
                best = -res.fun
                alphas[j] = res.x % 1.0
    return alphas, best


def _line_search(values: np.ndarray, alphas: np.ndarray, j: int, size: int) -> Tuple[float, float]:
    """Best α_j on the grid i/size with the other coefficients fixed."""
    H = len(values)
    m = np.arange(H, dtype=np.int64)
    others = alphas.copy()
    others[j] = 0.0
    g = values * np.exp(-2j * np.pi * _phase(others, m.astype(float)))
    block = np.zeros(size, dtype=np.complex128)
    np.add.at(block, (m ** j) % size, g)
    mag = np.abs(np.fft.fft(block))
    i = int(np.argmax(mag))
    return i / size, float(mag[i]) / H


def weak_gowers(f: Union[FunctionTable, np.ndarray], x: int, H: int, k: int,
                mode: str = "exhaustive", sigma: float = DEFAULT_SIGMA, restarts: int = 4,
                seed: int = 0, budget: Optional[float] = None,
                workers: Optional[int] = None) -> WeakGowersResult:
    """
    ‖f‖_{u^{k+1}[x, x+H)} = sup_P (1/H)|Σ f(n) e(-P(n))| over deg P <= k,
    with P expanded around t0 = x. α_0 does not change the modulus and stays 0.
    """
    if H < 1:
        raise InvalidParameterError(f"H must be >= 1, got {H}")
    if k < 0:
        raise InvalidParameterError(f"k must be >= 0, got {k}")
    if sigma <= 0:
        raise InvalidParameterError("sigma must be positive")
    values = _as_values(f, x, H)

    if k == 0 or not np.any(values):
        value = float(abs(values.sum())) / H
        return WeakGowersResult(value, PhasePoint(k, x, np.zeros(k + 1)), 0.0, mode, 1)

    sizes = grid_sizes(H, k, sigma)
    steps = [1.0 / s for s in sizes]

    if mode == "exhaustive":
        total = float(np.prod(sizes, dtype=float))
        check_budget(f"u^{k + 1} grid", total, budget)
        grid_value, index = _grid_search(values, sizes, workers)
        alphas = np.array([0.0] + [i / s for i, s in zip(index, sizes)])
        refined, value = _refine(values, alphas, steps)
        value = max(value, grid_value / H)
        guarantee = TWO_PI * (k + 1) * sigma
        return WeakGowersResult(value, PhasePoint(k, x, refined), guarantee, mode, int(total))

    if mode != "heuristic":
        raise InvalidParameterError(f"unknown mode '{mode}'. Options: exhaustive, heuristic")
    check_budget(f"u^{k + 1} heuristic search", float(restarts) * SWEEPS * sum(sizes), budget)
    best_value, best_alphas = -1.0, np.zeros(k + 1)
    for r in range(restarts):
        rng = stratum_rng(seed, r)
        alphas = np.concatenate([[0.0], rng.random(k)])
        for _ in range(SWEEPS):
            for j in range(1, k + 1):
                alphas[j], _ = _line_search(values, alphas, j, sizes[j - 1])
        alphas, value = _refine(values, alphas, steps)
        if value > best_value:
            best_value, best_alphas = value, alphas
    return WeakGowersResult(best_value, PhasePoint(k, x, best_alphas), math.inf, mode,
                            restarts * SWEEPS * sum(sizes))


def averaged_weak_gowers(spec: MultSpec, X: int, H: int, k: int, samples: int, seed: int,
                         sigma: float = DEFAULT_SIGMA, mode: str = "exhaustive",
                         table: Optional[FunctionTable] = None, cache_dir=None,
                         workers: Optional[int] = None, budget: Optional[float] = None) -> tuple:
    """Mean of u^{k+1}[x, x+H) over one seeded x per stratum of [X, 2X)."""
    if samples < 1:
        raise InvalidParameterError("samples must be >= 1")
    points = stratified_points(X, samples, seed)
    if table is None:
        table = ensure_table(spec, X, 2 * X + H, cache_dir)
    results = ordered_map(lambda x: weak_gowers(table, x, H, k, mode, sigma, seed=seed, budget=budget,
                                                workers=1).value, points, workers)
    mean, stderr = mean_and_stderr(results)
    return mean, stderr, results


# ---------------------------------------------------------------------------
# Weyl rationalisation
# ---------------------------------------------------------------------------

def _dist_to_int(v: float) -> float:
    return abs(v - round(v))


def weyl_rationalize(pt: PhasePoint, H: int, Q: int,
                     tolerances: Union[float, Sequence[float]] = 1.0) -> Optional[RationalApprox]:
    """First q in 1..Q with ‖q α_j‖ <= c_j H^{-j} for every j >= 1."""
    if Q < 1:
        raise InvalidParameterError(f"Q must be >= 1, got {Q}")
    k = pt.k
    cs = [float(tolerances)] * k if np.isscalar(tolerances) else [float(c) for c in tolerances]
    if len(cs) != k:
        raise InvalidParameterError(f"expected {k} tolerances, got {len(cs)}")
    bounds = [c * float(H) ** -(j + 1) for j, c in enumerate(cs)]
    for q in range(1, Q + 1):
        residuals = [_dist_to_int(q * pt.alphas[j]) for j in range(1, k + 1)]
        if all(r <= b + 1e-15 for r, b in zip(residuals, bounds)):
            numerators = tuple(int(round(q * a)) for a in pt.alphas)
            return RationalApprox(q, numerators, tuple(residuals))
    return None


# ---------------------------------------------------------------------------
# Archimedean fit
# ---------------------------------------------------------------------------

def log_taylor(x0: Fraction, k: int) -> RationalPoly:
    """Degree-k Taylor polynomial of log t at x0 (log x0 rounded to a fraction)."""
    u = RationalPoly((-x0, Fraction(1)), 1) * (1 / x0)
    out = RationalPoly.constant(Fraction(math.log(x0)), k)
    power = RationalPoly.constant(1)
    for j in range(1, k + 1):
        power = power * u
        out = out + power * Fraction((-1) ** (j - 1), j)
    return out.with_bound(k)


def _remainder(R: RationalPoly, T: float, I: Interval, t: np.ndarray) -> np.ndarray:
    """R(t) - (T/2π) log t with R evaluated around the interval midpoint."""
    x0 = I.mid
    shifted = R.compose_affine(1, x0)
    s = t - float(x0)
    poly_part = np.polyval([float(c) for c in reversed(shifted.coeffs)], s)
    return poly_part - T / TWO_PI * np.log(t)


def _fit_sup(R: RationalPoly, T: float, I: Interval) -> float:
    lo, hi = float(I.lo), float(I.hi)
    coarse = np.linspace(lo, hi, FIT_SAMPLES)
    dense = np.linspace(lo, hi, FIT_DENSE)
    vals = np.abs(_remainder(R, T, I, np.concatenate([coarse, dense])))
    best = float(vals.max())
    i = int(np.argmax(np.abs(_remainder(R, T, I, dense))))
    step = (hi - lo) / (FIT_DENSE - 1)
    a, b = max(lo, dense[i] - step), min(hi, dense[i] + step)
    if b > a:
        res = minimize_scalar(lambda t: -abs(float(_remainder(R, T, I, np.array([t]))[0])),
                              bounds=(a, b), method="bounded")
        best = max(best, -float(res.fun))
    return best


def archimedean_fit(P: RationalPoly, I: Interval, q_max: int) -> ArchimedeanFit:
    """
    Fit P = ε + (T/2π) log t + γ on I with γ having binomial coefficients in
    (1/q)ℤ around the integer nearest x_I. For each q <= q_max the k-th
    derivative is split as a/q + (T/2π)(log)^{(k)}(x_I) with a = round(q P^{(k)});
    the q with the smallest sup|ε| wins (smallest q on ties).
    """
    if I.lo <= 0:
        raise InvalidParameterError("interval must lie in (0, ∞)")
    k = P.degree
    if k < 1:
        raise InvalidParameterError("archimedean_fit needs deg P >= 1")
    if q_max < 1:
        raise InvalidParameterError("q_max must be >= 1")
    x0 = I.mid
    t0 = Fraction(math.floor(x0 + Fraction(1, 2)))
    top = P.derivative(k).coeffs[0]
    log_k = Fraction((-1) ** (k - 1) * math.factorial(k - 1)) / x0 ** k
    L = log_taylor(x0, k)

    best: Optional[ArchimedeanFit] = None
    for q in range(1, q_max + 1):
        a = _round_half_to_zero(top * q)
        T = float((top - Fraction(a, q)) / log_k) * TWO_PI
        R = (P - L * Fraction(T / TWO_PI)).with_bound(k)
        cs = to_binomial_basis(R, 1, t0)
        gamma = RationalPoly.from_binomial([Fraction(_round_half_to_zero(c * q), q) for c in cs], 1, t0)
        gamma = gamma.with_bound(k)
        sup = _fit_sup(P - gamma, T, I)
        if best is None or sup < best.eps_sup:
            best = ArchimedeanFit(T, gamma, sup, q, I, P)
    logger.debug("archimedean fit: T=%.6g q=%d eps=%.3g", best.T, best.q, best.eps_sup)
    return best


class PhaseOptAgent(BaseAgent):
    name = "PhaseOpt"
    description = (
        "Weak Gowers norms by exhaustive or heuristic phase search, Weyl "
        "rationalisation of optimal coefficients and Archimedean log fits."
    )

    def run(self, agent_input: AgentInput) -> AgentOutput:
        return self._dispatch(agent_input, {
            "weak_gowers": self._weak_gowers,
            "average": self._average,
            "averaged_weak_gowers": self._average,
            "rationalize": self._rationalize,
            "weyl_rationalize": self._rationalize,
            "archimedean_fit": self._fit,
            "fit": self._fit,
        })

    # ------------------------------------------------------------------
    def _weak_gowers(self, params: dict, context: str) -> AgentOutput:
        spec = parse_spec(params.get("spec", "liouville"))
        x, H, k = int(params.get("x", 10_000)), int(params.get("H", 64)), int(params.get("k", 1))
        mode = params.get("mode", "exhaustive")
        sigma = float(params.get("sigma", DEFAULT_SIGMA))
        res = weak_gowers(self.table(spec, x, x + H), x, H, k, mode, sigma,
                          restarts=int(params.get("restarts", 4)), seed=int(params.get("seed", 0)),
                          workers=params.get("workers"))
        row = {"x": x, "H": H, "k": k, "mode": mode, "sigma": sigma, "value": res.value,
               "guarantee": res.guarantee}
        row.update({f"alpha_{j}": float(res.argmax.alphas[j]) for j in range(1, k + 1)})
        return self._output("weak_gowers", params, pd.DataFrame([row]),
                            f"u^{k + 1}[{x},{x + H}) of {spec.label()} = {res.value:.6g} "
                            f"(gap {res.guarantee:.3g})")

    # ------------------------------------------------------------------
    def _average(self, params: dict, context: str) -> AgentOutput:
        spec = parse_spec(params.get("spec", "liouville"))
        X = int(params.get("X", 10_000))
        H = parse_h_rule(params.get("H", 48), X)
        k = int(params.get("k", 2))
        samples, seed = int(params.get("samples", 50)), int(params.get("seed", 1))
        sigma = float(params.get("sigma", DEFAULT_SIGMA))
        mean, stderr, _ = averaged_weak_gowers(spec, X, H, k, samples, seed, sigma,
                                               params.get("mode", "exhaustive"), cache_dir=self._cache_dir,
                                               workers=params.get("workers"))
        df = pd.DataFrame([{"X": X, "H": H, "k": k, "samples": samples, "seed": seed, "sigma": sigma,
                            "mean_norm": mean, "stderr": stderr}])
        return self._output("averaged_weak_gowers", params, df,
                            f"mean u^{k + 1} of {spec.label()} at X={X}, H={H}: {mean:.6g} ± {stderr:.2g}")

    # ------------------------------------------------------------------
    def _rationalize(self, params: dict, context: str) -> AgentOutput:
        alphas = [0.0] + [float(a) for a in params["alphas"]]
        pt = PhasePoint(len(alphas) - 1, int(params.get("t0", 0)), alphas)
        H, Q = int(params.get("H", 100)), int(params.get("Q", 10))
        approx = weyl_rationalize(pt, H, Q, params.get("c", 1.0))
        if approx is None:
            df = pd.DataFrame([{"H": H, "Q": Q, "q": None}])
            return self._output("weyl_rationalize", params, df, f"no q <= {Q} qualifies")
        row = {"H": H, "Q": Q, "q": approx.q}
        row.update({f"a_{j}": a for j, a in enumerate(approx.numerators)})
        row.update({f"r_{j + 1}": r for j, r in enumerate(approx.residuals)})
        return self._output("weyl_rationalize", params, pd.DataFrame([row]), f"q = {approx.q}")

    # ------------------------------------------------------------------
    def _fit(self, params: dict, context: str) -> AgentOutput:
        P = parse_poly(params["poly"])
        lo, hi = (Fraction(str(v)) for v in params["I"])
        fit = archimedean_fit(P, Interval.from_endpoints(lo, hi), int(params.get("q_max", 10)))
        df = pd.DataFrame([{"T": fit.T, "q": fit.q, "gamma": format_poly(fit.gamma), "eps_sup": fit.eps_sup}])
        return self._output("archimedean_fit", params, df,
                            f"T = {fit.T:.6g}, gamma = {format_poly(fit.gamma)}, sup|eps| = {fit.eps_sup:.3g}")
