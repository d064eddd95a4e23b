"""Mechanical checks of the standing assumptions for a :class:`ModelSpec`.

Every checker returns a :class:`Verdict`.  ``margin`` is positive when the
check passes and measures the distance to failure in the check's own scale
(usually an exponent gap of a comparison series or integral).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, is_dataclass
from typing import Any

import numpy as np
from scipy import integrate, optimize, special

from .model import DriftPolynomial, ModelSpec

__all__ = [
    "Verdict",
    "DissipativityConstants",
    "CheckParams",
    "ReportEntry",
    "check_hs_integrability",
    "check_drift_dissipativity",
    "dissipativity_excess",
    "check_series_e6",
    "check_smoothing_e9",
    "check_powerlaw_window",
    "check_irreducibility",
    "check_all",
]

# successive refinements agreeing to this are "finite"
CONVERGED_RTOL = 1e-6
# growth beyond this factor under refinement is "divergent"
DIVERGED_GROWTH = 0.10


@dataclass(frozen=True)
class Verdict:
    passed: bool
    margin: float
    witness: Any = None
    counterexample: Any = None
    note: str = ""

    def __post_init__(self):
        if self.passed and self.counterexample is not None:
            raise ValueError("a passing verdict cannot carry a counterexample")
        if not self.passed and self.counterexample is None and self.margin > 0:
            raise ValueError("a failing verdict needs a counterexample or margin <= 0")

    def to_dict(self) -> dict:
        w = self.witness
        if is_dataclass(w):
            w = asdict(w)
        return {
            "passed": bool(self.passed),
            "margin": float(self.margin),
            "witness": w,
            "counterexample": self.counterexample,
            "note": self.note,
        }


@dataclass(frozen=True)
class DissipativityConstants:
    """Constants of ``f(a+b) sgn a <= -c1 |a|^(1+eps) + c2 |b|^s + c3``."""

    c1: float
    c2: float
    c3: float
    epsilon: float
    s: float

    def __post_init__(self):
        if not (self.c1 > 0 and self.epsilon > 0):
            raise ValueError("dissipativity needs c1 > 0 and epsilon > 0")
        if self.c2 < 0 or self.c3 < 0 or self.s <= 0:
            raise ValueError("c2, c3 must be nonnegative and s positive")


# ----------------------------------------------------------------------------
# Hilbert-Schmidt integrability of the stochastic convolution


def _tail_exponent_sum(p: float, first: int) -> float:
    """sum_{n >= first} n**(-p), infinite for p <= 1."""
    return float(special.zeta(p, first)) if p > 1 else math.inf


def check_hs_integrability(spec: ModelSpec, alpha_exp: float, T: float = 1.0) -> Verdict:
    """Finiteness of ``int_0^T t^(-alpha) ||S(t) Q^(1/2)||_HS^2 dt``.

    Uses ``||S(t)Q^(1/2)||_HS^2 = sum lambda_n exp(-2 alpha_n t)``; each mode is
    integrated in closed form (lower incomplete gamma) and the tail beyond N is
    bounded by the complete-gamma envelope summed with a Hurwitz zeta.
    """
    if not 0 < alpha_exp < 1:
        raise ValueError(f"alpha_exp must lie in (0, 1), got {alpha_exp}")
    if not T > 0:
        raise ValueError("T must be positive")
    alphas, lams = spec.alphas, spec.lambdas
    g = special.gamma(1 - alpha_exp)
    per_mode_env = lams * g * (2 * alphas) ** (alpha_exp - 1)
    per_mode = per_mode_env * special.gammainc(1 - alpha_exp, 2 * alphas * T)

    a_tail = spec.covariance.decay_exponent(alphas)
    if a_tail is None:
        p = math.inf
        tail = 0.0
    else:
        c = spec.covariance.tail_scale(alphas)
        p = 2 * (a_tail + 1 - alpha_exp)
        k = np.pi / spec.length
        tail = (
            c * g * 2 ** (alpha_exp - 1) * k ** (2 * (alpha_exp - 1 - a_tail))
            * _tail_exponent_sum(p, spec.n_modes + 1)
        )
    value = float(per_mode.sum() + tail)
    envelope = float(per_mode_env.sum() + tail)
    margin = p - 1
    witness = {"integral": value, "envelope": envelope, "series_exponent": p}
    if math.isfinite(envelope) and p > 1:
        return Verdict(True, margin, witness)
    return Verdict(
        False, margin, None,
        counterexample={"series_exponent": p, "divergent": "sum n^(-p) with p <= 1"},
    )


# ----------------------------------------------------------------------------
# Dissipativity of the scalar drift


def _tail_minimum(p: int, ratio: float) -> float:
    """min over real t of (1 - t)**p + ratio * |t|**p."""
    h = lambda t: (1 - t) ** p + ratio * abs(t) ** p
    res = optimize.minimize_scalar(h, bounds=(-2.0, 2.0), method="bounded",
                                   options={"xatol": 1e-12})
    return float(min(res.fun, h(0.0)))


def dissipativity_excess(drift: DriftPolynomial, alpha, beta, c1, c2, epsilon, s):
    """``f(a+b) sgn a + c1 |a|^(1+eps) - c2 |b|^s``; the inequality needs this <= c3.

    ``alpha = 0`` is evaluated on the ``sgn = +1`` branch; callers covering the
    left half-plane in :func:`_grid_max` evaluate that branch separately.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    sg = np.where(alpha < 0, -1.0, 1.0)
    return (drift(alpha + beta) * sg + c1 * np.abs(alpha) ** (1 + epsilon)
            - c2 * np.abs(beta) ** s)


def _grid_max(drift, c1, c2, epsilon, s, box, steps):
    """Max of the excess over [-box, box]^2, both sign branches at alpha = 0."""
    axis = np.linspace(-box, box, steps)
    best, arg = -math.inf, (0.0, 0.0)
    for sign in (1.0, -1.0):
        alphas = axis[axis >= 0] if sign > 0 else axis[axis <= 0]
        for chunk in np.array_split(alphas, max(1, alphas.size // 256)):
            A, B = np.meshgrid(chunk, axis, indexing="ij")
            vals = (drift(A + B) * sign + c1 * np.abs(A) ** (1 + epsilon)
                    - c2 * np.abs(B) ** s)
            k = int(np.argmax(vals))
            if vals.flat[k] > best:
                best, arg = float(vals.flat[k]), (float(A.flat[k]), float(B.flat[k]), sign)
    return best, arg


def _refine_max(drift, c1, c2, epsilon, s, box, start):
    a0, b0, sign = start
    lo, hi = (0.0, box) if sign > 0 else (-box, 0.0)

    def neg(x):
        return -(drift(x[0] + x[1]) * sign + c1 * abs(x[0]) ** (1 + epsilon)
                 - c2 * abs(x[1]) ** s)

    res = optimize.minimize(neg, [a0, b0], method="L-BFGS-B",
                            bounds=[(lo, hi), (-box, box)])
    return float(-res.fun)


def _find_violation(drift, c1, c2, c3, epsilon, s, box, steps):
    """A point where the excess exceeds c3: grid first, then along rays."""
    best, arg = _grid_max(drift, c1, c2, epsilon, s, box, steps)
    if best > c3:
        return {"alpha": arg[0], "beta": arg[1]}
    h = 2 * box / (steps - 1)
    rays = [lambda r: (r, 0.0), lambda r: (-r, 0.0), lambda r: (h, -r), lambda r: (-h, r)]
    r = box
    while r < 1e15:
        for ray in rays:
            a, b = ray(r)
            if dissipativity_excess(drift, a, b, c1, c2, epsilon, s) > c3:
                return {"alpha": a, "beta": b}
        r *= 2
    return {"alpha": math.inf, "beta": 0.0}


def check_drift_dissipativity(
    drift: DriftPolynomial,
    epsilon: float,
    s: float,
    box: float = 10.0,
    grid_steps: int = 2001,
    c2_ratio: float = 4.0,
) -> Verdict:
    """Search constants for ``f(a+b) sgn a <= -c1|a|^(1+eps) + c2|b|^s + c3``.

    Tail certificate: with ``p = deg f`` and leading coefficient ``-A``, the
    inequality holds along every ray at infinity iff ``1+eps <= p <= s`` and
    ``c1 < A * min_t [(1-t)^p + (c2/A) |t|^p]``.  We take ``c2 = c2_ratio * A``,
    ``c1 = 0.9 * A * min_t(...)`` and ``c3`` as the (locally refined) maximum of
    the excess over the box.  ``margin`` is the slack left in the tail inequality.
    """
    if not (epsilon > 0 and s > 0 and box > 0 and grid_steps >= 3):
        raise ValueError("need epsilon > 0, s > 0, box > 0, grid_steps >= 3")
    p = drift.degree
    lead = drift.leading
    A = abs(lead) if lead != 0 else 1.0
    ratio = c2_ratio if c2_ratio > 1 else 4.0
    m = _tail_minimum(max(p, 1), ratio) if p % 2 == 1 else 1.0
    c1 = 0.9 * A * max(m, 1e-3)
    c2 = ratio * A

    if drift.is_zero or p % 2 == 0 or lead > 0:
        reason = "even degree" if (p % 2 == 0 and not drift.is_zero) else "no restoring force at infinity"
        margin = -abs(lead) if not drift.is_zero else 0.0
    elif 1 + epsilon > p:
        reason = f"growth of degree {p} is slower than |alpha|^{1 + epsilon}"
        margin = p - (1 + epsilon)
    elif s < p:
        reason = f"|beta|^{s} cannot dominate degree-{p} growth in beta"
        margin = s - p
    else:
        reason = ""
        margin = A * m - c1

    if reason:
        # constants fitted on the inner half box; the violation shows up outside it
        half_steps = max(3, grid_steps // 2 | 1)
        c3_try = max(0.0, _grid_max(drift, c1, c2, epsilon, s, box / 2, half_steps)[0])
        pt = _find_violation(drift, c1, c2, c3_try, epsilon, s, box, grid_steps)
        pt["constants"] = [c1, c2, c3_try]
        pt["reason"] = reason
        return Verdict(False, float(min(margin, 0.0)), None, counterexample=pt, note=reason)

    best, arg = _grid_max(drift, c1, c2, epsilon, s, box, grid_steps)
    refined = _refine_max(drift, c1, c2, epsilon, s, box, arg)
    c3 = max(0.0, best, refined)
    c3 = c3 + 1e-12 * max(1.0, c3)
    consts = DissipativityConstants(c1=c1, c2=c2, c3=c3, epsilon=epsilon, s=s)
    return Verdict(True, float(margin), consts,
                   note=f"tail minimum {m:.6g} at c2/A={ratio:g}; grid box {box:g}")


# ----------------------------------------------------------------------------
# Series condition on the covariance spectrum


def check_series_e6(spec: ModelSpec, gamma_series: float, d: int = 1) -> Verdict:
    """Convergence of ``sum lambda_n / alpha_n^(1-gamma)``.

    With ``lambda_n <= K alpha_n^(-b)`` and Weyl growth ``alpha_n ~ n^(2/d)`` the
    series converges iff ``2 (b + 1 - gamma) / d > 1``.
    """
    if not 0 < gamma_series < 1:
        raise ValueError(f"gamma_series must lie in (0, 1), got {gamma_series}")
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2 or 3")
    alphas, lams = spec.alphas, spec.lambdas
    partial = float(np.sum(lams / alphas ** (1 - gamma_series)))
    b = spec.covariance.upper_exponent(alphas)
    if b is None:
        return Verdict(True, math.inf, {"partial_sum": partial, "exponent": math.inf},
                       note="finite-rank covariance")
    expo = 2 * (b + 1 - gamma_series) / d
    margin = expo - 1
    witness = {"partial_sum": partial, "exponent": expo, "b": b}
    if expo > 1:
        if d == 1:
            k = np.pi / spec.length
            c = spec.covariance.tail_scale(alphas)
            witness["sum_estimate"] = partial + c * k ** (-2 * (b + 1 - gamma_series)) * \
                _tail_exponent_sum(expo, spec.n_modes + 1)
        return Verdict(True, margin, witness)
    return Verdict(False, margin, None,
                   counterexample={"exponent": expo, "needs": "2(b+1-gamma)/d > 1"})


# ----------------------------------------------------------------------------
# Strong Feller smoothing condition


def _peak_ratio(q: float) -> tuple[float, float]:
    """(y*, S) with S = sup_{y>0} y^q (e^{2y}-1)^(-1/2) attained at y*.

    For q <= 1/2 the function is decreasing; the sup is the y -> 0 limit.
    """
    if q <= 0.5:
        return 0.0, (math.sqrt(0.5) if q == 0.5 else math.inf)
    # stationarity: q / y = e^{2y} / (e^{2y} - 1)
    fn = lambda y: q / y - 1.0 / (-math.expm1(-2 * y))
    y = optimize.brentq(fn, 1e-12, 50.0)
    return y, y**q / math.sqrt(math.expm1(2 * y))


class _SmoothingIntegrand:
    """t -> sup_n sqrt(2 alpha_n / lambda_n) (e^{2 alpha_n t} - 1)^(-1/2)."""

    def __init__(self, spec: ModelSpec, with_tail: bool):
        self.w = np.sqrt(2 * spec.alphas / spec.lambdas)
        self.alphas = spec.alphas
        self.lam_min = float(np.min(spec.lambdas))
        a = spec.covariance.decay_exponent(spec.alphas) if with_tail else None
        self.tail = a is not None
        if self.tail:
            self.q = (1 + a) / 2
            self.c = spec.covariance.tail_scale(spec.alphas)
            self.x0 = float(((spec.n_modes + 1) * np.pi / spec.length) ** 2)
            self.ystar, self.S = _peak_ratio(self.q)
        else:
            self.q = 0.5

    def modes(self, t: float) -> float:
        with np.errstate(over="ignore"):
            return float(np.max(self.w / np.sqrt(np.expm1(2 * self.alphas * t))))

    def tail_value(self, t: float) -> float:
        # sup over x >= x0 of sqrt(2 x^(1+a) / c) (e^{2xt} - 1)^(-1/2)
        x = max(self.x0, self.ystar / t)
        z = 2 * x * t
        # x^q / sqrt(e^z - 1) in log form; e^z overflows for large t
        log_v = self.q * math.log(x) - 0.5 * (z + math.log(-math.expm1(-z)))
        return math.sqrt(2.0 / self.c) * math.exp(log_v)

    def __call__(self, t: float) -> float:
        v = self.modes(t)
        if self.tail:
            v = max(v, self.tail_value(t))
        return v

    def head_bound(self, tau: float) -> float:
        """Upper bound of the integral over (0, tau)."""
        lam_term = 2.0 * math.sqrt(tau / self.lam_min)
        if not self.tail:
            return lam_term
        if self.q >= 1:
            return math.inf
        K = math.sqrt(2.0 / self.c) * self.S
        return K * tau ** (1 - self.q) / (1 - self.q) + lam_term


def _log_quad(func, lo: float, hi: float, panels: int) -> float:
    edges = np.linspace(math.log(lo), math.log(hi), panels + 1)
    total = 0.0
    with warnings.catch_warnings():
        # roundoff warnings near 1e-10 relative are harmless at our 1e-6 target
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(lambda u: func(math.exp(u)) * math.exp(u), a, b,
                                    limit=200, epsabs=0.0, epsrel=1e-10)
            total += val
    return total


def check_smoothing_e9(spec: ModelSpec, T: float = 1.0, quad_points: int = 16,
                       with_tail: bool = True) -> Verdict:
    """Integrability on (0, T) of ``||Q_t^(-1/2) S(t)||`` in the diagonal case.

    The per-t supremum runs over modes 1..N and, for the tail, over the
    continuous power-law relaxation ``lambda(x) = c x^(-a)`` for x beyond
    alpha_N.  Near t = 0 the tail behaves like ``t^(-(1+a)/2)``, integrable iff
    a < 1.  The integral over (tau, T) is computed by adaptive quadrature in
    log t on ``quad_points`` panels; the head (0, tau) is bounded analytically.
    Refinement shrinks tau and doubles the panel count until two estimates agree
    to 1e-6 relative.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if np.any(spec.lambdas <= 0):
        raise ValueError("covariance must be strictly positive")
    g = _SmoothingIntegrand(spec, with_tail)
    q = g.q
    margin = 1 - q
    history = []
    tau, panels = min(1e-8, T / 10), max(2, int(quad_points))
    prev = None
    for _ in range(60):
        body = _log_quad(g, tau, T, panels)
        est = body + g.head_bound(tau)
        history.append((tau, body, est))
        if prev is not None:
            if math.isfinite(est) and abs(est - prev) <= CONVERGED_RTOL * abs(est):
                return Verdict(True, margin,
                               {"integral": est, "body": body, "tau": tau,
                                "singularity_exponent": q})
            if not math.isfinite(est) and prev_body > 0 and body > (1 + DIVERGED_GROWTH) * prev_body:
                break
        prev, prev_body = est, body
        tau *= 1e-2
        panels = panels + max(2, int(quad_points))
        if tau < 1e-250:
            break
    last_tau, last_body, last_est = history[-1]
    return Verdict(
        False, min(margin, 0.0) if not math.isfinite(last_est) else margin,
        None,
        counterexample={"singularity_exponent": q, "tau": last_tau,
                        "partial_integral": last_body,
                        "growth": [h[1] for h in history[-3:]]},
        note="integrand not integrable at t = 0" if q >= 1 else "refinement did not settle",
    )


# ----------------------------------------------------------------------------
# Power-law window and irreducibility


def check_powerlaw_window(d: int, a: float, b: float) -> Verdict:
    """``d/2 - 1 < b <= a < 1`` for ``K1 n^(-2a/d) <= lambda_n <= K2 n^(-2b/d)``."""
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2 or 3")
    if b > a:
        raise ValueError(f"malformed power law: b={b} > a={a}")
    if b < 0:
        raise ValueError("b must be >= 0")
    lower = d / 2 - 1
    margin = min(b - lower, 1 - a)
    if margin > 0:
        return Verdict(True, margin, {"b_minus_lower": b - lower, "one_minus_a": 1 - a})
    return Verdict(False, margin, None, counterexample={"d": d, "a": a, "b": b})


def check_irreducibility(d: int) -> Verdict:
    """``||S(t)||_{L(H,E)} <= C t^(-d/4)`` is integrable near 0 iff d < 4."""
    margin = 1 - d / 4
    if margin > 0:
        return Verdict(True, margin, {"green_exponent": d / 4})
    return Verdict(False, margin, None, counterexample={"d": d})


# ----------------------------------------------------------------------------
# Aggregate


@dataclass(frozen=True)
class CheckParams:
    epsilon: float = 2.0
    s: float = 3.0
    alpha_exp: float = 0.25
    T: float = 1.0
    gamma_series: float = 0.25
    d: int = 1
    box: float = 10.0
    grid_steps: int = 2001
    quad_points: int = 16


@dataclass
class ReportEntry:
    key: str
    hypothesis: str
    checker: str
    verdict: Verdict | None = None
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.verdict is not None and self.verdict.passed

    def to_dict(self) -> dict:
        out = {"hypothesis": self.hypothesis, "checker": self.checker}
        if self.verdict is not None:
            out.update(self.verdict.to_dict())
        else:
            out.update({"passed": False, "margin": None, "witness": None, "error": self.error})
        return out


def check_all(spec: ModelSpec, params: CheckParams | None = None) -> list[ReportEntry]:
    """Run every checker; errors become failed entries."""
    params = params or CheckParams()
    plan = [
        ("hs_integrability", "HS integrability of S(t)Q^1/2", "check_hs_integrability",
         lambda: check_hs_integrability(spec, params.alpha_exp, params.T)),
        ("z_regularity", "bounded sup-norm moments of Z", "check_series_e6",
         lambda: check_series_e6(spec, params.gamma_series, params.d)),
        ("dissipativity", "superlinear dissipativity", "check_drift_dissipativity",
         lambda: check_drift_dissipativity(spec.drift, params.epsilon, params.s,
                                           params.box, params.grid_steps)),
        ("strong_feller", "strong Feller", "check_smoothing_e9",
         lambda: check_smoothing_e9(spec, params.T, params.quad_points)),
        ("irreducibility", "topological irreducibility", "check_irreducibility",
         lambda: check_irreducibility(params.d)),
    ]
    cov = spec.covariance
    if cov.kind in ("identity", "power_law"):
        a = cov.exponent if cov.kind == "power_law" else 0.0
        b = cov.exponent_b if (cov.kind == "power_law" and cov.exponent_b is not None) else a
        plan.append(("powerlaw_window", "power-law window", "check_powerlaw_window",
                     lambda: check_powerlaw_window(params.d, a, b)))
    report = []
    for key, hyp, checker, run in plan:
        entry = ReportEntry(key, hyp, checker)
        try:
            entry.verdict = run()
        except (ValueError, ArithmeticError) as exc:
            entry.error = f"{type(exc).__name__}: {exc}"
        report.append(entry)
    return report
