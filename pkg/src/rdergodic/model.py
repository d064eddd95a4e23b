"""Spectral Galerkin discretization of the 1D reaction-diffusion problem.

The state lives in the Dirichlet eigenbasis of the Laplacian on ``(0, L)``::

    e_n(xi) = sqrt(2/L) * sin(n * pi * xi / L),    alpha_n = (n * pi / L)**2

and the nonlinearity acts pointwise on an interior collocation grid
``xi_j = j L / (M + 1)``, ``j = 1..M``.  On this grid the sine basis is
discretely orthonormal under the weight ``h = L / (M + 1)``, so analysis is an
exact inverse of synthesis for every field with at most ``M`` modes.

All functions accept either a :class:`SpectralField` or a plain array whose
last axis holds the ``N`` coefficients; batched arrays are the common case in
the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "DriftPolynomial",
    "CovarianceSpec",
    "ModelSpec",
    "SpectralField",
    "Norms",
    "dirichlet_eigenvalue",
    "to_physical",
    "to_spectral",
    "apply_drift",
    "norms",
    "sup_norm",
    "sobolev_norm",
    "sup_sobolev_constant",
    "constant_projection",
]


def dirichlet_eigenvalue(n, length: float):
    """Return ``(n pi / L)**2``, the n-th eigenvalue of ``-d^2/dx^2`` on (0, L).

    Works elementwise on integer arrays.
    """
    if length <= 0:
        raise ValueError(f"domain length must be positive, got {length}")
    n_arr = np.asarray(n)
    if np.any(n_arr < 1) or not np.all(np.equal(np.mod(n_arr, 1), 0)):
        raise ValueError(f"mode index must be an integer >= 1, got {n}")
    out = (n_arr * np.pi / length) ** 2
    return float(out) if out.ndim == 0 else out.astype(float)


@dataclass(frozen=True)
class DriftPolynomial:
    """Polynomial reaction term ``f(u) = sum_k c_k u**k`` (constant term first).

    Any real polynomial is accepted so that linear and non-dissipative drifts can
    be simulated and rejected by the hypothesis checkers; :attr:`is_dissipative`
    reports whether it has the odd-degree, negative-leading shape.
    """

    coefficients: tuple[float, ...] = (0.0, 0.0, 0.0, -1.0)

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            coeffs = (0.0,)
        if not all(np.isfinite(coeffs)):
            raise ValueError("drift coefficients must be finite")
        # canonical form: strip trailing zeros
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs = coeffs[:-1]
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def cubic(cls, a: float = 1.0) -> DriftPolynomial:
        """``f(u) = -a u**3``."""
        return cls((0.0, 0.0, 0.0, -float(a)))

    @classmethod
    def zero(cls) -> DriftPolynomial:
        return cls((0.0,))

    @property
    def degree(self) -> int:
        if len(self.coefficients) == 1 and self.coefficients[0] == 0.0:
            return 0
        return len(self.coefficients) - 1

    @property
    def leading(self) -> float:
        return self.coefficients[-1]

    @property
    def constant(self) -> float:
        return self.coefficients[0]

    @property
    def linear(self) -> float:
        return self.coefficients[1] if len(self.coefficients) > 1 else 0.0

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.coefficients)

    @property
    def is_dissipative(self) -> bool:
        """Odd degree > 1 with strictly negative leading coefficient."""
        d = self.degree
        return d > 1 and d % 2 == 1 and self.leading < 0

    @cached_property
    def nonlinear(self) -> np.ndarray:
        """Coefficients of the part of degree >= 2 (as a full-length array)."""
        c = np.array(self.coefficients, dtype=float)
        c[:2] = 0.0
        return c

    @property
    def has_nonlinear(self) -> bool:
        return bool(np.any(self.nonlinear != 0.0))

    def __call__(self, u):
        return P.polyval(u, self.coefficients)

    def derivative(self, u):
        return P.polyval(u, P.polyder(self.coefficients))


@dataclass(frozen=True)
class CovarianceSpec:
    """Diagonal covariance ``Q e_n = lambda_n e_n``.

    kind
        ``"identity"`` (lambda_n = 1), ``"power_law"`` (lambda_n =
        scale * alpha_n**(-exponent)) or ``"explicit"`` (given values).
    exponent_b
        Optional upper-envelope exponent ``b <= exponent`` used only by the
        power-law window checks (``lambda_n <= K alpha_n**(-b)``).
    tail_exponent
        For explicit spectra: decay exponent of lambda_n relative to alpha_n
        beyond the listed modes.  ``None`` lets the checkers estimate it from the
        upper half of the list (needs at least 4 values); with fewer values the
        explicit spectrum is treated as finite rank.
    """

    kind: str = "identity"
    scale: float = 1.0
    exponent: float = 0.0
    exponent_b: float | None = None
    values: tuple[float, ...] = ()
    tail_exponent: float | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "power_law", "explicit"):
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.kind == "power_law":
            if not self.scale > 0:
                raise ValueError("power_law scale must be positive")
            if self.exponent < 0:
                raise ValueError("power_law exponent must be >= 0")
            if self.exponent_b is not None and not (0 <= self.exponent_b <= self.exponent):
                raise ValueError(
                    "power_law requires 0 <= b <= a (check_powerlaw_window precondition), "
                    f"got a={self.exponent}, b={self.exponent_b}"
                )
        if self.kind == "explicit":
            if not self.values:
                raise ValueError("explicit covariance needs values")
            if any(not (v > 0 and np.isfinite(v)) for v in self.values):
                raise ValueError("covariance eigenvalues must be positive (Q > 0)")

    @classmethod
    def identity(cls) -> CovarianceSpec:
        return cls("identity")

    @classmethod
    def power_law(cls, scale: float, exponent: float, exponent_b: float | None = None):
        return cls("power_law", scale=scale, exponent=exponent, exponent_b=exponent_b)

    @classmethod
    def explicit(cls, values: Sequence[float], tail_exponent: float | None = None):
        return cls("explicit", values=tuple(values), tail_exponent=tail_exponent)

    def eigenvalues(self, alphas: np.ndarray) -> np.ndarray:
        alphas = np.asarray(alphas, dtype=float)
        if self.kind == "identity":
            return np.ones_like(alphas)
        if self.kind == "power_law":
            return self.scale * alphas ** (-self.exponent)
        if len(self.values) < alphas.size:
            raise ValueError(
                f"explicit covariance lists {len(self.values)} values, need {alphas.size}"
            )
        return np.array(self.values[: alphas.size])

    def upper_exponent(self, alphas: np.ndarray) -> float | None:
        """Exponent ``b`` of the envelope ``lambda_n <= K alpha_n**(-b)``."""
        if self.kind == "power_law" and self.exponent_b is not None:
            return self.exponent_b
        return self.decay_exponent(alphas)

    def decay_exponent(self, alphas: np.ndarray) -> float | None:
        """Decay exponent ``a`` with ``lambda_n ~ alpha_n**(-a)`` in the tail."""
        if self.kind == "identity":
            return 0.0
        if self.kind == "power_law":
            return self.exponent
        if self.tail_exponent is not None:
            return self.tail_exponent
        lam = self.eigenvalues(alphas)
        if lam.size < 4:
            return None
        half = lam.size // 2
        slope = np.polyfit(np.log(alphas[half:]), np.log(lam[half:]), 1)[0]
        return float(-slope)

    def tail_scale(self, alphas: np.ndarray) -> float | None:
        """Prefactor ``c`` of the tail model ``lambda(x) = c x**(-a)``."""
        a = self.decay_exponent(alphas)
        if a is None:
            return None
        if self.kind == "identity":
            return 1.0
        if self.kind == "power_law":
            return self.scale
        lam = self.eigenvalues(alphas)
        # anchor at the last listed mode
        return float(lam[-1] * alphas[-1] ** a)


@dataclass(frozen=True)
class ModelSpec:
    """Discretized problem: domain, truncation, drift and noise covariance."""

    length: float = np.pi
    n_modes: int = 64
    n_colloc: int | None = None
    drift: DriftPolynomial = field(default_factory=DriftPolynomial)
    covariance: CovarianceSpec = field(default_factory=CovarianceSpec)

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ValueError(f"n_modes must be a positive integer, got {self.n_modes}")
        object.__setattr__(self, "n_modes", int(self.n_modes))
        object.__setattr__(self, "length", float(self.length))
        if self.n_colloc is None:
            object.__setattr__(self, "n_colloc", 4 * self.n_modes)
        if self.n_colloc < 2 * self.n_modes:
            raise ValueError(
                f"n_colloc={self.n_colloc} violates the anti-aliasing bound M >= 2N "
                f"(N={self.n_modes})"
            )
        object.__setattr__(self, "n_colloc", int(self.n_colloc))
        if self.covariance.kind == "explicit" and len(self.covariance.values) < self.n_modes:
            raise ValueError("explicit covariance must list at least n_modes values")

    @cached_property
    def modes(self) -> np.ndarray:
        return np.arange(1, self.n_modes + 1)

    @cached_property
    def alphas(self) -> np.ndarray:
        return dirichlet_eigenvalue(self.modes, self.length)

    @cached_property
    def lambdas(self) -> np.ndarray:
        return self.covariance.eigenvalues(self.alphas)

    @cached_property
    def grid(self) -> np.ndarray:
        M = self.n_colloc
        return np.arange(1, M + 1) * self.length / (M + 1)

    @cached_property
    def synthesis(self) -> np.ndarray:
        """(N, M) matrix with entries e_n(xi_j)."""
        arg = np.outer(self.modes, self.grid) * (np.pi / self.length)
        return np.sqrt(2.0 / self.length) * np.sin(arg)

    @cached_property
    def analysis(self) -> np.ndarray:
        """(M, N) quadrature projection onto e_1..e_N."""
        return self.synthesis.T * (self.length / (self.n_colloc + 1))

    @cached_property
    def constant_modes(self) -> np.ndarray:
        """Exact coefficients of the constant function 1 in e_1..e_N."""
        return constant_projection(self.modes, self.length)

    def zero_field(self) -> SpectralField:
        return SpectralField(np.zeros(self.n_modes))

    def mode_field(self, n: int, amplitude: float = 1.0) -> SpectralField:
        c = np.zeros(self.n_modes)
        c[n - 1] = amplitude
        return SpectralField(c)

    def replace(self, **changes) -> ModelSpec:
        from dataclasses import replace

        if "n_modes" in changes and "n_colloc" not in changes:
            changes["n_colloc"] = None
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficients of a truncated field in the eigenbasis e_1..e_N."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1:
            raise ValueError("SpectralField holds a single 1D coefficient vector")
        if not np.all(np.isfinite(c)):
            raise ValueError("SpectralField entries must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __len__(self):
        return self.coeffs.size

    def __array__(self, dtype=None, copy=None):
        return self.coeffs if dtype is None else self.coeffs.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __add__(self, other):
        return SpectralField(self.coeffs + np.asarray(other))

    def __mul__(self, scalar):
        return SpectralField(self.coeffs * scalar)

    __rmul__ = __mul__


class Norms(NamedTuple):
    l2: float | np.ndarray
    sup: float | np.ndarray
    sobolev: float | np.ndarray


def constant_projection(n, length: float) -> np.ndarray:
    """<1, e_n> = sqrt(2/L) * L (1 - (-1)^n) / (n pi)."""
    n = np.asarray(n)
    return np.sqrt(2.0 / length) * length * (1 - (-1.0) ** n) / (n * np.pi)


def _coeffs(field, spec: ModelSpec) -> np.ndarray:
    c = field.coeffs if isinstance(field, SpectralField) else np.asarray(field, dtype=float)
    if c.shape[-1:] != (spec.n_modes,):
        raise ValueError(f"field has {c.shape[-1:]} coefficients, model has N={spec.n_modes}")
    return c


def to_physical(field, spec: ModelSpec) -> np.ndarray:
    """Evaluate ``sum_n u_n e_n`` at the M collocation points."""
    return _coeffs(field, spec) @ spec.synthesis


def to_spectral(values, spec: ModelSpec, *, as_field: bool | None = None):
    """Project grid values onto e_1..e_N (discrete sine analysis, truncated).

    Returns a :class:`SpectralField` for a single 1D grid vector and an array
    for batched input unless ``as_field`` says otherwise.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[-1:] != (spec.n_colloc,):
        raise ValueError(f"expected {spec.n_colloc} grid values, got {v.shape[-1:]}")
    c = v @ spec.analysis
    if as_field is None:
        as_field = v.ndim == 1
    return SpectralField(c) if as_field else c


def apply_drift(field, spec: ModelSpec, *, as_field: bool | None = None):
    """Galerkin projection of the superposition operator ``F(y)(xi) = f(y(xi))``.

    The constant term f(0) is projected analytically; the rest is evaluated on
    the grid and analysed.
    """
    c = _coeffs(field, spec)
    drift = spec.drift
    out = np.zeros_like(c)
    if drift.linear != 0.0:
        out = out + drift.linear * c
    if drift.has_nonlinear:
        out = out + P.polyval(to_physical(c, spec), drift.nonlinear) @ spec.analysis
    if drift.constant != 0.0:
        out = out + drift.constant * spec.constant_modes
    if as_field is None:
        as_field = isinstance(field, SpectralField)
    return SpectralField(out) if as_field else out


def sup_norm(field, spec: ModelSpec):
    """Max of |u| over the collocation grid (a grid proxy for the C_0 norm)."""
    return np.max(np.abs(to_physical(field, spec)), axis=-1)


def sobolev_norm(field, spec: ModelSpec, theta: float):
    """``sqrt(sum alpha_n**theta u_n**2)``."""
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    c = _coeffs(field, spec)
    return np.sqrt(np.sum(spec.alphas**theta * c**2, axis=-1))


def norms(field, spec: ModelSpec, theta: float = 0.75) -> Norms:
    c = _coeffs(field, spec)
    return Norms(
        l2=np.sqrt(np.sum(c**2, axis=-1)),
        sup=sup_norm(c, spec),
        sobolev=sobolev_norm(c, spec, theta),
    )


def sup_sobolev_constant(spec: ModelSpec, theta: float) -> float:
    """Constant ``c`` with ``sup|u| <= c * sobolev(theta)`` on the truncated space.

    Cauchy-Schwarz on ``|u(xi)| <= sqrt(2/L) sum |u_n|``.
    """
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    return float(np.sqrt(2.0 / spec.length) * np.sqrt(np.sum(spec.alphas ** (-theta))))
