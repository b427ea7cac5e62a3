"""Lag polynomials in the backshift operator.

Both AR and MA factors use the minus convention ``1 - sum c_k z^k`` so that
the expanded recursions read exactly like the load-curve models, e.g.
``(1 - B^24)(1 - a_1 B) eps_t = (1 - beta_1 B^24) V_t``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import NumericalError

CAUSAL_TOL = 1e-8
ROOT_TRIM = 1e-14
PSI_TAIL = 1e-8


@dataclass(frozen=True)
class LagPolynomial:
    """Coefficients of ``B^0, B^1, ...``; the ``B^0`` coefficient is 1."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.dtype != object:
            c = c.astype(float)
        c = c.reshape(-1)
        if c.size == 0 or c[0] != 1:
            raise ValueError("lag polynomial must have leading coefficient 1")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def one(cls) -> "LagPolynomial":
        return cls(np.array([1.0]))

    @classmethod
    def from_params(cls, params: Sequence, step: int = 1) -> "LagPolynomial":
        """``1 - sum_k params[k-1] z^{step*k}``."""
        params = list(params)
        obj = any(not isinstance(p, (int, float, np.floating, np.integer)) for p in params)
        c = np.zeros(step * len(params) + 1, dtype=object if obj else float)
        c[0] = 1
        for k, p in enumerate(params, start=1):
            c[step * k] = -p
        return cls(c)

    @classmethod
    def differencing(cls, d: int, D: int, s: int) -> "LagPolynomial":
        """``(1 - B)^d (1 - B^s)^D`` with integer coefficients."""
        poly = cls.one()
        for _ in range(d):
            poly = poly * cls(np.array([1.0, -1.0]))
        for _ in range(D):
            c = np.zeros(s + 1)
            c[0], c[s] = 1.0, -1.0
            poly = poly * cls(c)
        return poly

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.coeffs != 0)
        return int(nz[-1]) if nz.size else 0

    def trimmed(self) -> np.ndarray:
        return self.coeffs[: self.degree + 1]

    def __mul__(self, other: "LagPolynomial") -> "LagPolynomial":
        return LagPolynomial(np.convolve(self.coeffs, other.coeffs))

    def __len__(self):
        return self.coeffs.size

    def __getitem__(self, k):
        return self.coeffs[k] if k < self.coeffs.size else 0

    def roots(self) -> np.ndarray:
        c = np.asarray(self.trimmed(), dtype=float)
        # negligible top coefficients only add spurious huge roots
        big = np.flatnonzero(np.abs(c) > ROOT_TRIM * np.abs(c).max())
        c = c[: big[-1] + 1]
        if c.size <= 1:
            return np.array([], dtype=complex)
        return np.roots(c[::-1])


def expand(order, a=(), b=(), alpha=(), beta=()) -> tuple[LagPolynomial, LagPolynomial]:
    """Full AR side (differencing included) and full MA side of the model.

    ``order`` needs ``d, D, s`` attributes; ``a, b, alpha, beta`` are the
    nonseasonal AR, nonseasonal MA, seasonal AR and seasonal MA coefficients.
    A ``SarimaxModel`` may be passed as ``order`` alone.
    """
    if hasattr(order, "order") and not len(a):
        m = order
        order, a, b, alpha, beta = m.order, m.a, m.b, m.alpha, m.beta
    ar, ma = arma_factors(order.s, a, b, alpha, beta)
    return LagPolynomial.differencing(order.d, order.D, order.s) * ar, ma


def arma_factors(s: int, a=(), b=(), alpha=(), beta=()) -> tuple[LagPolynomial, LagPolynomial]:
    """``A(B) A_s(B)`` and ``B(B) B_s(B)`` without the differencing factors."""
    ar = LagPolynomial.from_params(a) * LagPolynomial.from_params(alpha, s)
    ma = LagPolynomial.from_params(b) * LagPolynomial.from_params(beta, s)
    return ar, ma


def difference_equation(ar: LagPolynomial, ma: LagPolynomial) -> tuple[dict, dict]:
    """Right-hand side of ``eps_t = sum e_k eps_{t-k} + sum v_k V_{t-k}``.

    Returns ``({k: e_k}, {k: v_k})`` keeping only nonzero terms.
    """
    eps = {k: -c for k, c in enumerate(ar.coeffs) if k > 0 and c != 0}
    v = {k: c for k, c in enumerate(ma.coeffs) if c != 0}
    return eps, v


@dataclass(frozen=True)
class CausalityCheck:
    causal: bool
    roots: np.ndarray

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.roots)

    def __bool__(self):
        return self.causal


def check_causal(ar: LagPolynomial, tol: float = CAUSAL_TOL) -> CausalityCheck:
    """True iff every root of ``ar`` lies strictly outside the unit circle."""
    if not isinstance(ar, LagPolynomial):
        ar = LagPolynomial(np.asarray(ar, dtype=float))
    roots = ar.roots()
    return CausalityCheck(bool(np.all(np.abs(roots) > 1.0 + tol)), roots)


@dataclass(frozen=True)
class PsiWeights:
    weights: np.ndarray

    def __len__(self):
        return self.weights.size

    def __getitem__(self, k):
        return self.weights[k]


def psi_recursion(ar, ma, n: int) -> np.ndarray:
    """psi_0..psi_n solving ``ar(z) psi(z) = ma(z)``; no causality check."""
    arc = np.asarray(getattr(ar, "coeffs", ar), dtype=float)
    mac = np.asarray(getattr(ma, "coeffs", ma), dtype=float)
    psi = np.zeros(n + 1)
    for j in range(n + 1):
        acc = mac[j] if j < mac.size else 0.0
        kmax = min(j, arc.size - 1)
        for k in range(1, kmax + 1):
            acc -= arc[k] * psi[j - k]
        psi[j] = acc
    return psi


def psi_weights(ar: LagPolynomial, ma: LagPolynomial, n: int | None = None) -> PsiWeights:
    """MA(infinity) weights of a causal ARMA.

    With ``n`` given exactly ``n + 1`` weights are returned; otherwise the
    expansion is extended until the tail weight drops below 1e-8.
    """
    if not check_causal(ar):
        raise NumericalError("AR polynomial is not causal; the psi expansion diverges")
    if n is not None:
        return PsiWeights(psi_recursion(ar, ma, n))
    n = max(len(ma), len(ar), 16)
    while True:
        psi = psi_recursion(ar, ma, n)
        window = max(len(ar), 1)
        if np.all(np.abs(psi[-window:]) < PSI_TAIL):
            return PsiWeights(psi)
        if n > 1_000_000:
            raise NumericalError("psi weights decay too slowly")
        n *= 2
