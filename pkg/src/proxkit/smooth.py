"""Differentiable convex terms with certified gradient Lipschitz constants."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import LinearOperator, as_vector, identity
from .errors import InputError, ZeroOperatorError
from .prox import ProxFunction, ReflectedTranslated


class SmoothFunction:
    """Convex ``g`` with ``beta``-Lipschitz gradient."""

    dim: int
    beta: float

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _nonzero_norm_sq(L: LinearOperator, where: str) -> float:
    if L.is_zero():
        raise ZeroOperatorError(f"{where}: operator is identically zero")
    return L.norm_bound() ** 2


def _positive(value, name):
    value = float(value)
    if not value > 0:
        raise InputError(f"{name} must be positive, got {value}")
    return value


class ZeroSmooth(SmoothFunction):
    """The zero function; its gradient is constant so ``beta = 0``."""

    def __init__(self, dim: int):
        if dim < 1:
            raise InputError("dim must be positive")
        self.dim = int(dim)
        self.beta = 0.0

    def value(self, x):
        return 0.0

    def grad(self, x):
        return np.zeros(self.dim)

    def __repr__(self):
        return f"ZeroSmooth({self.dim})"


class LeastSquares(SmoothFunction):
    """``x -> ||L x - y||^2 / 2``."""

    def __init__(self, L: LinearOperator, y):
        self.L = L
        self.y = as_vector(y, L.rows, name="y")
        self.y.setflags(write=False)
        self.dim = L.cols
        self.beta = _nonzero_norm_sq(L, "least squares")

    def residual(self, x):
        return self.L.matrix @ x - self.y

    def value(self, x):
        r = self.residual(x)
        return float(0.5 * (r @ r))

    def grad(self, x):
        return self.L.matrix.T @ self.residual(x)

    def __repr__(self):
        return f"LeastSquares(L={self.L.shape})"


class MultiQuadratic(SmoothFunction):
    """``x -> (1/2) sum_k w_k ||L_k x - y_k||^2`` from ``(w_k, L_k, y_k)`` triples."""

    def __init__(self, terms: Sequence[tuple]):
        if not terms:
            raise InputError("need at least one term")
        parsed = []
        dims = set()
        for k, (w, L, y) in enumerate(terms):
            w = _positive(w, f"weight[{k}]")
            parsed.append((w, L, as_vector(y, L.rows, name=f"y[{k}]")))
            dims.add(L.cols)
        if len(dims) != 1:
            raise InputError("all operators must share a domain")
        self.terms = tuple(parsed)
        self.dim = dims.pop()
        self.beta = sum(w * _nonzero_norm_sq(L, f"term {k}")
                        for k, (w, L, _) in enumerate(self.terms))

    def value(self, x):
        total = 0.0
        for w, L, y in self.terms:
            r = L.matrix @ x - y
            total += 0.5 * w * (r @ r)
        return float(total)

    def grad(self, x):
        g = np.zeros(self.dim)
        for w, L, y in self.terms:
            g = g + w * (L.matrix.T @ (L.matrix @ x - y))
        return g

    def __repr__(self):
        return f"MultiQuadratic({len(self.terms)} terms)"


class EnvelopeSum(SmoothFunction):
    """``x -> sum_k w_k env_{rho_k h_k}(L_k x)`` from ``(w_k, rho_k, L_k, h_k)``.

    Values go through the prox (``h(p) + ||u - p||^2 / (2 rho)``), so value
    and gradient share one code path.
    """

    def __init__(self, terms: Sequence[tuple]):
        if not terms:
            raise InputError("need at least one term")
        parsed = []
        dims = set()
        for k, (w, rho, L, h) in enumerate(terms):
            w = _positive(w, f"weight[{k}]")
            rho = _positive(rho, f"rho[{k}]")
            if h.dim != L.rows:
                raise InputError(f"term {k}: h has dim {h.dim}, L has {L.rows} rows")
            parsed.append((w, rho, L, h))
            dims.add(L.cols)
        if len(dims) != 1:
            raise InputError("all operators must share a domain")
        self.terms = tuple(parsed)
        self.dim = dims.pop()
        self.beta = sum(w * _nonzero_norm_sq(L, f"term {k}") / rho
                        for k, (w, rho, L, _) in enumerate(self.terms))

    def value(self, x):
        total = 0.0
        for w, rho, L, h in self.terms:
            u = L.matrix @ x
            p = h.prox(rho, u)
            d = u - p
            total += w * (h.value(p) + (d @ d) / (2.0 * rho))
        return float(total)

    def grad(self, x):
        g = np.zeros(self.dim)
        for w, rho, L, h in self.terms:
            u = L.matrix @ x
            g = g + (w / rho) * (L.matrix.T @ (u - h.prox(rho, u)))
        return g

    def __repr__(self):
        return f"EnvelopeSum({len(self.terms)} terms)"


def quadratic_coupling(ell: ProxFunction, z, rho: float) -> EnvelopeSum:
    """Smooth term ``x -> min_w ell(w) + ||x + w - z||^2 / (2 rho)``.

    Substituting ``y = z - w`` turns it into the Moreau envelope of
    ``y -> ell(z - y)``.
    """
    return EnvelopeSum([(1.0, rho, identity(ell.dim), ReflectedTranslated(ell, z))])


class DualSmooth(SmoothFunction):
    """``v -> env_{phi*}(z - L^* v)``, the smooth part of the dual problem.

    Uses ``env_{phi*}(u) = ||u||^2/2 - env_phi(u)`` so only ``phi`` and its
    prox are needed. The gradient is ``-L prox_phi(z - L^* v)``.
    """

    def __init__(self, phi: ProxFunction, L: LinearOperator, z):
        if phi.dim != L.cols:
            raise InputError(f"phi has dim {phi.dim}, L has {L.cols} columns")
        self.phi = phi
        self.L = L
        self.z = as_vector(z, L.cols, name="z")
        self.dim = L.rows
        self.beta = _nonzero_norm_sq(L, "dual operator")

    def primal(self, v):
        return self.phi.prox(1.0, self.z - self.L.matrix.T @ v)

    def value(self, v):
        u = self.z - self.L.matrix.T @ v
        p = self.phi.prox(1.0, u)
        d = u - p
        env_phi = self.phi.value(p) + 0.5 * (d @ d)
        return float(0.5 * (u @ u) - env_phi)

    def grad(self, v):
        return -(self.L.matrix @ self.primal(v))

    def __repr__(self):
        return f"DualSmooth(L={self.L.shape})"


def value(g: SmoothFunction, x) -> float:
    return g.value(as_vector(x, g.dim))


def grad(g: SmoothFunction, x) -> np.ndarray:
    return g.grad(as_vector(x, g.dim))


def lipschitz_beta(g: SmoothFunction) -> float:
    """Lipschitz constant of ``grad g`` from the closed-form rule of its kind."""
    return g.beta
