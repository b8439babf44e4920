"""Proximity operators, projections and Moreau envelopes.

The catalog is closed: every function and set below has a closed-form
prox or projection. Conjugate proxes go through the Moreau decomposition
``prox_{γf*}(u) = u - γ prox_{f/γ}(u/γ)`` and nowhere else.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .core import LinearOperator, as_vector
from .errors import CapabilityError, InputError

#: Absolute tolerance on a set's defining residual for membership tests.
MEMBERSHIP_TOL = 1e-9

INF = math.inf


def soft_threshold(x: np.ndarray, t: float) -> np.ndarray:
    """``sign(x) * max(|x| - t, 0)`` componentwise."""
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


# ---------------------------------------------------------------------------
# Convex sets
# ---------------------------------------------------------------------------

class ConvexSet:
    """Nonempty closed convex subset of ``R^dim``."""

    dim: int
    bounded: bool = False

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        raise NotImplementedError

    def witness(self) -> np.ndarray:
        raise NotImplementedError

    def support(self, v: np.ndarray) -> float:
        """Support function ``sup_{y in C} <y, v>``."""
        raise NotImplementedError


class WholeSpace(ConvexSet):
    def __init__(self, dim: int):
        if dim < 1:
            raise InputError("dim must be positive")
        self.dim = int(dim)

    def project(self, x):
        return np.array(x, dtype=float)

    def contains(self, x, tol=MEMBERSHIP_TOL):
        return True

    def witness(self):
        return np.zeros(self.dim)

    def support(self, v):
        return 0.0 if np.max(np.abs(v)) <= MEMBERSHIP_TOL else INF

    def __repr__(self):
        return f"WholeSpace({self.dim})"


class Box(ConvexSet):
    """``{x : lo <= x <= hi}``; bounds may be infinite."""

    def __init__(self, lo, hi):
        lo = np.array(lo, dtype=float).reshape(-1)
        hi = np.array(hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise InputError("lo and hi must be non-empty and of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise InputError("box bounds must not be NaN")
        if np.any(lo > hi):
            raise InputError("box is empty: some lo > hi")
        if np.any(lo == INF) or np.any(hi == -INF):
            raise InputError("box is empty: infinite bound on the wrong side")
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lo, self.hi = lo, hi
        self.dim = lo.size
        self.bounded = bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)))

    def project(self, x):
        return np.clip(x, self.lo, self.hi)

    def contains(self, x, tol=MEMBERSHIP_TOL):
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def witness(self):
        return np.clip(np.zeros(self.dim), self.lo, self.hi)

    def support(self, v):
        total = 0.0
        for vi, lo, hi in zip(v, self.lo, self.hi):
            side = hi if vi > 0 else lo
            if np.isfinite(side):
                total += vi * side
            elif abs(vi) > MEMBERSHIP_TOL:
                return INF
        return float(total)

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


class Ball(ConvexSet):
    """Closed Euclidean ball."""

    bounded = True

    def __init__(self, center, radius: float):
        self.center = as_vector(center, name="center")
        self.center.setflags(write=False)
        if not (radius >= 0 and math.isfinite(radius)):
            raise InputError("radius must be finite and nonnegative")
        self.radius = float(radius)
        self.dim = self.center.size

    def project(self, x):
        d = x - self.center
        nd = np.linalg.norm(d)
        if nd <= self.radius:
            return np.array(x, dtype=float)
        return self.center + (self.radius / nd) * d

    def contains(self, x, tol=MEMBERSHIP_TOL):
        return bool(np.linalg.norm(x - self.center) - self.radius <= tol)

    def witness(self):
        return self.center.copy()

    def support(self, v):
        return float(self.center @ v + self.radius * np.linalg.norm(v))

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


def _ray_coefficient(v, a, a2):
    """Least-squares coefficient of ``v`` on ``a`` and the normalized residual."""
    lam = float(a @ v) / a2
    resid = np.linalg.norm(v - lam * a)
    return lam, resid


class Halfspace(ConvexSet):
    """``{x : <a, x> <= b}``."""

    def __init__(self, a, b: float):
        self.a = as_vector(a, name="a")
        self.a.setflags(write=False)
        self._a2 = float(self.a @ self.a)
        if self._a2 == 0.0:
            raise InputError("halfspace normal must be nonzero")
        self.b = float(b)
        self.dim = self.a.size

    def project(self, x):
        excess = float(self.a @ x) - self.b
        if excess <= 0:
            return np.array(x, dtype=float)
        return x - (excess / self._a2) * self.a

    def contains(self, x, tol=MEMBERSHIP_TOL):
        return bool(float(self.a @ x) - self.b <= tol)

    def witness(self):
        return (self.b / self._a2) * self.a

    def support(self, v):
        lam, resid = _ray_coefficient(v, self.a, self._a2)
        if resid > MEMBERSHIP_TOL * max(1.0, np.linalg.norm(v)) or lam < -MEMBERSHIP_TOL:
            return INF
        return max(lam, 0.0) * self.b

    def __repr__(self):
        return f"Halfspace(a={self.a.tolist()}, b={self.b})"


class Hyperplane(ConvexSet):
    """``{x : <a, x> = b}``."""

    def __init__(self, a, b: float):
        self.a = as_vector(a, name="a")
        self.a.setflags(write=False)
        self._a2 = float(self.a @ self.a)
        if self._a2 == 0.0:
            raise InputError("hyperplane normal must be nonzero")
        self.b = float(b)
        self.dim = self.a.size

    def project(self, x):
        return x - ((float(self.a @ x) - self.b) / self._a2) * self.a

    def contains(self, x, tol=MEMBERSHIP_TOL):
        return bool(abs(float(self.a @ x) - self.b) <= tol)

    def witness(self):
        return (self.b / self._a2) * self.a

    def support(self, v):
        lam, resid = _ray_coefficient(v, self.a, self._a2)
        if resid > MEMBERSHIP_TOL * max(1.0, np.linalg.norm(v)):
            return INF
        return lam * self.b

    def __repr__(self):
        return f"Hyperplane(a={self.a.tolist()}, b={self.b})"


class Singleton(ConvexSet):
    bounded = True

    def __init__(self, point):
        self.point = as_vector(point, name="point")
        self.point.setflags(write=False)
        self.dim = self.point.size

    def project(self, x):
        return self.point.copy()

    def contains(self, x, tol=MEMBERSHIP_TOL):
        return bool(np.max(np.abs(x - self.point)) <= tol)

    def witness(self):
        return self.point.copy()

    def support(self, v):
        return float(self.point @ v)

    def __repr__(self):
        return f"Singleton({self.point.tolist()})"


class Affine(ConvexSet):
    """``{x : A x = c}`` with ``A`` of full row rank."""

    def __init__(self, A, c):
        A = np.array(A, dtype=float)
        if A.ndim == 1:
            A = A.reshape(1, -1)
        if A.ndim != 2 or A.size == 0:
            raise InputError("A must be a non-empty matrix")
        self.c = as_vector(c, A.shape[0], name="c")
        if np.linalg.matrix_rank(A) < A.shape[0]:
            raise CapabilityError("affine set requires A of full row rank")
        A.setflags(write=False)
        self.c.setflags(write=False)
        self.A = A
        self.dim = A.shape[1]
        self._chol = np.linalg.cholesky(A @ A.T)

    def _gram_solve(self, r):
        w = np.linalg.solve(self._chol, r)
        return np.linalg.solve(self._chol.T, w)

    def project(self, x):
        return x - self.A.T @ self._gram_solve(self.A @ x - self.c)

    def contains(self, x, tol=MEMBERSHIP_TOL):
        return bool(np.max(np.abs(self.A @ x - self.c)) <= tol)

    def witness(self):
        return self.A.T @ self._gram_solve(self.c)

    def support(self, v):
        lam = self._gram_solve(self.A @ v)
        resid = np.linalg.norm(v - self.A.T @ lam)
        if resid > MEMBERSHIP_TOL * max(1.0, np.linalg.norm(v)):
            return INF
        return float(lam @ self.c)

    def __repr__(self):
        return f"Affine(A={self.A.tolist()}, c={self.c.tolist()})"


class NonnegOrthant(ConvexSet):
    def __init__(self, dim: int):
        if dim < 1:
            raise InputError("dim must be positive")
        self.dim = int(dim)

    def project(self, x):
        return np.maximum(x, 0.0)

    def contains(self, x, tol=MEMBERSHIP_TOL):
        return bool(np.all(x >= -tol))

    def witness(self):
        return np.zeros(self.dim)

    def support(self, v):
        return 0.0 if np.all(v <= MEMBERSHIP_TOL) else INF

    def __repr__(self):
        return f"NonnegOrthant({self.dim})"


class Product(ConvexSet):
    """Cartesian product acting on concatenated coordinates."""

    def __init__(self, sets: Sequence[ConvexSet]):
        if not sets:
            raise InputError("product of zero sets")
        self.sets = tuple(sets)
        self.dims = tuple(s.dim for s in self.sets)
        self.dim = sum(self.dims)
        self.bounded = all(s.bounded for s in self.sets)
        self._cuts = np.cumsum(self.dims)[:-1]

    def parts(self, x):
        return np.split(np.asarray(x, dtype=float), self._cuts)

    def project(self, x):
        return np.concatenate([s.project(xi) for s, xi in zip(self.sets, self.parts(x))])

    def contains(self, x, tol=MEMBERSHIP_TOL):
        return all(s.contains(xi, tol) for s, xi in zip(self.sets, self.parts(x)))

    def witness(self):
        return np.concatenate([s.witness() for s in self.sets])

    def support(self, v):
        return float(sum(s.support(vi) for s, vi in zip(self.sets, self.parts(v))))

    def __repr__(self):
        return f"Product({list(self.sets)})"


def project(C: ConvexSet, x) -> np.ndarray:
    """Nearest point of ``C`` to ``x``."""
    x = as_vector(x, C.dim)
    return C.project(x)


# ---------------------------------------------------------------------------
# Proximable functions
# ---------------------------------------------------------------------------

class ProxFunction:
    """Proper lsc convex function with a closed-form proximity operator."""

    dim: int

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def prox(self, gamma: float, x: np.ndarray) -> np.ndarray:
        """Minimizer of ``f(p) + ||x - p||^2 / (2 gamma)``."""
        raise NotImplementedError

    def witness(self) -> np.ndarray:
        """A point where the function is finite."""
        return np.zeros(self.dim)

    def conjugate_value(self, u: np.ndarray) -> float:
        raise CapabilityError(f"no closed-form conjugate for {type(self).__name__}")

    def conjugate_witness(self) -> np.ndarray:
        return np.zeros(self.dim)


class Zero(ProxFunction):
    def __init__(self, dim: int):
        if dim < 1:
            raise InputError("dim must be positive")
        self.dim = int(dim)

    def value(self, x):
        return 0.0

    def prox(self, gamma, x):
        return np.array(x, dtype=float)

    def conjugate_value(self, u):
        return 0.0 if np.max(np.abs(u)) <= MEMBERSHIP_TOL else INF

    def __repr__(self):
        return f"Zero({self.dim})"


class Indicator(ProxFunction):
    """``0`` on ``C`` and ``+inf`` outside."""

    def __init__(self, C: ConvexSet):
        self.set = C
        self.dim = C.dim

    def value(self, x):
        return 0.0 if self.set.contains(x) else INF

    def prox(self, gamma, x):
        return self.set.project(x)

    def witness(self):
        return self.set.witness()

    def conjugate_value(self, u):
        return self.set.support(u)

    def __repr__(self):
        return f"Indicator({self.set!r})"


class L1(ProxFunction):
    def __init__(self, dim: int):
        if dim < 1:
            raise InputError("dim must be positive")
        self.dim = int(dim)

    def value(self, x):
        return float(np.sum(np.abs(x)))

    def prox(self, gamma, x):
        return soft_threshold(x, gamma)

    def conjugate_value(self, u):
        return 0.0 if np.max(np.abs(u)) <= 1.0 + MEMBERSHIP_TOL else INF

    def __repr__(self):
        return f"L1({self.dim})"


class L1PlusQuadratic(ProxFunction):
    """``||x||_1 + (beta/2) ||x||^2`` (elastic-net penalty)."""

    def __init__(self, dim: int, beta: float):
        if dim < 1:
            raise InputError("dim must be positive")
        if not beta > 0:
            raise InputError("beta must be positive")
        self.dim = int(dim)
        self.beta = float(beta)

    def value(self, x):
        return float(np.sum(np.abs(x)) + 0.5 * self.beta * (x @ x))

    def prox(self, gamma, x):
        s = 1.0 + self.beta * gamma
        return soft_threshold(x / s, gamma / s)

    def conjugate_value(self, u):
        excess = np.maximum(np.abs(u) - 1.0, 0.0)
        return float(excess @ excess / (2.0 * self.beta))

    def __repr__(self):
        return f"L1PlusQuadratic({self.dim}, beta={self.beta})"


class Separable(ProxFunction):
    """``x -> sum_k phi_k(<x, q_k>)`` for an orthonormal basis ``(q_k)``.

    ``components`` are one-dimensional functions; ``basis`` holds the
    ``q_k`` as columns and defaults to the canonical basis.
    """

    def __init__(self, components: Sequence[ProxFunction], basis=None):
        comps = tuple(components)
        if not comps:
            raise InputError("separable function needs at least one component")
        for k, c in enumerate(comps):
            if c.dim != 1:
                raise InputError(f"component {k} must be one-dimensional")
        self.components = comps
        self.dim = len(comps)
        if basis is not None:
            Q = np.array(basis, dtype=float)
            if Q.shape != (self.dim, self.dim):
                raise InputError(f"basis must be {self.dim}x{self.dim}")
            if np.max(np.abs(Q.T @ Q - np.eye(self.dim))) > 1e-10:
                raise InputError("basis is not orthonormal to 1e-10")
            Q.setflags(write=False)
            self.basis: Optional[np.ndarray] = Q
        else:
            self.basis = None

    def _coeffs(self, x):
        return x if self.basis is None else self.basis.T @ x

    def _synth(self, c):
        return c if self.basis is None else self.basis @ c

    def value(self, x):
        c = self._coeffs(x)
        return float(sum(phi.value(c[k:k + 1]) for k, phi in enumerate(self.components)))

    def prox(self, gamma, x):
        c = self._coeffs(x)
        out = np.array([phi.prox(gamma, c[k:k + 1])[0]
                        for k, phi in enumerate(self.components)])
        return self._synth(out)

    def witness(self):
        return self._synth(np.array([phi.witness()[0] for phi in self.components]))

    def conjugate_value(self, u):
        c = self._coeffs(u)
        return float(sum(phi.conjugate_value(c[k:k + 1])
                         for k, phi in enumerate(self.components)))

    def conjugate_witness(self):
        return self._synth(np.array([phi.conjugate_witness()[0] for phi in self.components]))

    def __repr__(self):
        return f"Separable({list(self.components)}, basis={'canonical' if self.basis is None else 'custom'})"


class Scaled(ProxFunction):
    """``weight * base``."""

    def __init__(self, base: ProxFunction, weight: float):
        if not weight > 0:
            raise InputError("weight must be positive")
        self.base = base
        self.weight = float(weight)
        self.dim = base.dim

    def value(self, x):
        v = self.base.value(x)
        return v if v == INF else self.weight * v

    def prox(self, gamma, x):
        return self.base.prox(gamma * self.weight, x)

    def witness(self):
        return self.base.witness()

    def conjugate_value(self, u):
        v = self.base.conjugate_value(u / self.weight)
        return v if v == INF else self.weight * v

    def conjugate_witness(self):
        return self.weight * self.base.conjugate_witness()

    def __repr__(self):
        return f"Scaled({self.base!r}, {self.weight})"


class ReflectedTranslated(ProxFunction):
    """``y -> base(z - y)``."""

    def __init__(self, base: ProxFunction, z):
        self.base = base
        self.z = as_vector(z, base.dim, name="z")
        self.z.setflags(write=False)
        self.dim = base.dim

    def value(self, x):
        return self.base.value(self.z - x)

    def prox(self, gamma, x):
        return self.z - self.base.prox(gamma, self.z - x)

    def witness(self):
        return self.z - self.base.witness()

    def conjugate_value(self, u):
        v = self.base.conjugate_value(-u)
        return v if v == INF else float(self.z @ u) + v

    def conjugate_witness(self):
        return -self.base.conjugate_witness()

    def __repr__(self):
        return f"ReflectedTranslated({self.base!r}, z={self.z.tolist()})"


class Support(ProxFunction):
    """Support function ``sigma_C``; its prox follows from Moreau's identity."""

    def __init__(self, C: ConvexSet):
        self.set = C
        self.dim = C.dim

    def value(self, x):
        return self.set.support(x)

    def prox(self, gamma, x):
        return x - gamma * self.set.project(x / gamma)

    def conjugate_value(self, u):
        return 0.0 if self.set.contains(u) else INF

    def conjugate_witness(self):
        return self.set.witness()

    def __repr__(self):
        return f"Support({self.set!r})"


class Conjugate(ProxFunction):
    """Fenchel conjugate of ``base``."""

    def __init__(self, base: ProxFunction):
        self.base = base
        self.dim = base.dim

    def value(self, x):
        return self.base.conjugate_value(x)

    def prox(self, gamma, x):
        return x - gamma * self.base.prox(1.0 / gamma, x / gamma)

    def witness(self):
        return self.base.conjugate_witness()

    def conjugate_value(self, u):
        return self.base.value(u)

    def conjugate_witness(self):
        return self.base.witness()

    def __repr__(self):
        return f"Conjugate({self.base!r})"


class QuadraticData(ProxFunction):
    """``x -> ||L x - y||^2 / 2`` used as a nonsmooth-slot term."""

    def __init__(self, L: LinearOperator, y):
        self.L = L
        self.y = as_vector(y, L.rows, name="y")
        self.y.setflags(write=False)
        self.dim = L.cols
        self._LtL = L.matrix.T @ L.matrix
        self._Lty = L.matrix.T @ self.y

    def value(self, x):
        r = self.L.matrix @ x - self.y
        return float(0.5 * (r @ r))

    def prox(self, gamma, x):
        M = np.eye(self.dim) + gamma * self._LtL
        return np.linalg.solve(M, x + gamma * self._Lty)

    def __repr__(self):
        return f"QuadraticData(L={self.L.shape})"


class Tilted(ProxFunction):
    """``x -> base(x) + <r, x>``."""

    def __init__(self, base: ProxFunction, r):
        self.base = base
        self.r = as_vector(r, base.dim, name="r")
        self.r.setflags(write=False)
        self.dim = base.dim

    def value(self, x):
        v = self.base.value(x)
        return v if v == INF else v + float(self.r @ x)

    def prox(self, gamma, x):
        return self.base.prox(gamma, x - gamma * self.r)

    def witness(self):
        return self.base.witness()

    def conjugate_value(self, u):
        return self.base.conjugate_value(u - self.r)

    def conjugate_witness(self):
        return self.base.conjugate_witness() + self.r

    def __repr__(self):
        return f"Tilted({self.base!r}, r={self.r.tolist()})"


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def _check_gamma(gamma: float, name: str = "gamma") -> float:
    gamma = float(gamma)
    if not (gamma > 0 and math.isfinite(gamma)):
        raise InputError(f"{name} must be a positive finite real, got {gamma}")
    return gamma


def value(f: ProxFunction, x) -> float:
    """``f(x)``, possibly ``+inf``."""
    return f.value(as_vector(x, f.dim))


def prox(f: ProxFunction, gamma: float, x) -> np.ndarray:
    """``prox_{gamma f}(x)``."""
    return f.prox(_check_gamma(gamma), as_vector(x, f.dim))


def prox_reflected_translated(ell: ProxFunction, z, rho: float, x) -> np.ndarray:
    """Prox of ``y -> ell(z - y)`` with parameter ``rho``."""
    return ReflectedTranslated(ell, z).prox(_check_gamma(rho, "rho"), as_vector(x, ell.dim))


def prox_conjugate(f: ProxFunction, gamma: float, u) -> np.ndarray:
    """``prox_{gamma f*}(u) = u - gamma prox_{f/gamma}(u/gamma)``."""
    gamma = _check_gamma(gamma)
    u = as_vector(u, f.dim, name="u")
    return u - gamma * f.prox(1.0 / gamma, u / gamma)


def moreau_value(h: ProxFunction, rho: float, x) -> float:
    """Moreau envelope of ``h`` with parameter ``rho`` at ``x``."""
    rho = _check_gamma(rho, "rho")
    x = as_vector(x, h.dim)
    p = h.prox(rho, x)
    d = x - p
    return float(h.value(p) + (d @ d) / (2.0 * rho))


def moreau_grad(h: ProxFunction, rho: float, x) -> np.ndarray:
    """Gradient ``(x - prox_{rho h} x) / rho`` of the Moreau envelope."""
    rho = _check_gamma(rho, "rho")
    x = as_vector(x, h.dim)
    return (x - h.prox(rho, x)) / rho
