"""Slow, independent verifiers.

Nothing in this module imports the prox, smooth or solve modules: objects
are inspected by duck typing and only their ``value``/``contains`` methods
and stored parameters are used. Projections and proxes are never called.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CapabilityError, SamplingError

DEFAULT_SEED = 0
MAX_GRID_DIM = 3
MAX_RESOLUTION = 2001
INEQUALITY_TOL = 1e-9
MIN_ACCEPTED = 50
OVERSAMPLING = 10


def oracle_seed(seed: Optional[int] = None) -> int:
    """Explicit seed, else ``PROXKIT_SEED`` from the environment, else 0."""
    if seed is not None:
        return int(seed)
    env = os.environ.get("PROXKIT_SEED")
    return int(env) if env not in (None, "") else DEFAULT_SEED


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------

def _grid_pass(objective, axes, vectorized, chunk):
    best_val = math.inf
    best_pt = None
    dim = len(axes)
    if vectorized:
        # Chunk along the first axis; later chunks only win on strict improvement,
        # so the lowest lexicographic index wins ties.
        rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, dim - 1) \
            if dim > 1 else np.empty((1, 0))
        step = max(1, chunk // max(1, rest.shape[0]))
        for start in range(0, axes[0].size, step):
            first = axes[0][start:start + step]
            pts = np.concatenate([np.repeat(first, rest.shape[0])[:, None],
                                  np.tile(rest, (first.size, 1))], axis=1)
            vals = np.asarray(objective(pts), dtype=float)
            k = int(np.argmin(vals))
            if vals[k] < best_val:
                best_val, best_pt = float(vals[k]), pts[k].copy()
    else:
        for pt in itertools.product(*axes):
            val = float(objective(np.array(pt)))
            if val < best_val:
                best_val, best_pt = val, np.array(pt)
    return best_pt, best_val


def grid_minimize(objective: Callable, bounds: Sequence[tuple], resolution: int,
                  vectorized: bool = False, chunk: int = 2_000_000):
    """Exhaustive grid search plus one refinement pass.

    ``bounds`` is one ``(lo, hi)`` pair per axis (at most three axes) and
    ``resolution`` the number of grid points per axis. The refinement grid
    covers one coarse spacing on each side of the incumbent at ten times
    the resolution. With ``vectorized=True`` the objective receives an
    ``(n, dim)`` array and returns ``n`` values.

    Returns ``(point, value)``.
    """
    dim = len(bounds)
    if dim < 1 or dim > MAX_GRID_DIM:
        raise CapabilityError(f"grid search supports 1 to {MAX_GRID_DIM} dimensions, got {dim}")
    if not 2 <= resolution <= MAX_RESOLUTION:
        raise CapabilityError(f"resolution must lie in [2, {MAX_RESOLUTION}]")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in bounds]
    pt, val = _grid_pass(objective, axes, vectorized, chunk)
    spacing = [(hi - lo) / (resolution - 1) for lo, hi in bounds]
    fine = [np.linspace(max(lo, c - h), min(hi, c + h), 21)
            for (lo, hi), c, h in zip(bounds, pt, spacing)]
    pt2, val2 = _grid_pass(objective, fine, vectorized, chunk)
    if val2 < val:
        pt, val = pt2, val2
    return pt, val


def subgradient_solve_separable_l1(a, b) -> np.ndarray:
    """Minimizer of ``sum_k |x_k| + (a_k x_k - b_k)^2 / 2`` by case analysis.

    For each coordinate: ``x = (ab - 1)/a^2`` if ``ab > 1``,
    ``(ab + 1)/a^2`` if ``ab < -1``, else ``0``.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError("a and b must have the same shape")
    if np.any(a == 0):
        raise CapabilityError("a must have nonzero entries")
    out = np.zeros_like(a)
    for k, (ak, bk) in enumerate(zip(a, b)):
        s = ak * bk
        if s > 1:
            out[k] = (s - 1) / ak ** 2
        elif s < -1:
            out[k] = (s + 1) / ak ** 2
    return out


def finite_diff_grad(g, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of ``g.value`` (or of a plain callable)."""
    if not h > 0:
        raise ValueError("h must be positive")
    fn = g.value if hasattr(g, "value") else g
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        out[k] = (fn(x + e) - fn(x - e)) / (2 * h)
    return out


# ---------------------------------------------------------------------------
# Set- and domain-aware sampling
# ---------------------------------------------------------------------------

def _kind(obj) -> str:
    return type(obj).__name__


def _box(rng, n, center, radius):
    return center + rng.uniform(-radius, radius, size=(n, center.size))


def _rejection(rng, n, lo, hi, accept):
    want = max(n, MIN_ACCEPTED)
    cand = rng.uniform(lo, hi, size=(OVERSAMPLING * want, lo.size))
    kept = [y for y in cand if accept(y)]
    if len(kept) < MIN_ACCEPTED:
        raise SamplingError(f"only {len(kept)} of {len(cand)} candidates accepted")
    return np.array(kept[:want])


def sample_set(C, rng, n: int, center, radius: float) -> np.ndarray:
    """At least ``max(n, 50)`` points of ``C`` near ``center``."""
    center = np.asarray(center, dtype=float)
    kind = _kind(C)
    want = max(n, MIN_ACCEPTED)
    if kind == "Singleton":
        return np.tile(C.point, (want, 1))
    if kind == "WholeSpace":
        return _box(rng, want, center, radius)
    if kind == "Hyperplane":
        ys = _box(rng, want, center, radius)
        j = int(np.argmax(np.abs(C.a)))
        others = np.delete(np.arange(C.dim), j)
        ys[:, j] = (C.b - ys[:, others] @ C.a[others]) / C.a[j]
        return ys
    if kind == "Affine":
        particular, *_ = np.linalg.lstsq(C.A, C.c, rcond=None)
        _, s, vt = np.linalg.svd(C.A)
        null = vt[np.sum(s > 1e-12 * s[0]):].T
        if null.shape[1] == 0:
            return np.tile(particular, (want, 1))
        coef = rng.uniform(-radius, radius, size=(want, null.shape[1]))
        shift = null.T @ (center - particular)
        return particular + (coef + shift) @ null.T
    if kind == "Product":
        parts = np.split(center, np.cumsum(C.dims)[:-1])
        return np.hstack([sample_set(S, rng, want, c, radius)[:want]
                          for S, c in zip(C.sets, parts)])
    if kind == "Ball":
        lo, hi = C.center - C.radius, C.center + C.radius
    elif kind == "Box":
        lo = np.where(np.isfinite(C.lo), C.lo, center - radius)
        hi = np.where(np.isfinite(C.hi), C.hi, center + radius)
        lo = np.minimum(lo, hi)
    else:
        lo, hi = center - radius, center + radius
    try:
        return _rejection(rng, want, lo, hi, lambda y: C.contains(y))
    except SamplingError:
        if kind in ("Halfspace", "NonnegOrthant"):
            # center far outside: sample around a member instead
            w = C.witness()
            return _rejection(rng, want, w - radius, w + radius, lambda y: C.contains(y))
        raise


def _support_domain(C, rng, n, center, radius):
    """Points where the support function of ``C`` is finite."""
    kind = _kind(C)
    want = max(n, MIN_ACCEPTED)
    if getattr(C, "bounded", False):
        return _box(rng, want, center, radius)
    if kind == "WholeSpace":
        return np.zeros((want, C.dim))
    if kind in ("Halfspace", "Hyperplane"):
        scale = radius / np.linalg.norm(C.a)
        lo = 0.0 if kind == "Halfspace" else -scale
        lam = rng.uniform(lo, scale, size=want)
        return lam[:, None] * C.a[None, :]
    if kind == "NonnegOrthant":
        return -np.abs(_box(rng, want, np.zeros(C.dim), radius))
    if kind == "Box":
        ys = _box(rng, want, center, radius)
        ys[:, ~np.isfinite(C.hi)] = -np.abs(ys[:, ~np.isfinite(C.hi)])
        ys[:, ~np.isfinite(C.lo)] = np.abs(ys[:, ~np.isfinite(C.lo)])
        ys[:, ~np.isfinite(C.hi) & ~np.isfinite(C.lo)] = 0.0
        return ys
    if kind == "Affine":
        coef = rng.uniform(-radius, radius, size=(want, C.A.shape[0]))
        return coef @ C.A
    if kind == "Product":
        parts = np.split(np.asarray(center, dtype=float), np.cumsum(C.dims)[:-1])
        return np.hstack([_support_domain(S, rng, want, c, radius)[:want]
                          for S, c in zip(C.sets, parts)])
    raise SamplingError(f"no domain sampler for support of {kind}")


def sample_domain(f, rng, n: int, center, radius: float) -> np.ndarray:
    """Points where ``f`` is finite, near ``center`` when possible."""
    center = np.asarray(center, dtype=float)
    kind = _kind(f)
    want = max(n, MIN_ACCEPTED)
    if kind == "Indicator":
        return sample_set(f.set, rng, want, center, radius)
    if kind == "Support":
        return _support_domain(f.set, rng, want, center, radius)
    if kind in ("Scaled", "Tilted"):
        return sample_domain(f.base, rng, want, center, radius)
    if kind == "ReflectedTranslated":
        return f.z - sample_domain(f.base, rng, want, f.z - center, radius)
    if kind == "Conjugate":
        base = _kind(f.base)
        if base == "Indicator":
            return _support_domain(f.base.set, rng, want, center, radius)
        if base == "Support":
            return sample_set(f.base.set, rng, want, center, radius)
        if base == "Zero":
            return np.zeros((want, f.dim))
        if base == "L1":
            return _box(rng, want, np.zeros(f.dim), 1.0)
    if kind == "Separable":
        coords = center if f.basis is None else f.basis.T @ center
        cols = [sample_domain(phi, rng, want, coords[k:k + 1], radius)[:want, 0]
                for k, phi in enumerate(f.components)]
        c = np.stack(cols, axis=1)
        return c if f.basis is None else c @ f.basis.T
    if kind == "ProductFunction":
        parts = np.split(center, np.cumsum(f.dims)[:-1])
        return np.hstack([sample_domain(fi, rng, want, c, radius)[:want]
                          for fi, c in zip(f.functions, parts)])
    return _rejection(rng, want, center - radius, center + radius,
                      lambda y: math.isfinite(f.value(y)))


def _multiscale(sampler, rng, n, center, radius):
    """Mix of samples at three radii so points close to ``center`` are present."""
    chunks = [sampler(rng, n, center, r) for r in (radius, 0.1 * radius, 0.01 * radius)]
    return np.vstack(chunks)


# ---------------------------------------------------------------------------
# Variational inequality checks
# ---------------------------------------------------------------------------

@dataclass
class Verification:
    passed: bool
    worst_margin: float
    samples: int
    seed: int
    check: str = ""

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.check}: worst margin {self.worst_margin:.3e} "
                f"over {self.samples} samples (seed {self.seed})")


def verify_prox_inequality(f, gamma: float, x, p, samples: int = 100,
                           seed: Optional[int] = None) -> Verification:
    """Check ``<y - p, x - p>/gamma + f(p) <= f(y)`` at sampled ``y in dom f``.

    The margin is the left side minus the right side; a check passes when
    every margin is at most ``1e-9`` times the magnitude of the terms
    involved (floored at 1).
    """
    seed = oracle_seed(seed)
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    fp = f.value(p)
    if not math.isfinite(fp):
        return Verification(False, math.inf, 0, seed, "prox")
    radius = 2.0 * (1.0 + np.linalg.norm(x - p))
    ys = _multiscale(lambda r, n, c, rad: sample_domain(f, r, n, c, rad),
                     rng, samples, p, radius)
    ys = np.vstack([ys, f.witness()[None, :]])
    worst = -math.inf
    ok = True
    count = 0
    for y in ys:
        fy = f.value(y)
        if not math.isfinite(fy):
            continue
        count += 1
        lhs = float((y - p) @ (x - p)) / gamma + fp
        margin = lhs - fy
        scale = max(1.0, abs(lhs), abs(fy), abs(fp))
        worst = max(worst, margin / scale)
        if margin > INEQUALITY_TOL * scale:
            ok = False
    if count == 0:
        raise SamplingError("no feasible competitor found")
    return Verification(ok, worst, count, seed, "prox")


def verify_projection_inequality(C, x, p, samples: int = 100,
                                 seed: Optional[int] = None) -> Verification:
    """Check ``p in C`` and ``<y - p, x - p> <= 0`` at sampled ``y in C``."""
    seed = oracle_seed(seed)
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if not C.contains(p):
        return Verification(False, math.inf, 0, seed, "projection")
    radius = 2.0 * (1.0 + np.linalg.norm(x - p))
    ys = _multiscale(lambda r, n, c, rad: sample_set(C, r, n, c, rad), rng, samples, p, radius)
    worst = -math.inf
    ok = True
    for y in ys:
        margin = float((y - p) @ (x - p))
        scale = max(1.0, np.linalg.norm(y - p) * np.linalg.norm(x - p))
        worst = max(worst, margin / scale)
        if margin > INEQUALITY_TOL * scale:
            ok = False
    return Verification(ok, worst, len(ys), seed, "projection")
