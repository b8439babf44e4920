"""Forward-backward iterations and their projected, inertial, dual and block forms.

Every solver returns a :class:`SolveReport`. Iterations stop when the
relative displacement ``||x_{n+1} - x_n|| <= tol (1 + ||x_n||)`` or after
``max_iter`` steps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import BlockOperator, LinearOperator, as_vector
from .errors import (CapabilityError, ConfigError, DomainError, InputError,
                     ReferenceValueError)
from .prox import Conjugate, Indicator, ConvexSet, ProxFunction, Tilted
from .smooth import DualSmooth, SmoothFunction

logger = logging.getLogger(__name__)

TOL_REACHED = "tol_reached"
MAX_ITER = "max_iter"

#: Relative slack when comparing a schedule's beta to a function's beta.
_BETA_SLACK = 1e-12


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``gamma_n`` confined to ``[epsilon, 2/beta - epsilon]``.

    ``rule`` is ``"constant"`` (``steps[0]`` every iteration), ``"cyclic"``
    (``steps`` repeated) or ``"harmonic"`` (``(1 + 1/(n+1)) / beta`` clipped
    to the admissible interval, decaying from near ``2/beta`` to ``1/beta``).
    """

    beta: float
    epsilon: float
    rule: str = "constant"
    steps: tuple = ()

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ConfigError(f"beta must be positive and finite, got {self.beta}")
        if not 0 < self.epsilon < 1.0 / self.beta:
            raise ConfigError(
                f"epsilon must lie in ]0, 1/beta[ = ]0, {1.0 / self.beta:.6g}[, "
                f"got {self.epsilon}")
        if self.rule not in ("constant", "cyclic", "harmonic"):
            raise ConfigError(f"unknown step rule {self.rule!r}")
        if self.rule in ("constant", "cyclic"):
            if not self.steps or (self.rule == "constant" and len(self.steps) != 1):
                raise ConfigError(f"{self.rule} rule needs step values")
            lo, hi = self.interval
            for g in self.steps:
                if not lo <= g <= hi:
                    raise ConfigError(
                        f"step {g:.6g} outside admissible interval "
                        f"[epsilon, 2/beta - epsilon] = [{lo:.6g}, {hi:.6g}] "
                        f"(beta = {self.beta:.6g})")

    @property
    def interval(self) -> tuple[float, float]:
        return self.epsilon, 2.0 / self.beta - self.epsilon

    def gamma(self, n: int) -> float:
        if self.rule == "constant":
            return self.steps[0]
        if self.rule == "cyclic":
            return self.steps[n % len(self.steps)]
        lo, hi = self.interval
        return min(max((1.0 + 1.0 / (n + 1)) / self.beta, lo), hi)

    def describe(self) -> str:
        if self.rule == "constant":
            return f"constant gamma={self.steps[0]:.12g}"
        if self.rule == "cyclic":
            return "cyclic gammas=" + ",".join(f"{g:.12g}" for g in self.steps)
        return "harmonic"

    @classmethod
    def auto(cls, beta: float) -> "StepSchedule":
        """``gamma = 1/beta`` with ``epsilon = 0.1/beta``."""
        return cls(beta, 0.1 / beta, "constant", (1.0 / beta,))

    @classmethod
    def constant(cls, gamma: float, beta: float,
                 epsilon: Optional[float] = None) -> "StepSchedule":
        gamma = float(gamma)
        if epsilon is None:
            default = 0.1 / beta
            if not 0 < gamma < 2.0 / beta:
                raise ConfigError(
                    f"step {gamma:.6g} outside admissible interval "
                    f"[epsilon, 2/beta - epsilon] = [{default:.6g}, "
                    f"{2.0 / beta - default:.6g}] (beta = {beta:.6g}); "
                    f"any epsilon in ]0, 1/beta[ requires 0 < gamma < {2.0 / beta:.6g}")
            epsilon = min(default, gamma, 2.0 / beta - gamma)
        return cls(beta, epsilon, "constant", (gamma,))

    @classmethod
    def cyclic(cls, gammas: Sequence[float], beta: float,
               epsilon: Optional[float] = None) -> "StepSchedule":
        gammas = tuple(float(g) for g in gammas)
        if epsilon is None:
            epsilon = min([0.1 / beta] + [min(g, 2.0 / beta - g) for g in gammas])
            if epsilon <= 0:
                raise ConfigError(
                    f"cyclic steps must lie in ]0, {2.0 / beta:.6g}[ (beta = {beta:.6g})")
        return cls(beta, epsilon, "cyclic", gammas)

    @classmethod
    def harmonic(cls, beta: float, epsilon: Optional[float] = None) -> "StepSchedule":
        return cls(beta, 0.1 / beta if epsilon is None else epsilon, "harmonic")


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls. ``schedule=None`` means ``gamma = 1/beta``."""

    schedule: Optional[StepSchedule] = None
    max_iter: int = 5000
    tol: float = 1e-9
    trace_every: int = 1

    def __post_init__(self):
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.trace_every < 1:
            raise ConfigError("trace_every must be at least 1")


def nominal_beta(beta: float) -> float:
    """Beta used for step rules; a zero gradient modulus maps to 1."""
    return beta if beta > 0 else 1.0


def resolve_schedule(cfg: SolverConfig, beta: float) -> StepSchedule:
    """Schedule from ``cfg``, checked against the certified ``beta``."""
    if cfg.schedule is None:
        return StepSchedule.auto(nominal_beta(beta))
    if cfg.schedule.beta < beta * (1.0 - _BETA_SLACK):
        raise ConfigError(
            f"schedule beta {cfg.schedule.beta:.6g} is below the gradient "
            f"Lipschitz constant {beta:.6g}")
    return cfg.schedule


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class SolveReport:
    """Trace of one run.

    ``objective_trace`` and ``iterates_kept`` hold ``(n, value)`` pairs for
    every ``trace_every``-th iterate plus the last. ``step_trace``,
    ``displacement`` and ``grad_residuals`` have one entry per iteration:
    entry ``n`` describes the move from ``x_n`` to ``x_{n+1}``.
    """

    algorithm: str
    schedule: Optional[StepSchedule]
    final_point: np.ndarray = None
    termination: str = MAX_ITER
    iterations: int = 0
    iterates_kept: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)
    step_trace: list = field(default_factory=list)
    grad_residuals: list = field(default_factory=list)
    displacement: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.termination == TOL_REACHED

    def objective_values(self) -> np.ndarray:
        return np.array([v for _, v in self.objective_trace])

    def is_monotone(self, slack: float = 1e-10) -> bool:
        vals = self.objective_values()
        return bool(np.all(np.diff(vals) <= slack))

    def iterate(self, n: int) -> np.ndarray:
        for k, x in self.iterates_kept:
            if k == n:
                return x
        raise KeyError(f"iterate {n} was not kept")


class _Recorder:
    def __init__(self, algorithm, schedule, cfg, x0, obj0, extras=None):
        self.cfg = cfg
        self.report = SolveReport(algorithm, schedule, extras=extras or {})
        self.report.iterates_kept.append((0, x0.copy()))
        self.report.objective_trace.append((0, obj0))
        self._last_kept = 0

    def record(self, n, x, obj, gamma, disp, gres):
        r = self.report
        r.step_trace.append(gamma)
        r.displacement.append(disp)
        r.grad_residuals.append(gres)
        if n % self.cfg.trace_every == 0:
            r.iterates_kept.append((n, x.copy()))
            r.objective_trace.append((n, obj))
            self._last_kept = n
        self._pending = (n, x, obj)

    def finish(self, x, n, termination):
        r = self.report
        if n > 0 and self._last_kept != n:
            _, xl, objl = self._pending
            r.iterates_kept.append((n, xl.copy()))
            r.objective_trace.append((n, objl))
        r.final_point = x.copy()
        r.iterations = n
        r.termination = termination
        return r


def _safe_value(fn, x) -> float:
    try:
        return fn.value(x)
    except CapabilityError:
        return math.nan


def _check_start(f: ProxFunction, x0) -> np.ndarray:
    x0 = as_vector(x0, f.dim, name="x0")
    if _safe_value(f, x0) == math.inf:
        raise DomainError("x0 is outside the domain of f (f(x0) = +inf)")
    return x0


def _stop(disp, x, tol):
    return disp <= tol * (1.0 + np.linalg.norm(x))


def _iterate(step: Callable, objective: Callable, grad: Optional[Callable],
             x0: np.ndarray, cfg: SolverConfig, algorithm: str,
             schedule: Optional[StepSchedule], extras=None) -> SolveReport:
    """Shared loop: ``step(n, x, grad_x) -> (x_next, gamma)``."""
    x = x0.copy()
    gx = grad(x) if grad is not None else None
    rec = _Recorder(algorithm, schedule, cfg, x, objective(x), extras)
    termination = MAX_ITER
    n = 0
    while n < cfg.max_iter:
        x_next, gamma = step(n, x, gx)
        gx_next = grad(x_next) if grad is not None else None
        disp = float(np.linalg.norm(x_next - x))
        gres = float(np.linalg.norm(gx - gx_next)) if grad is not None else math.nan
        done = _stop(disp, x, cfg.tol)
        n += 1
        rec.record(n, x_next, objective(x_next), gamma, disp, gres)
        x, gx = x_next, gx_next
        if done:
            termination = TOL_REACHED
            break
    return rec.finish(x, n, termination)


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------

def forward_backward(f: ProxFunction, g: SmoothFunction, x0,
                     cfg: Optional[SolverConfig] = None,
                     _algorithm: str = "fb") -> SolveReport:
    """Minimize ``f + g`` by ``x_{n+1} = prox_{gamma_n f}(x_n - gamma_n grad g(x_n))``."""
    cfg = cfg or SolverConfig()
    if f.dim != g.dim:
        raise InputError(f"f has dim {f.dim}, g has dim {g.dim}")
    x0 = _check_start(f, x0)
    sched = resolve_schedule(cfg, g.beta)

    def step(n, x, gx):
        gamma = sched.gamma(n)
        return f.prox(gamma, x - gamma * gx), gamma

    def objective(x):
        return _safe_value(f, x) + g.value(x)

    return _iterate(step, objective, g.grad, x0, cfg, _algorithm, sched)


def projected_gradient(C: ConvexSet, g: SmoothFunction, x0,
                       cfg: Optional[SolverConfig] = None) -> SolveReport:
    """Minimize ``g`` over ``C`` by gradient steps followed by projection."""
    x0 = as_vector(x0, C.dim, name="x0")
    if not C.contains(x0):
        raise DomainError("x0 is not in C")
    return forward_backward(Indicator(C), g, x0, cfg, _algorithm="projected")


@dataclass(frozen=True)
class InertialState:
    """FISTA bookkeeping: momentum parameter, extrapolated point, last iterate."""

    t: float
    z: np.ndarray
    x_prev: np.ndarray

    @staticmethod
    def next_t(t: float) -> float:
        return (1.0 + math.sqrt(4.0 * t * t + 1.0)) / 2.0

    def advance(self, x_new: np.ndarray) -> "InertialState":
        t_new = self.next_t(self.t)
        lam = 1.0 + (self.t - 1.0) / t_new
        z_new = self.x_prev + lam * (x_new - self.x_prev)
        return InertialState(t_new, z_new, x_new)


def fista(f: ProxFunction, g: SmoothFunction, x0,
          cfg: Optional[SolverConfig] = None) -> SolveReport:
    """Inertial forward-backward with fixed step ``1/beta`` and ``t_0 = 1``.

    Objective values are recorded but not expected to decrease monotonically.
    ``cfg.schedule`` only supplies ``beta``; its step rule is ignored.
    """
    cfg = cfg or SolverConfig()
    if f.dim != g.dim:
        raise InputError(f"f has dim {f.dim}, g has dim {g.dim}")
    x0 = _check_start(f, x0)
    beta = resolve_schedule(cfg, g.beta).beta
    sched = StepSchedule.auto(beta)
    step_size = 1.0 / beta

    def objective(x):
        return _safe_value(f, x) + g.value(x)

    state = InertialState(1.0, x0.copy(), x0.copy())
    ts = [state.t]
    gx = g.grad(x0)
    rec = _Recorder("fista", sched, cfg, x0, objective(x0), {"t": ts})
    termination = MAX_ITER
    n = 0
    while n < cfg.max_iter:
        x = state.x_prev
        y = state.z - step_size * g.grad(state.z)
        x_new = f.prox(step_size, y)
        state = state.advance(x_new)
        ts.append(state.t)
        gx_new = g.grad(x_new)
        disp = float(np.linalg.norm(x_new - x))
        done = _stop(disp, x, cfg.tol)
        n += 1
        rec.record(n, x_new, objective(x_new), step_size, disp,
                   float(np.linalg.norm(gx - gx_new)))
        gx = gx_new
        if done:
            termination = TOL_REACHED
            break
    return rec.finish(state.x_prev, n, termination)


def dual_forward_backward(phi: ProxFunction, psi: ProxFunction, L: LinearOperator,
                          z, r, v0=None, cfg: Optional[SolverConfig] = None):
    """Solve ``min phi(x) + psi(Lx - r) + ||x - z||^2 / 2`` through its dual.

    Runs forward-backward on ``v -> psi*(v) + <v, r>`` plus
    ``v -> env_{phi*}(z - L^* v)``, i.e.::

        x_n     = prox_phi(z - L^* v_n)
        v_{n+1} = prox_{gamma_n psi*}(v_n + gamma_n (L x_n - r))

    Returns ``(x, v, report)`` with ``x = prox_phi(z - L^* v)``.
    """
    if phi.dim != L.cols or psi.dim != L.rows:
        raise InputError("phi/psi dimensions do not match L")
    z = as_vector(z, L.cols, name="z")
    r = as_vector(r, L.rows, name="r")
    f_dual = Tilted(Conjugate(psi), r)
    g_dual = DualSmooth(phi, L, z)
    v0 = np.zeros(L.rows) if v0 is None else as_vector(v0, L.rows, name="v0")
    try:
        if f_dual.base.value(v0) == math.inf:
            raise DomainError("v0 is outside dom psi*")
    except CapabilityError:
        logger.info("cannot evaluate psi* at v0; domain check skipped")
    report = forward_backward(f_dual, g_dual, v0, cfg, _algorithm="dual")
    v = report.final_point
    x = g_dual.primal(v)
    report.extras.update(v=v.copy(), x=x.copy())
    return x, v, report


class ProductFunction(ProxFunction):
    """``(x_1, ..., x_m) -> sum_i f_i(x_i)`` on concatenated coordinates."""

    def __init__(self, functions: Sequence[ProxFunction]):
        self.functions = tuple(functions)
        self.dims = tuple(fi.dim for fi in self.functions)
        self.dim = sum(self.dims)
        self._cuts = np.cumsum(self.dims)[:-1]

    def parts(self, x):
        return np.split(np.asarray(x, dtype=float), self._cuts)

    def value(self, x):
        return float(sum(fi.value(xi) for fi, xi in zip(self.functions, self.parts(x))))

    def prox(self, gamma, x):
        return np.concatenate([fi.prox(gamma, xi)
                               for fi, xi in zip(self.functions, self.parts(x))])

    def witness(self):
        return np.concatenate([fi.witness() for fi in self.functions])


class BlockCoupling(SmoothFunction):
    """``(x_1, ..., x_m) -> sum_k h_k(sum_i L_ki x_i)``."""

    def __init__(self, h_list: Sequence[SmoothFunction], L: BlockOperator,
                 beta: Optional[float] = None):
        self.h_list = tuple(h_list)
        self.L = L
        self.dim = sum(L.col_dims)
        self._cuts = np.cumsum(L.col_dims)[:-1]
        if beta is None:
            energy = L.row_energy()
            beta = L.p * max(h.beta * e for h, e in zip(self.h_list, energy))
        self.beta = float(beta)

    def _mixed(self, x):
        return self.L.apply(np.split(np.asarray(x, dtype=float), self._cuts))

    def value(self, x):
        return float(sum(h.value(u) for h, u in zip(self.h_list, self._mixed(x))))

    def grad(self, x):
        grads = [h.grad(u) for h, u in zip(self.h_list, self._mixed(x))]
        return np.concatenate(self.L.adjoint(grads))


def block_forward_backward(f_list: Sequence[ProxFunction],
                           h_list: Sequence[SmoothFunction], L: BlockOperator,
                           x0_list: Sequence, cfg: Optional[SolverConfig] = None,
                           beta: Optional[float] = None) -> SolveReport:
    """Forward-backward over ``m`` coupled variables.

    Each block moves by ``y_i = x_i - gamma sum_k L_ki^*(grad h_k(sum_j L_kj x_j))``
    then ``x_i <- prox_{gamma f_i}(y_i)``. ``beta`` defaults to
    ``p * max_k beta_k * sum_i ||L_ki||^2``. The report's ``extras["blocks"]``
    holds the final blocks.
    """
    if len(f_list) != L.m or len(h_list) != L.p or len(x0_list) != L.m:
        raise ConfigError(
            f"block grid is {L.p}x{L.m} but got {len(h_list)} couplings, "
            f"{len(f_list)} functions and {len(x0_list)} starting blocks")
    for i, fi in enumerate(f_list):
        if fi.dim != L.col_dims[i]:
            raise ConfigError(f"f[{i}] has dim {fi.dim}, block column {i} has {L.col_dims[i]}")
    for k, hk in enumerate(h_list):
        if hk.dim != L.row_dims[k]:
            raise ConfigError(f"h[{k}] has dim {hk.dim}, block row {k} has {L.row_dims[k]}")
    for k, e in enumerate(L.row_energy()):
        if e <= 0:
            raise ConfigError(f"block row {k} has no nonzero operator")
    for i, (fi, x0i) in enumerate(zip(f_list, x0_list)):
        if _safe_value(fi, as_vector(x0i, fi.dim, name=f"x0[{i}]")) == math.inf:
            raise DomainError(f"x0[{i}] is outside dom f[{i}]")
    f = ProductFunction(f_list)
    g = BlockCoupling(h_list, L, beta)
    x0 = np.concatenate([as_vector(x, d) for x, d in zip(x0_list, L.col_dims)])
    report = forward_backward(f, g, x0, cfg, _algorithm="block")
    report.extras["blocks"] = f.parts(report.final_point)
    return report


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

def fixed_point_residual(f: ProxFunction, g: SmoothFunction, x, gamma: float) -> float:
    """``||x - prox_{gamma f}(x - gamma grad g(x))||``; zero exactly at minimizers."""
    x = as_vector(x, f.dim)
    return float(np.linalg.norm(x - f.prox(gamma, x - gamma * g.grad(x))))


@dataclass
class RateDiagnostics:
    """Gap sequences ``n (phi(x_n) - mu)`` and ``n^2 (phi(x_n) - mu)``."""

    n: np.ndarray
    gap: np.ndarray
    n_gap: np.ndarray
    n2_gap: np.ndarray
    n_gap_tail_max: float
    n2_gap_tail_max: float
    n_gap_first_quartile: float
    n_gap_tail_decreasing: bool

    def first_below(self, threshold: float) -> Optional[int]:
        """Smallest recorded ``n`` with gap at most ``threshold``."""
        hits = np.nonzero(self.gap <= threshold)[0]
        return int(self.n[hits[0]]) if hits.size else None

    def n2_gap_bounded(self, n_ref: int = 10, factor: float = 4.0) -> bool:
        """Whether ``n^2 gap_n <= factor * n_ref^2 gap_{n_ref}`` for all ``n >= n_ref``."""
        idx = np.nonzero(self.n == n_ref)[0]
        if not idx.size:
            raise KeyError(f"iterate {n_ref} not in trace")
        ref = self.n2_gap[idx[0]]
        return bool(np.all(self.n2_gap[self.n >= n_ref] <= factor * ref))


def rate_diagnostics(report: SolveReport, mu_ref: float) -> RateDiagnostics:
    """Rate sequences against a certified optimal value ``mu_ref``.

    Gaps within floating-point noise of zero are clipped to zero. The tail
    is the final quartile of the recorded trace.
    """
    n = np.array([k for k, _ in report.objective_trace], dtype=float)
    vals = report.objective_values()
    noise = 64 * np.finfo(float).eps * (1.0 + abs(mu_ref))
    if mu_ref > np.min(vals) + noise:
        raise ReferenceValueError(
            f"mu_ref = {mu_ref!r} exceeds the observed minimum {np.min(vals)!r}")
    gap = np.maximum(vals - mu_ref, 0.0)
    n_gap = n * gap
    n2_gap = n * n * gap
    start = (3 * len(n)) // 4
    tail = n_gap[start:]
    slack = noise * n[start:]
    decreasing = bool(tail.size >= 2 and tail[-1] <= tail[0]
                      and np.all(np.diff(tail) <= slack[1:]))
    return RateDiagnostics(
        n=n.astype(int), gap=gap, n_gap=n_gap, n2_gap=n2_gap,
        n_gap_tail_max=float(np.max(tail)) if tail.size else 0.0,
        n2_gap_tail_max=float(np.max(n2_gap[start:])) if tail.size else 0.0,
        n_gap_first_quartile=float(n_gap[len(n) // 4]),
        n_gap_tail_decreasing=decreasing)
