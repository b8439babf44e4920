"""Builders for standard instances and the composite routines derived from them.

Builders return ``(f, g)`` pairs ready for :func:`~proxkit.solve.forward_backward`.
Composite routines run the corresponding iteration and return the solution;
pass ``full_output=True`` to also get the :class:`~proxkit.solve.SolveReport`.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .core import BlockOperator, LinearOperator, as_vector, identity, sum_operator
from .errors import ConfigError, DomainError, InputError
from .prox import (ConvexSet, Indicator, L1, L1PlusQuadratic, Product,
                   ProxFunction, ReflectedTranslated, Support)
from .smooth import EnvelopeSum, LeastSquares
from .solve import (SolverConfig, StepSchedule, _iterate, _safe_value,
                    block_forward_backward, dual_forward_backward,
                    forward_backward)

#: Per-iteration agreement required between a composite loop and the
#: equivalent forward-backward step.
STEP_AGREEMENT = 1e-12


def _nonzero(L: LinearOperator, name: str = "L") -> None:
    if L.is_zero():
        raise ConfigError(f"{name} must be a nonzero operator")


def _out(result, report, full_output):
    return (result, report) if full_output else result


def build_lasso(L: LinearOperator, y):
    """``||x||_1 + ||Lx - y||^2 / 2``."""
    _nonzero(L)
    return L1(L.cols), LeastSquares(L, y)


def build_elastic_net(L: LinearOperator, y, beta_reg: float):
    """``||x||_1 + (beta_reg/2) ||x||^2 + ||Lx - y||^2 / 2``."""
    _nonzero(L)
    if not beta_reg > 0:
        raise ConfigError(f"beta_reg must be positive, got {beta_reg}")
    return L1PlusQuadratic(L.cols, beta_reg), LeastSquares(L, y)


def build_constrained_ls(C: ConvexSet, L: LinearOperator, y):
    """``||Lx - y||^2 / 2`` over ``C`` (projected Landweber)."""
    _nonzero(L)
    if C.dim != L.cols:
        raise InputError(f"C has dim {C.dim}, L has {L.cols} columns")
    return Indicator(C), LeastSquares(L, y)


def build_envelope_relaxation(f: ProxFunction, terms: Sequence[tuple]):
    """``f(x) + sum_k w_k env_{rho_k h_k}(L_k x)`` from ``(w_k, rho_k, L_k, h_k)``.

    With indicators for ``f`` and the ``h_k`` this is the least-squares
    relaxation of a convex feasibility problem.
    """
    for k, (w, rho, L, _) in enumerate(terms):
        if not w > 0:
            raise ConfigError(f"weight[{k}] must be positive")
        if not rho > 0:
            raise ConfigError(f"rho[{k}] must be positive")
        _nonzero(L, f"L[{k}]")
    g = EnvelopeSum(terms)
    if f.dim != g.dim:
        raise InputError(f"f has dim {f.dim}, terms act on dim {g.dim}")
    return f, g


def project_image(L: LinearOperator, C: ConvexSet, y, cfg: Optional[SolverConfig] = None,
                  x0=None, full_output: bool = False):
    """Projection of ``y`` onto ``L(C)``, assumed closed.

    Runs projected Landweber on ``||Lx - y||^2 / 2`` over ``C`` and returns
    ``L x``. ``report.extras["x"]`` holds the preimage.
    """
    f, g = build_constrained_ls(C, L, y)
    x0 = C.witness() if x0 is None else x0
    report = forward_backward(f, g, x0, cfg, _algorithm="projected")
    p = L.matrix @ report.final_point
    report.extras.update(x=report.final_point.copy(), p=p.copy())
    return _out(p, report, full_output)


def project_minkowski_sum(sets: Sequence[ConvexSet], y, cfg: Optional[SolverConfig] = None,
                          full_output: bool = False):
    """Projection of ``y`` onto ``C_1 + ... + C_m``, assumed closed.

    The sum is the image of ``C_1 x ... x C_m`` under the summation map, so
    this is :func:`project_image` on the product space with ``beta = m``.
    ``report.extras["components"]`` holds the per-set summands.
    """
    if not sets:
        raise ConfigError("need at least one set")
    dims = {C.dim for C in sets}
    if len(dims) != 1:
        raise InputError(f"sets live in different dimensions: {sorted(dims)}")
    d = dims.pop()
    product = Product(sets)
    p, report = project_image(sum_operator(len(sets), d), product, y, cfg, full_output=True)
    report.extras["components"] = product.parts(report.final_point)
    return _out(p, report, full_output)


def alternating_prox(f: ProxFunction, h: ProxFunction, rho: float, x0,
                     cfg: Optional[SolverConfig] = None, full_output: bool = False):
    """``x_{n+1} = prox_{rho f}(prox_{rho h} x_n)``.

    Minimizes ``f + env_{rho h}``. Each step is checked against the
    forward-backward step on that sum with ``gamma = rho``; a disagreement
    beyond ``STEP_AGREEMENT`` raises ``RuntimeError``.
    """
    cfg = cfg or SolverConfig()
    if not rho > 0:
        raise ConfigError("rho must be positive")
    if f.dim != h.dim:
        raise InputError("f and h must act on the same space")
    x0 = as_vector(x0, f.dim, name="x0")
    if _safe_value(f, x0) == np.inf:
        raise DomainError("x0 is outside the domain of f")
    g = EnvelopeSum([(1.0, rho, identity(h.dim), h)])
    sched = StepSchedule.constant(rho, g.beta)

    def step(n, x, gx):
        x_next = f.prox(rho, h.prox(rho, x))
        x_fb = f.prox(rho, x - rho * gx)
        scale = 1.0 + np.linalg.norm(x) + np.linalg.norm(x_next)
        if np.linalg.norm(x_next - x_fb) > STEP_AGREEMENT * scale:
            raise RuntimeError(f"composition and forward-backward steps disagree at n={n}")
        return x_next, rho

    report = _iterate(step, lambda x: _safe_value(f, x) + g.value(x), g.grad,
                      x0, cfg, "alternating", sched)
    return _out(report.final_point, report, full_output)


def barycentric_prox(h_list: Sequence[ProxFunction], rho: float, x0,
                     cfg: Optional[SolverConfig] = None, full_output: bool = False):
    """``x_{n+1} = mean_k prox_{rho h_k} x_n``, minimizing ``sum_k env_{rho h_k}``."""
    cfg = cfg or SolverConfig()
    if not h_list:
        raise ConfigError("need at least one function")
    if not rho > 0:
        raise ConfigError("rho must be positive")
    dims = {h.dim for h in h_list}
    if len(dims) != 1:
        raise InputError("all functions must act on the same space")
    d = dims.pop()
    x0 = as_vector(x0, d, name="x0")
    p = len(h_list)
    g = EnvelopeSum([(1.0, rho, identity(d), h) for h in h_list])
    sched = StepSchedule.constant(rho / p, g.beta)

    def step(n, x, gx):
        acc = np.zeros(d)
        for h in h_list:
            acc = acc + h.prox(rho, x)
        return acc / p, rho / p

    report = _iterate(step, g.value, g.grad, x0, cfg, "barycentric", sched)
    return _out(report.final_point, report, full_output)


def bivariate_coupling(f: ProxFunction, ell: ProxFunction, z, rho: float, x0,
                       cfg: Optional[SolverConfig] = None, full_output: bool = False):
    """Minimize ``f(x) + ell(w) + ||x + w - z||^2 / (2 rho)`` over ``(x, w)``.

    Alternating prox on ``f`` and ``h: y -> ell(z - y)``, whose prox is
    ``x -> z - prox_{rho ell}(z - x)``. Returns ``(x, w)`` with
    ``w = prox_{rho ell}(z - x)``, the optimal partner of ``x``.
    """
    if f.dim != ell.dim:
        raise InputError("f and ell must act on the same space")
    z = as_vector(z, f.dim, name="z")
    h = ReflectedTranslated(ell, z)
    x, report = alternating_prox(f, h, rho, x0, cfg, full_output=True)
    report.algorithm = "bivariate"
    w = ell.prox(rho, z - x)
    report.extras["w"] = w.copy()
    return _out((x, w), report, full_output)


def best_approximation(C: ConvexSet, D: ConvexSet, L: LinearOperator, z,
                       cfg: Optional[SolverConfig] = None, full_output: bool = False):
    """Projection of ``z`` onto ``{x in C : Lx in D}`` with a dual certificate.

    Returns ``(x, v)`` where ``x = proj_C(z - L^* v)``.
    """
    if C.dim != L.cols or D.dim != L.rows:
        raise InputError("C/D dimensions do not match L")
    x, v, report = dual_forward_backward(Indicator(C), Indicator(D), L, z,
                                         np.zeros(L.rows), None, cfg)
    return _out((x, v), report, full_output)


def support_regularized(phi: ProxFunction, D: ConvexSet, L: LinearOperator, r, z,
                        cfg: Optional[SolverConfig] = None, full_output: bool = False):
    """Minimize ``phi(x) + sigma_D(Lx - r) + ||x - z||^2 / 2`` for compact ``D``.

    The dual step is a projection onto ``D``. Returns ``(x, v)``.
    """
    if not D.bounded:
        raise ConfigError("D must be compact")
    v0 = np.zeros(D.dim)
    if not D.contains(v0):
        v0 = D.witness()
    x, v, report = dual_forward_backward(phi, Support(D), L, z, r, v0, cfg)
    return _out((x, v), report, full_output)


def multichannel_beta(L: BlockOperator) -> float:
    """``sum_k sum_i ||L_ki||^2``, valid for quadratic data couplings."""
    return float(sum(L.row_energy()))


def multichannel_recovery(C_list: Sequence[ConvexSet], L: BlockOperator, y_list,
                          cfg: Optional[SolverConfig] = None, x0_list=None,
                          full_output: bool = False):
    """Minimize ``(1/2) sum_k ||y_k - sum_i L_ki x_i||^2`` with ``x_i in C_i``.

    Returns the list of recovered blocks.
    """
    if len(C_list) != L.m or len(y_list) != L.p:
        raise ConfigError(f"block grid is {L.p}x{L.m} but got {len(C_list)} sets "
                          f"and {len(y_list)} observations")
    f_list = [Indicator(C) for C in C_list]
    h_list = [LeastSquares(identity(d), y) for d, y in zip(L.row_dims, y_list)]
    x0_list = [C.witness() for C in C_list] if x0_list is None else x0_list
    report = block_forward_backward(f_list, h_list, L, x0_list, cfg,
                                    beta=multichannel_beta(L))
    report.algorithm = "multichannel"
    return _out(report.extras["blocks"], report, full_output)
