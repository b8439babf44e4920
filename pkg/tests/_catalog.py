"""Deterministic instances of every prox, set and smooth kind, shared by tests."""

import numpy as np

from proxkit.core import BlockOperator, LinearOperator, diag, identity
from proxkit.prox import (Affine, Ball, Box, Conjugate, Halfspace, Hyperplane, Indicator,
                          L1, L1PlusQuadratic, NonnegOrthant, Product, QuadraticData,
                          ReflectedTranslated, Scaled, Separable, Singleton, Support,
                          Tilted, WholeSpace, Zero)
from proxkit.smooth import (DualSmooth, EnvelopeSum, LeastSquares, MultiQuadratic,
                            ZeroSmooth, quadratic_coupling)
from proxkit.solve import BlockCoupling

DIM = 3


def _rotation(seed=7):
    q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(DIM, DIM)))
    return q


def catalog_sets():
    return [
        ("whole", WholeSpace(DIM)),
        ("box", Box([0, -1, 0.5], [1, 1, 2])),
        ("box_halfopen", Box([0, -np.inf, -np.inf], [np.inf, 1, np.inf])),
        ("ball", Ball([1, 0, -1], 1.5)),
        ("halfspace", Halfspace([1, 2, -1], 0.5)),
        ("hyperplane", Hyperplane([1, 1, 1], 1)),
        ("singleton", Singleton([0.5, -0.5, 2])),
        ("affine", Affine([[1, 0, 1], [0, 1, -1]], [1, 2])),
        ("orthant", NonnegOrthant(DIM)),
        ("product", Product([Ball([0, 0], 1), Box([-1], [0])])),
    ]


def catalog_functions():
    """Every ProxFunction kind on R^3, including nested compositions."""
    L = LinearOperator([[1, 2, 0], [0, 1, 1]])
    fns = [
        ("zero", Zero(DIM)),
        ("l1", L1(DIM)),
        ("l1_quadratic", L1PlusQuadratic(DIM, 0.7)),
        ("separable", Separable([L1(1), Zero(1), Indicator(Box([-1], [1]))])),
        ("separable_rotated", Separable([L1(1), L1PlusQuadratic(1, 2.0),
                                         Indicator(Halfspace([1], 0.2))], _rotation())),
        ("scaled", Scaled(L1(DIM), 2.5)),
        ("reflected", ReflectedTranslated(L1(DIM), [1, -2, 0.5])),
        ("support_ball", Support(Ball([0.5, 0, 0], 2))),
        ("support_box", Support(Box([-1, 0, -2], [1, 3, 0]))),
        ("support_halfspace", Support(Halfspace([1, -1, 0], 1))),
        ("conjugate_l1", Conjugate(L1(DIM))),
        ("conjugate_ball", Conjugate(Indicator(Ball([0, 0, 0], 1)))),
        ("quadratic_data", QuadraticData(L, [1, -1])),
        ("tilted", Tilted(L1(DIM), [0.3, -0.2, 1])),
    ]
    fns += [(f"indicator_{name}", Indicator(C)) for name, C in catalog_sets()]
    return fns


def catalog_smooth():
    L = LinearOperator([[1, 2, 0], [0, 1, 1], [1, 0, -1]])
    blk = BlockOperator([[LinearOperator([[1, 0], [0, 2]]), LinearOperator([[1], [1]])]])
    return [
        ("zero", ZeroSmooth(DIM)),
        ("least_squares", LeastSquares(L, [1, 0, -1])),
        ("multi_quadratic", MultiQuadratic([(2.0, identity(DIM), [1, 1, 1]),
                                            (0.5, L, [0, 1, 0])])),
        ("envelope_ball", EnvelopeSum([(1.0, 0.5, identity(DIM), Indicator(Ball([0, 0, 0], 1)))])),
        ("envelope_mixed", EnvelopeSum([(1.5, 2.0, L, L1(DIM)),
                                        (0.5, 1.0, diag([1, 2, 3]),
                                         Indicator(Box([0, 0, 0], [1, 1, 1])))])),
        ("quadratic_coupling", quadratic_coupling(L1(DIM), [1, 2, -1], 0.8)),
        ("dual", DualSmooth(Indicator(NonnegOrthant(DIM)), L, [1, -1, 2])),
        ("block", BlockCoupling([LeastSquares(identity(2), [1, -1])], blk)),
    ]


def catalog_envelopes():
    """``(name, h, rho)`` triples for Moreau gradient checks."""
    return [
        ("l1", L1(DIM), 1.0),
        ("ball", Indicator(Ball([0, 0, 0], 1)), 0.5),
        ("box", Indicator(Box([0, -1, 0.5], [1, 1, 2])), 2.0),
        ("hyperplane", Indicator(Hyperplane([1, 1, 1], 1)), 1.0),
        ("support_box", Support(Box([-1, 0, -2], [1, 3, 0])), 0.7),
        ("l1_quadratic", L1PlusQuadratic(DIM, 0.7), 1.3),
    ]
