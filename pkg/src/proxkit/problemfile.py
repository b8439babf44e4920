"""JSON problem files: parsing, serialization and instance building.

A problem file looks like::

    {"schema_version": 1,
     "kind": "lasso",
     "payload": {"L": {"rows": 2, "cols": 2, "data": [1, 0, 0, 2]},
                 "y": [1, 2], "mu": 1.375},
     "solver": {"algorithm": "fb", "max_iter": 500, "tol": 1e-9, "step": "auto"}}

Matrices are row-major with explicit ``rows``/``cols``. Sets and functions
are tagged dictionaries (``{"type": "ball", "center": [...], "radius": 1}``);
``null`` bounds in a box mean infinite. Every validation error names the
offending field path.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from . import problems
from .core import BlockOperator, LinearOperator, sum_operator
from .errors import ConfigError, ProxkitError
from .prox import (Affine, Ball, Box, Conjugate, ConvexSet, Halfspace, Hyperplane,
                   Indicator, L1, L1PlusQuadratic, NonnegOrthant, Product, ProxFunction,
                   QuadraticData, ReflectedTranslated, Scaled, Separable, Singleton,
                   Support, Tilted, WholeSpace, Zero)
from .smooth import (DualSmooth, EnvelopeSum, LeastSquares, MultiQuadratic,
                     SmoothFunction, ZeroSmooth)
from .solve import (BlockCoupling, SolveReport, SolverConfig, StepSchedule,
                    fista, forward_backward, nominal_beta, projected_gradient)

SCHEMA_VERSION = 1

KINDS = ("lasso", "elastic_net", "constrained_ls", "envelope", "minkowski_projection",
         "image_projection", "alternating", "barycentric", "bivariate",
         "best_approximation", "support_regularized", "multichannel", "custom_fg")

ALGORITHMS = ("fb", "projected", "fista", "dual", "block")

_SOLVER_DEFAULTS = {"max_iter": 5000, "tol": 1e-9, "step": "auto", "trace_every": 1}

_DEFAULT_ALGORITHM = {
    "constrained_ls": "projected", "image_projection": "projected",
    "minkowski_projection": "projected", "best_approximation": "dual",
    "support_regularized": "dual", "multichannel": "block",
}


class ProblemFileError(ProxkitError):
    """Malformed problem file; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass
class ProblemFile:
    schema_version: int
    kind: str
    payload: dict
    solver: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "kind": self.kind,
                "payload": copy.deepcopy(self.payload), "solver": dict(self.solver)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Field readers
# ---------------------------------------------------------------------------

def _get(node: dict, key: str, path: str, default: Any = ...):
    if not isinstance(node, dict):
        raise ProblemFileError(path, "expected an object")
    if key not in node:
        if default is ...:
            raise ProblemFileError(f"{path}.{key}", "missing field")
        return default
    return node[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProblemFileError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ProblemFileError(path, "must be finite")
    return float(value)


def _positive(value, path: str) -> float:
    v = _number(value, path)
    if not v > 0:
        raise ProblemFileError(path, f"must be positive, got {v}")
    return v


def _integer(value, path: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ProblemFileError(path, f"expected an integer >= {minimum}, got {value!r}")
    return value


def _vector(value, path: str, dim: Optional[int] = None, allow_null: bool = False,
            null_as: float = math.nan) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ProblemFileError(path, "expected a non-empty list of numbers")
    out = []
    for k, v in enumerate(value):
        if v is None and allow_null:
            out.append(null_as)
        else:
            out.append(_number(v, f"{path}[{k}]"))
    if dim is not None and len(out) != dim:
        raise ProblemFileError(path, f"expected length {dim}, got {len(out)}")
    return np.array(out)


def _matrix(node, path: str) -> LinearOperator:
    rows = _integer(_get(node, "rows", path), f"{path}.rows")
    cols = _integer(_get(node, "cols", path), f"{path}.cols")
    data = _get(node, "data", path)
    if not isinstance(data, list):
        raise ProblemFileError(f"{path}.data", "expected a list of numbers")
    if len(data) != rows * cols:
        bad = "cols" if len(data) % rows == 0 or len(data) % cols != 0 else "rows"
        raise ProblemFileError(f"{path}.{bad}",
                               f"rows*cols = {rows}*{cols} = {rows * cols} but data has "
                               f"{len(data)} entries")
    vals = [_number(v, f"{path}.data[{k}]") for k, v in enumerate(data)]
    return LinearOperator(np.array(vals).reshape(rows, cols))


def _block_matrix(node, path: str) -> BlockOperator:
    blocks = _get(node, "blocks", path)
    if not isinstance(blocks, list) or not blocks or not all(isinstance(r, list) for r in blocks):
        raise ProblemFileError(f"{path}.blocks", "expected a non-empty list of rows")
    grid = [[None if b is None else _matrix(b, f"{path}.blocks[{k}][{i}]")
             for i, b in enumerate(row)] for k, row in enumerate(blocks)]
    row_dims = _get(node, "row_dims", path, None)
    col_dims = _get(node, "col_dims", path, None)
    if row_dims is not None:
        row_dims = [_integer(d, f"{path}.row_dims[{k}]") for k, d in enumerate(row_dims)]
    if col_dims is not None:
        col_dims = [_integer(d, f"{path}.col_dims[{k}]") for k, d in enumerate(col_dims)]
    try:
        return BlockOperator(grid, row_dims, col_dims)
    except ValueError as exc:
        raise ProblemFileError(path, str(exc)) from exc


def _check_dim(obj_dim: int, want: int, path: str, what: str = "dimension"):
    if obj_dim != want:
        raise ProblemFileError(path, f"{what} {obj_dim} does not match expected {want}")


def parse_set(node, path: str) -> ConvexSet:
    kind = _get(node, "type", path)
    try:
        if kind == "whole":
            return WholeSpace(_integer(_get(node, "dim", path), f"{path}.dim"))
        if kind == "orthant":
            return NonnegOrthant(_integer(_get(node, "dim", path), f"{path}.dim"))
        if kind == "box":
            lo = _vector(_get(node, "lo", path), f"{path}.lo", allow_null=True, null_as=-math.inf)
            hi = _vector(_get(node, "hi", path), f"{path}.hi", lo.size, True, math.inf)
            return Box(lo, hi)
        if kind == "ball":
            center = _vector(_get(node, "center", path), f"{path}.center")
            return Ball(center, _positive(_get(node, "radius", path), f"{path}.radius"))
        if kind in ("halfspace", "hyperplane"):
            a = _vector(_get(node, "a", path), f"{path}.a")
            b = _number(_get(node, "b", path), f"{path}.b")
            return Halfspace(a, b) if kind == "halfspace" else Hyperplane(a, b)
        if kind == "singleton":
            return Singleton(_vector(_get(node, "point", path), f"{path}.point"))
        if kind == "affine":
            A = _matrix(_get(node, "A", path), f"{path}.A")
            c = _vector(_get(node, "c", path), f"{path}.c", A.rows)
            return Affine(A.matrix, c)
        if kind == "product":
            parts = _get(node, "sets", path)
            if not isinstance(parts, list) or not parts:
                raise ProblemFileError(f"{path}.sets", "expected a non-empty list")
            return Product([parse_set(s, f"{path}.sets[{k}]") for k, s in enumerate(parts)])
    except ProblemFileError:
        raise
    except ProxkitError as exc:
        raise ProblemFileError(path, str(exc)) from exc
    raise ProblemFileError(f"{path}.type", f"unknown set type {kind!r}; expected one of "
                           "whole, orthant, box, ball, halfspace, hyperplane, singleton, "
                           "affine, product")


def parse_function(node, path: str) -> ProxFunction:
    kind = _get(node, "type", path)
    try:
        if kind == "zero":
            return Zero(_integer(_get(node, "dim", path), f"{path}.dim"))
        if kind == "l1":
            return L1(_integer(_get(node, "dim", path), f"{path}.dim"))
        if kind == "l1_quadratic":
            return L1PlusQuadratic(_integer(_get(node, "dim", path), f"{path}.dim"),
                                   _positive(_get(node, "beta", path), f"{path}.beta"))
        if kind == "indicator":
            return Indicator(parse_set(_get(node, "set", path), f"{path}.set"))
        if kind == "support":
            return Support(parse_set(_get(node, "set", path), f"{path}.set"))
        if kind == "conjugate":
            return Conjugate(parse_function(_get(node, "base", path), f"{path}.base"))
        if kind == "scaled":
            return Scaled(parse_function(_get(node, "base", path), f"{path}.base"),
                          _positive(_get(node, "weight", path), f"{path}.weight"))
        if kind == "reflected":
            base = parse_function(_get(node, "base", path), f"{path}.base")
            return ReflectedTranslated(base, _vector(_get(node, "z", path), f"{path}.z", base.dim))
        if kind == "tilted":
            base = parse_function(_get(node, "base", path), f"{path}.base")
            return Tilted(base, _vector(_get(node, "r", path), f"{path}.r", base.dim))
        if kind == "quadratic_data":
            L = _matrix(_get(node, "L", path), f"{path}.L")
            return QuadraticData(L, _vector(_get(node, "y", path), f"{path}.y", L.rows))
        if kind == "separable":
            comps = _get(node, "components", path)
            if not isinstance(comps, list) or not comps:
                raise ProblemFileError(f"{path}.components", "expected a non-empty list")
            parsed = [parse_function(c, f"{path}.components[{k}]") for k, c in enumerate(comps)]
            basis = _get(node, "basis", path, None)
            if basis is not None:
                basis = _matrix(basis, f"{path}.basis").matrix
            return Separable(parsed, basis)
    except ProblemFileError:
        raise
    except (ProxkitError, ValueError) as exc:
        raise ProblemFileError(path, str(exc)) from exc
    raise ProblemFileError(f"{path}.type", f"unknown function type {kind!r}; expected one of "
                           "zero, l1, l1_quadratic, indicator, support, conjugate, scaled, "
                           "reflected, tilted, quadratic_data, separable")


def parse_smooth(node, path: str) -> SmoothFunction:
    kind = _get(node, "type", path)
    try:
        if kind == "zero":
            return ZeroSmooth(_integer(_get(node, "dim", path), f"{path}.dim"))
        if kind == "least_squares":
            L = _matrix(_get(node, "L", path), f"{path}.L")
            return LeastSquares(L, _vector(_get(node, "y", path), f"{path}.y", L.rows))
        if kind == "multi_quadratic":
            terms = []
            for k, t in enumerate(_list(_get(node, "terms", path), f"{path}.terms")):
                tp = f"{path}.terms[{k}]"
                L = _matrix(_get(t, "L", tp), f"{tp}.L")
                terms.append((_positive(_get(t, "weight", tp, 1.0), f"{tp}.weight"), L,
                              _vector(_get(t, "y", tp), f"{tp}.y", L.rows)))
            return MultiQuadratic(terms)
        if kind == "envelope":
            return EnvelopeSum(_envelope_terms(_get(node, "terms", path), f"{path}.terms"))
    except ProblemFileError:
        raise
    except (ProxkitError, ValueError) as exc:
        raise ProblemFileError(path, str(exc)) from exc
    raise ProblemFileError(f"{path}.type", f"unknown smooth type {kind!r}; expected one of "
                           "zero, least_squares, multi_quadratic, envelope")


def _list(value, path):
    if not isinstance(value, list) or not value:
        raise ProblemFileError(path, "expected a non-empty list")
    return value


def _envelope_terms(node, path):
    terms = []
    for k, t in enumerate(_list(node, path)):
        tp = f"{path}[{k}]"
        L = _matrix(_get(t, "L", tp), f"{tp}.L")
        h = parse_function(_get(t, "h", tp), f"{tp}.h")
        _check_dim(h.dim, L.rows, f"{tp}.h", "h dimension")
        terms.append((_positive(_get(t, "weight", tp, 1.0), f"{tp}.weight"),
                      _positive(_get(t, "rho", tp), f"{tp}.rho"), L, h))
    return terms


# ---------------------------------------------------------------------------
# Parsing and serialization
# ---------------------------------------------------------------------------

def _normalize_solver(kind: str, solver) -> dict:
    if solver is None:
        solver = {}
    if not isinstance(solver, dict):
        raise ProblemFileError("solver", "expected an object")
    unknown = set(solver) - {"algorithm", *_SOLVER_DEFAULTS}
    if unknown:
        raise ProblemFileError(f"solver.{sorted(unknown)[0]}", "unknown solver field")
    out = dict(_SOLVER_DEFAULTS)
    out["algorithm"] = _DEFAULT_ALGORITHM.get(kind, "fb")
    out.update(solver)
    if out["algorithm"] not in ALGORITHMS:
        raise ProblemFileError("solver.algorithm", f"unknown algorithm {out['algorithm']!r}; "
                               f"expected one of {', '.join(ALGORITHMS)}")
    _integer(out["max_iter"], "solver.max_iter")
    _positive(out["tol"], "solver.tol")
    _integer(out["trace_every"], "solver.trace_every")
    if out["step"] != "auto":
        _positive(out["step"], "solver.step")
    return out


def problem_from_dict(doc) -> ProblemFile:
    """Validate a decoded document; raises :class:`ProblemFileError`."""
    if not isinstance(doc, dict):
        raise ProblemFileError("", "problem file must be a JSON object")
    version = _get(doc, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ProblemFileError("schema_version", f"unsupported schema version {version!r}; "
                               f"this build reads version {SCHEMA_VERSION}")
    kind = _get(doc, "kind", "")
    if kind not in KINDS:
        raise ProblemFileError("kind", f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    payload = _get(doc, "payload", "")
    if not isinstance(payload, dict):
        raise ProblemFileError("payload", "expected an object")
    pf = ProblemFile(SCHEMA_VERSION, kind, copy.deepcopy(payload),
                     _normalize_solver(kind, doc.get("solver")))
    build_instance(pf)
    return pf


def parse_problem_text(text: str) -> ProblemFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError("", f"invalid JSON: {exc}") from exc
    return problem_from_dict(doc)


def parse_problem(path) -> ProblemFile:
    """Read and validate a UTF-8 JSON problem file."""
    with open(path, encoding="utf-8") as fh:
        return parse_problem_text(fh.read())


def serialize_problem(pf: ProblemFile) -> str:
    return pf.to_json()


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------

@dataclass
class Instance:
    """A runnable problem plus the pieces the ``check`` command inspects."""

    kind: str
    algorithm: str
    beta: float
    run: Callable[[SolverConfig], SolveReport]
    operators: dict = field(default_factory=dict)
    prox_terms: list = field(default_factory=list)
    sets: list = field(default_factory=list)
    smooth_terms: list = field(default_factory=list)
    objective: Optional[Callable] = None
    dim: int = 0
    mu: Optional[float] = None
    fixed_step: Optional[float] = None

    @property
    def monotone(self) -> bool:
        """Whether the objective trace must be nonincreasing."""
        return self.algorithm != "fista"

    def schedule(self, step) -> Optional[StepSchedule]:
        """Schedule for a ``step`` value (``"auto"`` gives ``None``)."""
        if step == "auto":
            return None
        if self.algorithm == "fista":
            raise ConfigError("fista uses step 1/beta; set step to \"auto\"")
        if self.fixed_step is not None:
            raise ConfigError(f"kind {self.kind} fixes the step at "
                              f"{self.fixed_step:.12g}; set step to \"auto\"")
        return StepSchedule.constant(float(step), nominal_beta(self.beta))


def _allowed(kind, algorithm, choices):
    if algorithm not in choices:
        raise ProblemFileError("solver.algorithm", f"kind {kind} supports "
                               f"{', '.join(choices)}; got {algorithm}")


def _fg_instance(pf, f, g, x0, algorithms, mu=None):
    algorithm = pf.solver["algorithm"]
    _allowed(pf.kind, algorithm, algorithms)
    if algorithm == "projected" and not isinstance(f, Indicator):
        raise ProblemFileError("solver.algorithm", "projected requires an indicator f")

    def run(cfg):
        if algorithm == "fista":
            return fista(f, g, x0, cfg)
        if algorithm == "projected":
            return projected_gradient(f.set, g, x0, cfg)
        return forward_backward(f, g, x0, cfg)

    inst = Instance(pf.kind, algorithm, g.beta, run, prox_terms=[("f", f)],
                    smooth_terms=[("g", g)], objective=lambda x: f.value(x) + g.value(x),
                    dim=f.dim, mu=mu)
    if isinstance(f, Indicator):
        inst.sets.append(("C", f.set))
    return inst


def _x0(payload, default, dim):
    if "x0" in payload:
        return _vector(payload["x0"], "payload.x0", dim)
    return default


def build_instance(pf: ProblemFile) -> Instance:
    """Turn a validated problem file into a runnable :class:`Instance`."""
    P = pf.payload
    kind = pf.kind
    mu = _number(P["mu"], "payload.mu") if "mu" in P else None
    fb_like = ("fb", "fista")
    try:
        if kind in ("lasso", "elastic_net", "constrained_ls"):
            L = _matrix(_get(P, "L", "payload"), "payload.L")
            y = _vector(_get(P, "y", "payload"), "payload.y", L.rows)
            if kind == "lasso":
                f, g = problems.build_lasso(L, y)
                algs = fb_like
            elif kind == "elastic_net":
                f, g = problems.build_elastic_net(
                    L, y, _positive(_get(P, "beta_reg", "payload"), "payload.beta_reg"))
                algs = fb_like
            else:
                C = parse_set(_get(P, "C", "payload"), "payload.C")
                _check_dim(C.dim, L.cols, "payload.C", "set dimension")
                f, g = problems.build_constrained_ls(C, L, y)
                algs = ("projected", "fb", "fista")
            inst = _fg_instance(pf, f, g, _x0(P, f.witness(), L.cols), algs, mu)
            inst.operators["L"] = L
            return inst

        if kind in ("envelope", "custom_fg"):
            f = parse_function(_get(P, "f", "payload"), "payload.f")
            if kind == "envelope":
                terms = _envelope_terms(_get(P, "terms", "payload"), "payload.terms")
                for k, (_, _, L, _) in enumerate(terms):
                    _check_dim(L.cols, f.dim, f"payload.terms[{k}].L.cols", "columns")
                f, g = problems.build_envelope_relaxation(f, terms)
                ops = {f"L[{k}]": t[2] for k, t in enumerate(terms)}
                extra = [(f"h[{k}]", t[3]) for k, t in enumerate(terms)]
            else:
                g = parse_smooth(_get(P, "g", "payload"), "payload.g")
                _check_dim(g.dim, f.dim, "payload.g", "smooth term dimension")
                ops, extra = {}, []
            inst = _fg_instance(pf, f, g, _x0(P, f.witness(), f.dim),
                                ("fb", "fista", "projected"), mu)
            inst.operators.update(ops)
            inst.prox_terms.extend(extra)
            return inst

        if kind in ("image_projection", "minkowski_projection"):
            _allowed(kind, pf.solver["algorithm"], ("projected", "fb"))
            if kind == "image_projection":
                L = _matrix(_get(P, "L", "payload"), "payload.L")
                C = parse_set(_get(P, "C", "payload"), "payload.C")
                _check_dim(C.dim, L.cols, "payload.C", "set dimension")
                y = _vector(_get(P, "y", "payload"), "payload.y", L.rows)
                x0 = _x0(P, C.witness(), L.cols)
                run = lambda cfg: problems.project_image(L, C, y, cfg, x0, full_output=True)[1]
                sets = [("C", C)]
                beta = L.norm_bound() ** 2
                ops = {"L": L}
            else:
                sets_in = _list(_get(P, "sets", "payload"), "payload.sets")
                sets = [(f"C[{k}]", parse_set(s, f"payload.sets[{k}]"))
                        for k, s in enumerate(sets_in)]
                d = sets[0][1].dim
                for k, (_, C) in enumerate(sets):
                    _check_dim(C.dim, d, f"payload.sets[{k}]", "set dimension")
                y = _vector(_get(P, "y", "payload"), "payload.y", d)
                only = [C for _, C in sets]
                run = lambda cfg: problems.project_minkowski_sum(only, y, cfg, full_output=True)[1]
                beta = float(len(sets))
                ops = {"sum": sum_operator(len(sets), d)}
                L = ops["sum"]
                C = Product(only)
            g = LeastSquares(L, y)
            return Instance(kind, pf.solver["algorithm"], beta, run, operators=ops,
                            prox_terms=[], sets=sets, smooth_terms=[("g", g)],
                            objective=lambda x: Indicator(C).value(x) + g.value(x),
                            dim=L.cols, mu=mu)

        if kind in ("alternating", "barycentric", "bivariate"):
            _allowed(kind, pf.solver["algorithm"], ("fb",))
            rho = _positive(_get(P, "rho", "payload"), "payload.rho")
            if kind == "barycentric":
                hs = [(f"h[{k}]", parse_function(h, f"payload.h_list[{k}]"))
                      for k, h in enumerate(_list(_get(P, "h_list", "payload"), "payload.h_list"))]
                d = hs[0][1].dim
                for k, (_, h) in enumerate(hs):
                    _check_dim(h.dim, d, f"payload.h_list[{k}]", "function dimension")
                x0 = _x0(P, np.zeros(d), d)
                only = [h for _, h in hs]
                run = lambda cfg: problems.barycentric_prox(only, rho, x0, cfg, full_output=True)[1]
                g = EnvelopeSum([(1.0, rho, LinearOperator(np.eye(d)), h) for h in only])
                terms = hs
                step = rho / len(only)
                objective = g.value
            else:
                f = parse_function(_get(P, "f", "payload"), "payload.f")
                second = "h" if kind == "alternating" else "ell"
                h = parse_function(_get(P, second, "payload"), f"payload.{second}")
                _check_dim(h.dim, f.dim, f"payload.{second}", "function dimension")
                d = f.dim
                x0 = _x0(P, f.witness(), d)
                if kind == "alternating":
                    run = lambda cfg: problems.alternating_prox(f, h, rho, x0, cfg,
                                                                full_output=True)[1]
                    hh = h
                else:
                    z = _vector(_get(P, "z", "payload"), "payload.z", d)
                    run = lambda cfg: problems.bivariate_coupling(f, h, z, rho, x0, cfg,
                                                                  full_output=True)[1]
                    hh = ReflectedTranslated(h, z)
                g = EnvelopeSum([(1.0, rho, LinearOperator(np.eye(d)), hh)])
                terms = [("f", f), (second, h)]
                step = rho
                objective = (lambda x, f=f: f.value(x) + g.value(x))
            return Instance(kind, "fb", g.beta, run, prox_terms=terms,
                            smooth_terms=[("envelope", g)], objective=objective,
                            dim=d, mu=mu, fixed_step=step)

        if kind in ("best_approximation", "support_regularized"):
            _allowed(kind, pf.solver["algorithm"], ("dual",))
            L = _matrix(_get(P, "L", "payload"), "payload.L")
            D = parse_set(_get(P, "D", "payload"), "payload.D")
            _check_dim(D.dim, L.rows, "payload.D", "set dimension")
            z = _vector(_get(P, "z", "payload"), "payload.z", L.cols)
            if kind == "best_approximation":
                C = parse_set(_get(P, "C", "payload"), "payload.C")
                _check_dim(C.dim, L.cols, "payload.C", "set dimension")
                run = lambda cfg: problems.best_approximation(C, D, L, z, cfg,
                                                              full_output=True)[1]
                phi = Indicator(C)
                sets = [("C", C), ("D", D)]
                terms = []
            else:
                phi = parse_function(_get(P, "phi", "payload"), "payload.phi")
                _check_dim(phi.dim, L.cols, "payload.phi", "function dimension")
                r = _vector(_get(P, "r", "payload"), "payload.r", L.rows)
                run = lambda cfg: problems.support_regularized(phi, D, L, r, z, cfg,
                                                               full_output=True)[1]
                sets = [("D", D)]
                terms = [("phi", phi), ("support(D)", Support(D))]
            g = DualSmooth(phi, L, z)
            return Instance(kind, "dual", g.beta, run, operators={"L": L},
                            prox_terms=terms, sets=sets, smooth_terms=[("dual", g)],
                            dim=L.rows, mu=mu)

        if kind == "multichannel":
            _allowed(kind, pf.solver["algorithm"], ("block",))
            L = _block_matrix(_get(P, "L", "payload"), "payload.L")
            sets = [(f"C[{i}]", parse_set(s, f"payload.sets[{i}]"))
                    for i, s in enumerate(_list(_get(P, "sets", "payload"), "payload.sets"))]
            if len(sets) != L.m:
                raise ProblemFileError("payload.sets", f"expected {L.m} sets, got {len(sets)}")
            for i, (_, C) in enumerate(sets):
                _check_dim(C.dim, L.col_dims[i], f"payload.sets[{i}]", "set dimension")
            ys = _list(_get(P, "y_list", "payload"), "payload.y_list")
            if len(ys) != L.p:
                raise ProblemFileError("payload.y_list", f"expected {L.p} vectors, got {len(ys)}")
            y_list = [_vector(y, f"payload.y_list[{k}]", L.row_dims[k]) for k, y in enumerate(ys)]
            x0_list = None
            if "x0_list" in P:
                x0_list = [_vector(x, f"payload.x0_list[{i}]", L.col_dims[i])
                           for i, x in enumerate(_list(P["x0_list"], "payload.x0_list"))]
            only = [C for _, C in sets]
            run = lambda cfg: problems.multichannel_recovery(only, L, y_list, cfg, x0_list,
                                                             full_output=True)[1]
            beta = problems.multichannel_beta(L)
            g = BlockCoupling([LeastSquares(LinearOperator(np.eye(d)), y)
                               for d, y in zip(L.row_dims, y_list)], L, beta)
            ops = {f"L[{k}][{i}]": b for k, row in enumerate(L.blocks)
                   for i, b in enumerate(row) if b is not None}
            return Instance(kind, "block", beta, run, operators=ops, sets=sets,
                            smooth_terms=[("coupling", g)], dim=g.dim, mu=mu)
    except ProblemFileError:
        raise
    except ProxkitError as exc:
        raise ProblemFileError("payload", str(exc)) from exc
    raise ProblemFileError("kind", f"unknown kind {kind!r}")


def solver_config(pf: ProblemFile, instance: Instance, **overrides) -> SolverConfig:
    """Solver settings from the file, with non-``None`` overrides applied."""
    s = dict(pf.solver)
    s.update({k: v for k, v in overrides.items() if v is not None})
    return SolverConfig(schedule=instance.schedule(s["step"]), max_iter=int(s["max_iter"]),
                        tol=float(s["tol"]), trace_every=int(s["trace_every"]))
