"""Metric families, covector-field specifications and h-vector construction.

Built-in fundamental functions:

* ``euclidean``       L = |y|
* ``riemannian``      L = sqrt(a_ij(x) y^i y^j) for a symmetric positive
                      definite coefficient matrix given as expressions in x
* ``randers``         L = sqrt(a_ij(x) y^i y^j) + b0_i(x) y^i
* ``expression``      L given directly as an expression in x and y
* ``matsumoto_change`` L = base^2 / (base - beta) driven by an h-vector

The h-vector covector field is constructed as b_i = c_i(x) + rho(x) l_i with
l_i the unit covector of the base metric.  This family satisfies the
directional-derivative structure d b_i / dy_k = (rho/L) h_ik identically for
any base metric, which makes every closed-form transformation testable; how
close b comes to the full defining contraction identity is measured
separately by :func:`h_vector_defect`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expressions as ex
from .jets import (
    EvaluationDomainError,
    FiberPoint,
    Jet,
    ScalarField,
    jet_eval,
    scalar_value,
    smooth_sqrt,
)
from .linalg import dot, generic_inverse, mat_vec, omat, values


class ConfigError(ValueError):
    """Structural problem in a metric / h-vector / harness document."""


METRIC_KINDS = ("euclidean", "riemannian", "randers", "expression", "matsumoto_change")


@dataclass(frozen=True)
class HVectorSpec:
    """Covector components c_i(x) and scalar rho(x), both x-only expressions."""

    c: tuple
    rho: object

    @property
    def n(self) -> int:
        return len(self.c)

    def is_zero(self) -> bool:
        return all(ex.is_constant_zero(ci) for ci in self.c) and ex.is_constant_zero(
            self.rho
        )

    def to_document(self) -> dict:
        return {"c": [ex.unparse(ci) for ci in self.c], "rho": ex.unparse(self.rho)}

    def covector(self, x):
        return [ex.evaluate(ci, x, None) for ci in self.c]

    def rho_at(self, x):
        return ex.evaluate(self.rho, x, None)


@dataclass(frozen=True)
class MetricSpec:
    n: int
    kind: str
    a: tuple = None  # riemannian / randers coefficient matrix
    b0: tuple = None  # randers drift covector
    expr: object = None  # raw fundamental function
    base: "MetricSpec" = None  # matsumoto_change
    h: HVectorSpec = None

    def to_document(self) -> dict:
        doc = {"kind": self.kind}
        if self.a is not None:
            doc["a"] = [[ex.unparse(e) for e in row] for row in self.a]
        if self.b0 is not None:
            doc["b"] = [ex.unparse(e) for e in self.b0]
        if self.expr is not None:
            doc["L"] = ex.unparse(self.expr)
        if self.base is not None:
            doc["base"] = self.base.to_document()
        if self.h is not None:
            doc["h_vector"] = self.h.to_document()
        return doc


def _parse_expr(text, n: int, where: str, allow_y: bool):
    if not isinstance(text, str):
        raise ConfigError(f"{where}: expected an expression string, got {text!r}")
    try:
        node = ex.parse_expression(text)
        ex.check_dimension(node, n)
    except ex.ExpressionError as e:
        raise ConfigError(f"{where}: {e}") from e
    if not allow_y and _uses_y(node):
        raise ConfigError(f"{where}: expression must depend on x only")
    return node


def _uses_y(node) -> bool:
    if isinstance(node, ex.Var):
        return node.axis == "y"
    if isinstance(node, ex.Neg) or isinstance(node, ex.Sqrt):
        return _uses_y(node.arg)
    if isinstance(node, ex.BinOp):
        return _uses_y(node.lhs) or _uses_y(node.rhs)
    return False


def _check_keys(doc: dict, allowed: set, where: str):
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _parse_matrix(doc, n: int, where: str):
    if not isinstance(doc, list) or len(doc) != n:
        raise ConfigError(f"{where}: expected an {n}x{n} matrix of expressions")
    rows = []
    for i, row in enumerate(doc):
        if not isinstance(row, list) or len(row) != n:
            raise ConfigError(f"{where}: row {i} must have {n} entries")
        rows.append(
            tuple(_parse_expr(e, n, f"{where}[{i}][{j}]", False) for j, e in enumerate(row))
        )
    return tuple(rows)


def parse_h_vector(doc: dict, n: int) -> HVectorSpec:
    if not isinstance(doc, dict):
        raise ConfigError("h_vector: expected an object with keys 'c' and 'rho'")
    _check_keys(doc, {"c", "rho"}, "h_vector")
    c_doc = doc.get("c")
    if not isinstance(c_doc, list) or len(c_doc) != n:
        raise ConfigError(f"h_vector.c: expected {n} expressions")
    c = tuple(_parse_expr(e, n, f"h_vector.c[{i}]", False) for i, e in enumerate(c_doc))
    rho = _parse_expr(doc.get("rho", "0"), n, "h_vector.rho", False)
    return HVectorSpec(c=c, rho=rho)


def zero_h_vector(n: int) -> HVectorSpec:
    zero = ex.Num(0.0)
    return HVectorSpec(c=(zero,) * n, rho=zero)


def parse_metric(doc: dict, n: int) -> MetricSpec:
    if not isinstance(doc, dict):
        raise ConfigError("metric: expected an object")
    kind = doc.get("kind")
    if kind not in METRIC_KINDS:
        raise ConfigError(f"metric.kind must be one of {METRIC_KINDS}, got {kind!r}")
    if kind == "euclidean":
        _check_keys(doc, {"kind"}, "metric")
        return MetricSpec(n=n, kind=kind)
    if kind == "riemannian":
        _check_keys(doc, {"kind", "a"}, "metric")
        return MetricSpec(n=n, kind=kind, a=_parse_matrix(doc.get("a"), n, "metric.a"))
    if kind == "randers":
        _check_keys(doc, {"kind", "a", "b"}, "metric")
        a = _parse_matrix(doc.get("a"), n, "metric.a")
        b_doc = doc.get("b")
        if not isinstance(b_doc, list) or len(b_doc) != n:
            raise ConfigError(f"metric.b: expected {n} expressions")
        b0 = tuple(
            _parse_expr(e, n, f"metric.b[{i}]", False) for i, e in enumerate(b_doc)
        )
        return MetricSpec(n=n, kind=kind, a=a, b0=b0)
    if kind == "expression":
        _check_keys(doc, {"kind", "L"}, "metric")
        return MetricSpec(
            n=n, kind=kind, expr=_parse_expr(doc.get("L"), n, "metric.L", True)
        )
    # matsumoto_change
    _check_keys(doc, {"kind", "base", "h_vector"}, "metric")
    base = parse_metric(doc.get("base"), n)
    h = parse_h_vector(doc.get("h_vector"), n)
    return MetricSpec(n=n, kind=kind, base=base, h=h)


# -- fields -----------------------------------------------------------------


def metric_field(spec: MetricSpec) -> ScalarField:
    n = spec.n
    if spec.kind == "euclidean":

        def fn(x, y):
            return smooth_sqrt(dot(y, y))

        return ScalarField(n, fn, "euclidean")
    if spec.kind == "riemannian":

        def fn(x, y):
            return smooth_sqrt(_quadratic(spec.a, x, y))

        return ScalarField(n, fn, "riemannian")
    if spec.kind == "randers":

        def fn(x, y):
            alpha = smooth_sqrt(_quadratic(spec.a, x, y))
            drift = dot([ex.evaluate(e, x, None) for e in spec.b0], y)
            return alpha + drift

        return ScalarField(n, fn, "randers")
    if spec.kind == "expression":

        def fn(x, y):
            return ex.evaluate(spec.expr, x, y)

        return ScalarField(n, fn, "expression")
    base_field = metric_field(spec.base)
    return changed_metric_field(base_field, spec.h)


def _quadratic(a_rows, x, y):
    acc = None
    n = len(y)
    for i in range(n):
        for j in range(n):
            term = ex.evaluate(a_rows[i][j], x, None) * y[i] * y[j]
            acc = term if acc is None else acc + term
    return acc


def changed_metric_field(base: ScalarField, hspec: HVectorSpec) -> ScalarField:
    """The transformed fundamental function base^2 / (base - beta).

    With b_i = c_i(x) + rho(x) l_i the transvection beta = b_i y^i collapses
    to c_i(x) y^i + rho(x) L, so the field needs no derivative of the base.
    """

    def fn(x, y):
        L = base(x, y)
        if scalar_value(L) <= 0.0:
            raise EvaluationDomainError("base metric is non-positive at this point")
        beta = dot(hspec.covector(x), y) + hspec.rho_at(x) * L
        denom = L - beta
        if scalar_value(denom) <= 0.0:
            raise EvaluationDomainError(
                "metric change undefined: L - beta is non-positive"
            )
        return L * L / denom

    return ScalarField(base.n, fn, f"matsumoto_change({base.name})")


# -- h-vector data -----------------------------------------------------------


@dataclass
class HVectorData:
    """Pointwise h-vector quantities; entries are floats or jets."""

    b: np.ndarray  # covector b_i
    beta: object  # b_i y^i
    tau: object  # L / beta (inf at beta = 0, None on the jet path)
    s: object  # beta / L, the regular parameterization
    rho: object
    m: np.ndarray  # b_i - s l_i
    m_up: np.ndarray  # g^ij m_j
    m2: object  # m^i m_i
    b_up: np.ndarray
    b2: object  # b^i b_i


def assemble_h_vector(c_vals, rho_val, L, l, g_inv, y) -> HVectorData:
    """Build HVectorData from evaluated ingredients (generic scalars)."""
    n = len(c_vals)
    b = omat(n)
    for i in range(n):
        b[i] = c_vals[i] + rho_val * l[i]
    beta = dot(c_vals, y) + rho_val * L
    s = beta / L
    if isinstance(beta, Jet):
        tau = None if beta.value == 0.0 else L / beta
    else:
        tau = math.inf if beta == 0.0 else L / beta
    m = omat(n)
    for i in range(n):
        m[i] = b[i] - s * l[i]
    m_up = mat_vec(g_inv, m)
    m2 = dot(m_up, m)
    b_up = mat_vec(g_inv, b)
    b2 = dot(b_up, b)
    return HVectorData(
        b=b, beta=beta, tau=tau, s=s, rho=rho_val, m=m, m_up=m_up, m2=m2, b_up=b_up, b2=b2
    )


def make_h_vector(hspec: HVectorSpec, L: ScalarField, p: FiberPoint) -> HVectorData:
    """Evaluate the constructed h-vector b_i = c_i(x) + rho(x) l_i at ``p``."""
    jL = jet_eval(L, p, 0, 2)
    if jL.value <= 0.0:
        raise EvaluationDomainError("base metric is non-positive at this point")
    n = p.n
    l = np.array([jL.deriv(y_index=_unit(n, i)) for i in range(n)])
    jL2 = jL * jL
    g = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            g[i, j] = 0.5 * jL2.deriv(y_index=_pair(n, i, j))
    g_inv = np.linalg.inv(g)
    c_vals = [scalar_value(v) for v in hspec.covector(list(p.x))]
    rho_val = scalar_value(hspec.rho_at(list(p.x)))
    data = assemble_h_vector(c_vals, rho_val, jL.value, l, g_inv, p.y)
    data.b = values(data.b)
    data.m = values(data.m)
    data.m_up = values(data.m_up)
    data.b_up = values(data.b_up)
    return data


def _unit(n, i):
    e = [0] * n
    e[i] = 1
    return tuple(e)


def _pair(n, i, j):
    e = [0] * n
    e[i] += 1
    e[j] += 1
    return tuple(e)


def h_vector_defect(L: ScalarField, hdata: HVectorData, p: FiberPoint) -> float:
    """Frobenius norm of L C^h_ij b_h - rho h_ij, zero iff b is an exact h-vector."""
    from .tensors import base_tensors

    base = base_tensors(L, p)
    contr = np.einsum("hij,h->ij", base.C_mixed, values(hdata.b))
    defect = base.L * contr - scalar_value(hdata.rho) * base.h
    return float(np.sqrt(np.sum(defect**2)))
