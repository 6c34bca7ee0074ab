"""Truncated Taylor-jet arithmetic on the slit tangent bundle.

A ``Jet`` carries the value of a scalar field at a point of TM minus the zero
section together with every mixed partial derivative up to a fixed order in
the base coordinates x (at most 1) and the fiber coordinates y (at most 4).
Coefficients are stored internally as Taylor coefficients (partial divided by
the factorial of the multi-index); the public accessor :meth:`Jet.deriv`
returns plain partial derivatives, which is the convention all tensor
formulas in this package are written in.

The truncation is a box: a table entry exists for exponent pair (a, b) iff
|a| <= order_x and |b| <= order_y.  Monomials outside the box form an ideal,
so truncated multiplication is exact at the retained orders: for polynomial
inputs of degree within the box, extracted derivatives are exact.

Smooth non-polynomial operations (division, sqrt, real powers) go through a
Horner-evaluated composition with the univariate Taylor series of the outer
function; the perturbation is nilpotent at order order_x + order_y + 1, so
these are exact at the truncation order as well.

``fd_derivative`` provides the independent central-difference oracle used by
the test-suite as a second opinion on the jet engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Callable, Sequence

import numpy as np

from ._kernels import convolve

MAX_DIM = 6
MAX_ORDER_X = 1
MAX_ORDER_Y = 4


class EvaluationDomainError(ValueError):
    """A scalar field was evaluated outside its smooth domain."""


class FiberPoint:
    """A base point x and a nonzero direction y, the argument of every field."""

    __slots__ = ("x", "y")

    def __init__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be 1-d arrays of equal length")
        n = x.shape[0]
        if not 2 <= n <= MAX_DIM:
            raise ValueError(f"dimension must be in 2..{MAX_DIM}, got {n}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("coordinates must be finite")
        if float(np.linalg.norm(y)) == 0.0:
            raise ValueError("direction y must be nonzero")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __setattr__(self, name, value):
        raise AttributeError("FiberPoint is immutable")

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    def __repr__(self):
        return f"FiberPoint(x={self.x.tolist()}, y={self.y.tolist()})"


@dataclass(frozen=True)
class ScalarField:
    """A deterministic scalar function of (x, y).

    ``fn`` receives two sequences of scalars and must evaluate using only
    arithmetic that is generic over floats and jets (+, -, *, /, integer
    powers, :func:`smooth_sqrt`), so the same definition feeds both the
    point evaluation and the jet pipeline.
    """

    n: int
    fn: Callable
    name: str = ""

    def __call__(self, x: Sequence, y: Sequence):
        return self.fn(x, y)


def _multi_indices(n: int, max_total: int):
    """All length-n exponent tuples with sum <= max_total, in lexicographic order."""
    out = []
    for combo in product(range(max_total + 1), repeat=n):
        if sum(combo) <= max_total:
            out.append(combo)
    out.sort()
    return out


class JetSpace:
    """Index bookkeeping for one truncation signature (n, order_x, order_y)."""

    __slots__ = (
        "n",
        "order_x",
        "order_y",
        "exps",
        "index",
        "size",
        "fact",
        "_mul_plan",
        "_diff_maps",
        "_trunc_maps",
    )

    def __init__(self, n: int, order_x: int, order_y: int):
        self.n = n
        self.order_x = order_x
        self.order_y = order_y
        xs = _multi_indices(n, order_x)
        ys = _multi_indices(n, order_y)
        exps = []
        for a in xs:
            for b in ys:
                exps.append(a + b)
        exps.sort()
        self.exps = exps
        self.index = {e: i for i, e in enumerate(exps)}
        self.size = len(exps)
        fact = np.empty(self.size)
        for i, e in enumerate(exps):
            f = 1.0
            for c in e:
                f *= math.factorial(c)
            fact[i] = f
        self.fact = fact
        self._mul_plan = None
        self._diff_maps = {}
        self._trunc_maps = {}

    # -- plans ---------------------------------------------------------

    def mul_plan(self):
        """(ii, jj, kk) triples with exps[ii] + exps[jj] = exps[kk].

        Every componentwise split of a retained exponent is itself retained,
        so the plan enumerates all of them.  Sorted so both kernel backends
        accumulate in the same order.
        """
        if self._mul_plan is None:
            ii, jj, kk = [], [], []
            for k, e in enumerate(self.exps):
                for split in product(*(range(c + 1) for c in e)):
                    rest = tuple(ec - sc for ec, sc in zip(e, split))
                    ii.append(self.index[split])
                    jj.append(self.index[rest])
                    kk.append(k)
            order = np.lexsort((np.array(ii), np.array(kk)))
            self._mul_plan = (
                np.array(ii, dtype=np.int64)[order],
                np.array(jj, dtype=np.int64)[order],
                np.array(kk, dtype=np.int64)[order],
            )
        return self._mul_plan

    def diff_map(self, slot: int):
        """Gather map implementing the derivative series in variable ``slot``."""
        if slot not in self._diff_maps:
            ox = self.order_x - 1 if slot < self.n else self.order_x
            oy = self.order_y - 1 if slot >= self.n else self.order_y
            if ox < 0 or oy < 0:
                raise ValueError("cannot differentiate: order exhausted")
            target = jet_space(self.n, ox, oy)
            src = np.empty(target.size, dtype=np.int64)
            scale = np.empty(target.size)
            for t, e in enumerate(target.exps):
                shifted = list(e)
                shifted[slot] += 1
                src[t] = self.index[tuple(shifted)]
                scale[t] = e[slot] + 1
            self._diff_maps[slot] = (target, src, scale)
        return self._diff_maps[slot]

    def trunc_map(self, order_x: int, order_y: int):
        """Gather map onto the subspace of lower truncation orders."""
        key = (order_x, order_y)
        if key not in self._trunc_maps:
            target = jet_space(self.n, order_x, order_y)
            src = np.array([self.index[e] for e in target.exps], dtype=np.int64)
            self._trunc_maps[key] = (target, src)
        return self._trunc_maps[key]

    # -- constructors ----------------------------------------------------

    def constant(self, value: float) -> "Jet":
        coeffs = np.zeros(self.size)
        coeffs[0] = value
        return Jet(self, coeffs)

    def variable(self, slot: int, value: float) -> "Jet":
        """The coordinate function for ``slot`` (0..n-1 are x, n..2n-1 are y)."""
        coeffs = np.zeros(self.size)
        coeffs[0] = value
        order = self.order_x if slot < self.n else self.order_y
        if order >= 1:
            unit = tuple(1 if i == slot else 0 for i in range(2 * self.n))
            coeffs[self.index[unit]] = 1.0
        return Jet(self, coeffs)


@lru_cache(maxsize=None)
def jet_space(n: int, order_x: int, order_y: int) -> JetSpace:
    if not 2 <= n <= MAX_DIM:
        raise ValueError(f"dimension must be in 2..{MAX_DIM}")
    if not 0 <= order_x <= MAX_ORDER_X:
        raise ValueError(f"order_x must be in 0..{MAX_ORDER_X}")
    if not 0 <= order_y <= MAX_ORDER_Y:
        raise ValueError(f"order_y must be in 0..{MAX_ORDER_Y}")
    return JetSpace(n, order_x, order_y)


class Jet:
    """Truncated mixed Taylor expansion of a scalar field at a fiber point."""

    __slots__ = ("space", "coeffs")

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.coeffs = coeffs

    # -- inspection ------------------------------------------------------

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def deriv(self, x_index: Sequence[int] = (), y_index: Sequence[int] = ()) -> float:
        """Plain mixed partial d^a_x d^b_y f for exponent tuples a, b."""
        n = self.space.n
        a = tuple(x_index) if x_index else (0,) * n
        b = tuple(y_index) if y_index else (0,) * n
        if len(a) != n or len(b) != n:
            raise ValueError("multi-indices must have length n")
        key = a + b
        if key not in self.space.index:
            raise ValueError(f"derivative {key} outside truncation orders")
        i = self.space.index[key]
        return float(self.coeffs[i] * self.space.fact[i])

    def as_table(self) -> dict:
        """Map multi-index (a, b) -> plain partial derivative."""
        n = self.space.n
        return {
            (e[:n], e[n:]): float(c * f)
            for e, c, f in zip(self.space.exps, self.coeffs, self.space.fact)
        }

    def __repr__(self):
        sp = self.space
        return f"Jet(n={sp.n}, orders=({sp.order_x},{sp.order_y}), value={self.value})"

    # -- structure -------------------------------------------------------

    def truncate(self, order_x: int, order_y: int) -> "Jet":
        if order_x == self.space.order_x and order_y == self.space.order_y:
            return self
        target, src = self.space.trunc_map(order_x, order_y)
        return Jet(target, self.coeffs[src].copy())

    def dx(self, i: int) -> "Jet":
        """Jet of the partial derivative in x_i (one x-order lower)."""
        target, src, scale = self.space.diff_map(i)
        return Jet(target, self.coeffs[src] * scale)

    def dy(self, i: int) -> "Jet":
        """Jet of the partial derivative in y_i (one y-order lower)."""
        target, src, scale = self.space.diff_map(self.space.n + i)
        return Jet(target, self.coeffs[src] * scale)

    # -- arithmetic ------------------------------------------------------

    def _align(self, other: "Jet"):
        sa, sb = self.space, other.space
        if sa is sb:
            return self, other, sa
        if sa.n != sb.n:
            raise ValueError("jets live over different dimensions")
        ox = min(sa.order_x, sb.order_x)
        oy = min(sa.order_y, sb.order_y)
        a = self.truncate(ox, oy)
        b = other.truncate(ox, oy)
        return a, b, a.space

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b, space = self._align(other)
            return Jet(space, a.coeffs + b.coeffs)
        if isinstance(other, (int, float)):
            out = self.coeffs.copy()
            out[0] += other
            return Jet(self.space, out)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __sub__(self, other):
        if isinstance(other, Jet):
            a, b, space = self._align(other)
            return Jet(space, a.coeffs - b.coeffs)
        if isinstance(other, (int, float)):
            out = self.coeffs.copy()
            out[0] -= other
            return Jet(self.space, out)
        return NotImplemented

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b, space = self._align(other)
            ii, jj, kk = space.mul_plan()
            return Jet(space, convolve(a.coeffs, b.coeffs, ii, jj, kk, space.size))
        if isinstance(other, (int, float)):
            return Jet(self.space, self.coeffs * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other._reciprocal()
        if isinstance(other, (int, float)):
            return Jet(self.space, self.coeffs / other)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, (int, float)):
            return self._reciprocal() * other
        return NotImplemented

    def __pow__(self, exponent):
        if isinstance(exponent, float) and exponent.is_integer():
            exponent = int(exponent)
        if isinstance(exponent, int):
            if exponent < 0:
                return (self.__pow__(-exponent))._reciprocal()
            result = self.space.constant(1.0)
            base = self
            e = exponent
            while e:
                if e & 1:
                    result = result * base
                base = base * base if e > 1 else base
                e >>= 1
            return result
        if isinstance(exponent, float):
            u0 = self.value
            if u0 <= 0.0:
                raise EvaluationDomainError(
                    "non-integer power of a jet with non-positive value"
                )
            return self._compose(_pow_series(exponent, u0, self._nilpotency()))
        return NotImplemented

    # -- smooth composition ----------------------------------------------

    def _nilpotency(self) -> int:
        return self.space.order_x + self.space.order_y

    def _compose(self, series: Sequence[float]) -> "Jet":
        """Evaluate sum_k series[k] * (self - value)^k by Horner."""
        du = self.coeffs.copy()
        du[0] = 0.0
        du = Jet(self.space, du)
        acc = self.space.constant(series[-1])
        for c in reversed(series[:-1]):
            acc = acc * du + c
        return acc

    def _reciprocal(self) -> "Jet":
        u0 = self.value
        if u0 == 0.0:
            raise ZeroDivisionError("division by a jet with zero value")
        k = self._nilpotency()
        series = [(-1.0) ** j / u0 ** (j + 1) for j in range(k + 1)]
        return self._compose(series)

    def sqrt(self) -> "Jet":
        u0 = self.value
        if u0 <= 0.0:
            raise EvaluationDomainError("sqrt of a jet with non-positive value")
        return self._compose(_pow_series(0.5, u0, self._nilpotency()))


def _pow_series(r: float, u0: float, order: int):
    """Taylor coefficients of t^r at t = u0: binom(r, k) * u0^(r-k)."""
    series = [u0**r]
    binom = 1.0
    for k in range(1, order + 1):
        binom *= (r - k + 1) / k
        series.append(binom * u0 ** (r - k))
    return series


def smooth_sqrt(v):
    """sqrt generic over floats and jets, raising EvaluationDomainError at <= 0."""
    if isinstance(v, Jet):
        return v.sqrt()
    if v <= 0.0:
        raise EvaluationDomainError("sqrt of a non-positive value")
    return math.sqrt(v)


def scalar_value(v) -> float:
    """Value part of a float or jet."""
    return v.value if isinstance(v, Jet) else float(v)


# -- evaluation entry points ----------------------------------------------


def jet_eval(field: ScalarField, p: FiberPoint, order_x: int, order_y: int) -> Jet:
    """Evaluate ``field`` at ``p`` with all mixed partials up to the given orders."""
    space = jet_space(p.n, order_x, order_y)
    if field.n != p.n:
        raise ValueError("field dimension does not match the point")
    xs = [space.variable(i, p.x[i]) for i in range(p.n)]
    ys = [space.variable(p.n + i, p.y[i]) for i in range(p.n)]
    out = field(xs, ys)
    if isinstance(out, (int, float)):
        return space.constant(float(out))
    if out.space is not space:
        # mixed-order intermediates are a field bug, not a caller error
        raise RuntimeError("field evaluation changed the truncation signature")
    return out


def fd_derivative(
    field: ScalarField,
    p: FiberPoint,
    x_index: Sequence[int] = (),
    y_index: Sequence[int] = (),
) -> float:
    """Central-difference estimate of a mixed partial, Richardson-extrapolated.

    Steps follow h = eps^(1/(k+4)) * max(1, |coordinate|) with k the total
    derivative order; the exponent balances the O(h^4) truncation of a
    Richardson-extrapolated central stencil against eps/h^k roundoff.  Used
    by the test-suite as an oracle independent of the jet engine.
    """
    n = p.n
    a = tuple(x_index) if x_index else (0,) * n
    b = tuple(y_index) if y_index else (0,) * n
    if len(a) != n or len(b) != n:
        raise ValueError("multi-indices must have length n")
    slots = []
    for i, c in enumerate(a):
        slots.extend([("x", i)] * c)
    for i, c in enumerate(b):
        slots.extend([("y", i)] * c)
    k = len(slots)
    if k > MAX_ORDER_X + MAX_ORDER_Y:
        raise ValueError("total derivative order too large")
    if k == 0:
        return scalar_value(field(list(p.x), list(p.y)))

    eps = np.finfo(float).eps
    base_steps = []
    for kind, i in slots:
        coord = p.x[i] if kind == "x" else p.y[i]
        base_steps.append(eps ** (1.0 / (k + 4)) * max(1.0, abs(coord)))

    def stencil(depth, x, y, t):
        if depth == len(slots):
            return scalar_value(field(list(x), list(y)))
        kind, i = slots[depth]
        h = base_steps[depth] * t
        if kind == "x":
            xp = x.copy()
            xm = x.copy()
            xp[i] += h
            xm[i] -= h
            hi = stencil(depth + 1, xp, y, t)
            lo = stencil(depth + 1, xm, y, t)
        else:
            yp = y.copy()
            ym = y.copy()
            yp[i] += h
            ym[i] -= h
            hi = stencil(depth + 1, x, yp, t)
            lo = stencil(depth + 1, x, ym, t)
        return (hi - lo) / (2.0 * h)

    d_h = stencil(0, p.x.copy(), p.y.copy(), 1.0)
    d_h2 = stencil(0, p.x.copy(), p.y.copy(), 0.5)
    return (4.0 * d_h2 - d_h) / 3.0
