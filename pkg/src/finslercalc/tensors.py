"""Fundamental tensors and connections of a Finsler space at a point.

Everything derives from one master jet of the fundamental function, so the
nested derivatives a connection needs (the nonlinear coefficients are a
y-derivative of the spray, which itself contains x-derivatives of the metric)
come out of ordinary truncated-series arithmetic: each intermediate quantity
is kept as a jet in the remaining orders and differentiated by table lookup.

``PointFrame`` is the working object; ``base_tensors`` and
``connection_data`` are the plain-float views of it.  The covariant
derivative helpers work on jet-valued tensors and stay generic, so the same
code produces float results and jet-valued results (used when a covariant
derivative is itself differentiated again).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .jets import EvaluationDomainError, FiberPoint, Jet, ScalarField, jet_eval
from .linalg import SingularMetricError, generic_inverse, omat, values


@dataclass
class BaseTensors:
    """Pointwise fundamental tensors; entries are floats or jets."""

    n: int
    y: np.ndarray
    L: object
    l: np.ndarray  # l_i = dL/dy_i
    g: np.ndarray  # g_ij = 1/2 d2(L^2)/dy_i dy_j
    g_inv: np.ndarray
    h: np.ndarray  # angular metric g_ij - l_i l_j
    C: np.ndarray  # C_ijk = 1/2 dg_ij/dy_k
    C_mixed: np.ndarray  # C^i_jk = g^ir C_rjk


@dataclass
class ConnectionData:
    """Connection coefficients of one Finsler space at one point (floats)."""

    n: int
    gamma: np.ndarray  # second-kind Christoffel symbols gamma^i_jk
    G: np.ndarray  # spray G^i = 1/2 gamma^i_jk y^j y^k
    N: np.ndarray  # nonlinear connection N^i_j = dG^i/dy_j
    F: np.ndarray  # h-connection F^i_jk
    G_berwald: np.ndarray  # Berwald coefficients dN^i_j/dy_k


class PointFrame:
    """All jet-level data of one fundamental function at one fiber point."""

    def __init__(self, field: ScalarField, p: FiberPoint, order_x: int = 1, order_y: int = 4):
        self.field = field
        self.p = p
        self.n = p.n
        self.order_x = order_x
        self.order_y = order_y
        self.jL = jet_eval(field, p, order_x, order_y)
        if self.jL.value <= 0.0:
            raise EvaluationDomainError("fundamental function is non-positive here")

    # -- coordinates -----------------------------------------------------

    @cached_property
    def x_jets(self):
        space = self.jL.space
        out = omat(self.n)
        for i in range(self.n):
            out[i] = space.variable(i, self.p.x[i])
        return out

    @cached_property
    def y_jets(self):
        space = self.jL.space
        out = omat(self.n)
        for i in range(self.n):
            out[i] = space.variable(self.n + i, self.p.y[i])
        return out

    # -- fundamental tensors as jets --------------------------------------

    @cached_property
    def jL2(self):
        return self.jL * self.jL

    @cached_property
    def l_jets(self):
        out = omat(self.n)
        for i in range(self.n):
            out[i] = self.jL.dy(i)
        return out

    @cached_property
    def g_jets(self):
        n = self.n
        out = omat(n, n)
        for i in range(n):
            di = self.jL2.dy(i)
            for j in range(i, n):
                out[i, j] = di.dy(j) * 0.5
                out[j, i] = out[i, j]
        return out

    @cached_property
    def g_inv_jets(self):
        return generic_inverse(self.g_jets)

    @cached_property
    def h_jets(self):
        n = self.n
        out = omat(n, n)
        for i in range(n):
            for j in range(n):
                out[i, j] = self.g_jets[i, j] - self.l_jets[i] * self.l_jets[j]
        return out

    @cached_property
    def C_jets(self):
        n = self.n
        out = omat(n, n, n)
        for i in range(n):
            for j in range(i, n):
                dij = self.g_jets[i, j]
                for k in range(n):
                    c = dij.dy(k) * 0.5
                    out[i, j, k] = c
                    out[j, i, k] = c
        return out

    @cached_property
    def C_mixed_jets(self):
        n = self.n
        out = omat(n, n, n)
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    acc = self.g_inv_jets[i, 0] * self.C_jets[0, j, k]
                    for r in range(1, n):
                        acc = acc + self.g_inv_jets[i, r] * self.C_jets[r, j, k]
                    out[i, j, k] = acc
        return out

    # -- connection as jets ------------------------------------------------

    @cached_property
    def gamma_lower_jets(self):
        # gamma_sjk = 1/2 (d_j g_sk + d_k g_sj - d_s g_jk), x-derivatives
        n = self.n
        dg = omat(n, n, n)  # dg[s,j,k] = d g_sj / dx_k
        for s in range(n):
            for j in range(s, n):
                gsj = self.g_jets[s, j]
                for k in range(n):
                    d = gsj.dx(k)
                    dg[s, j, k] = d
                    dg[j, s, k] = d
        out = omat(n, n, n)
        for s in range(n):
            for j in range(n):
                for k in range(j, n):
                    val = (dg[s, j, k] + dg[s, k, j] - dg[j, k, s]) * 0.5
                    out[s, j, k] = val
                    out[s, k, j] = val
        return out

    @cached_property
    def gamma_jets(self):
        n = self.n
        out = omat(n, n, n)
        for i in range(n):
            for j in range(n):
                for k in range(j, n):
                    acc = self.g_inv_jets[i, 0] * self.gamma_lower_jets[0, j, k]
                    for s in range(1, n):
                        acc = acc + self.g_inv_jets[i, s] * self.gamma_lower_jets[s, j, k]
                    out[i, j, k] = acc
                    out[i, k, j] = acc
        return out

    @cached_property
    def G_jets(self):
        n = self.n
        y = self.y_jets
        out = omat(n)
        for i in range(n):
            acc = None
            for j in range(n):
                for k in range(n):
                    term = self.gamma_jets[i, j, k] * y[j] * y[k]
                    acc = term if acc is None else acc + term
            out[i] = acc * 0.5
        return out

    @cached_property
    def N_jets(self):
        n = self.n
        out = omat(n, n)
        for i in range(n):
            for j in range(n):
                out[i, j] = self.G_jets[i].dy(j)
        return out

    @cached_property
    def F_jets(self):
        # F^i_jk = gamma^i_jk + g^is (C_jkr N^r_s - C_skr N^r_j - C_jsr N^r_k)
        n = self.n
        out = omat(n, n, n)
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    acc = self.gamma_jets[i, j, k]
                    for s in range(n):
                        inner = None
                        for r in range(n):
                            term = (
                                self.C_jets[j, k, r] * self.N_jets[r, s]
                                - self.C_jets[s, k, r] * self.N_jets[r, j]
                                - self.C_jets[j, s, r] * self.N_jets[r, k]
                            )
                            inner = term if inner is None else inner + term
                        acc = acc + self.g_inv_jets[i, s] * inner
                    out[i, j, k] = acc
        return out

    # -- float views -------------------------------------------------------

    @cached_property
    def base_values(self) -> BaseTensors:
        g = values(self.g_jets)
        scale = float(np.abs(g).max())
        det = float(np.linalg.det(g))
        if abs(det) < 1e-12 * scale**self.n:
            raise SingularMetricError("metric tensor is singular at this point")
        return BaseTensors(
            n=self.n,
            y=self.p.y.copy(),
            L=self.jL.value,
            l=values(self.l_jets),
            g=g,
            g_inv=np.linalg.inv(g),
            h=values(self.h_jets),
            C=values(self.C_jets),
            C_mixed=values(self.C_mixed_jets),
        )

    @cached_property
    def base_jets(self) -> BaseTensors:
        """The same container with jet entries, for derivative-level work."""
        return BaseTensors(
            n=self.n,
            y=self.y_jets,
            L=self.jL,
            l=self.l_jets,
            g=self.g_jets,
            g_inv=self.g_inv_jets,
            h=self.h_jets,
            C=self.C_jets,
            C_mixed=self.C_mixed_jets,
        )

    @cached_property
    def connection_values(self) -> ConnectionData:
        n = self.n
        berwald = np.empty((n, n, n))
        for i in range(n):
            for j in range(n):
                nij = self.N_jets[i, j]
                for k in range(n):
                    berwald[i, j, k] = nij.dy(k).value
        return ConnectionData(
            n=n,
            gamma=values(self.gamma_jets),
            G=values(self.G_jets),
            N=values(self.N_jets),
            F=values(self.F_jets),
            G_berwald=berwald,
        )


def base_tensors(L: ScalarField, p: FiberPoint) -> BaseTensors:
    """Fundamental tensors of (M, L) at p, from jets of L."""
    return PointFrame(L, p, 0, 3).base_values


def connection_data(L: ScalarField, p: FiberPoint) -> ConnectionData:
    """Christoffel symbols, spray, nonlinear, h- and Berwald connections at p."""
    return PointFrame(L, p, 1, 4).connection_values


# -- covariant derivatives ---------------------------------------------------


def _as_object_array(T):
    if isinstance(T, Jet):
        arr = omat()
        arr[()] = T
        return arr
    arr = np.asarray(T)
    if arr.dtype != object:
        raise TypeError("tensor entries must be jets")
    return arr


def h_cov_deriv(T, variance, N, F):
    """Horizontal covariant derivative of a jet-valued tensor.

    ``variance`` is a string of '+' (upper) and '-' (lower), one per index.
    The derivative index is appended last.  N and F may hold floats or jets;
    the result scalars follow the ingredient type.
    """
    arr = _as_object_array(T)
    if len(variance) != arr.ndim:
        raise ValueError("variance length must match tensor rank")
    n = N.shape[0]
    out = omat(*arr.shape, n)
    for idx in np.ndindex(arr.shape):
        entry = arr[idx]
        dys = [entry.dy(r) for r in range(n)]
        for k in range(n):
            acc = entry.dx(k)
            for r in range(n):
                acc = acc - N[r, k] * dys[r]
            for pos, var in enumerate(variance):
                a = idx[pos]
                for r in range(n):
                    swapped = arr[idx[:pos] + (r,) + idx[pos + 1 :]]
                    if var == "+":
                        acc = acc + swapped * F[a, r, k]
                    else:
                        acc = acc - swapped * F[r, a, k]
            out[idx + (k,)] = acc
    return out


def v_cov_deriv(T, variance, C_mixed):
    """Vertical covariant derivative, with one Cartan-torsion correction per index."""
    arr = _as_object_array(T)
    if len(variance) != arr.ndim:
        raise ValueError("variance length must match tensor rank")
    n = C_mixed.shape[0]
    out = omat(*arr.shape, n)
    for idx in np.ndindex(arr.shape):
        entry = arr[idx]
        for k in range(n):
            acc = entry.dy(k)
            for pos, var in enumerate(variance):
                a = idx[pos]
                for r in range(n):
                    swapped = arr[idx[:pos] + (r,) + idx[pos + 1 :]]
                    if var == "+":
                        acc = acc + swapped * C_mixed[a, r, k]
                    else:
                        acc = acc - swapped * C_mixed[r, a, k]
            out[idx + (k,)] = acc
    return out
