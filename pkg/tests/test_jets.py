import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finslercalc import (
    EvaluationDomainError,
    FiberPoint,
    ScalarField,
    fd_derivative,
    jet_eval,
    smooth_sqrt,
)
from finslercalc._kernels import convolve, convolve_reference
from finslercalc.jets import jet_space
from finslercalc.metrics import changed_metric_field, metric_field, parse_h_vector, parse_metric

P = FiberPoint([0.5, -0.2], [3.0, 4.0])


def test_monomial_second_derivative_exact():
    f = ScalarField(2, lambda x, y: y[0] * y[0])
    j = jet_eval(f, P, 0, 2)
    assert j.deriv(y_index=(2, 0)) == 2.0
    assert j.deriv(y_index=(0, 2)) == 0.0


def test_euclidean_unit_covector():
    f = ScalarField(2, lambda x, y: smooth_sqrt(y[0] * y[0] + y[1] * y[1]))
    j = jet_eval(f, P, 0, 1)
    assert j.value == 5.0
    assert abs(j.deriv(y_index=(1, 0)) - 0.6) < 1e-14
    assert abs(j.deriv(y_index=(0, 1)) - 0.8) < 1e-14


def test_mixed_base_fiber_derivative():
    f = ScalarField(2, lambda x, y: x[0] * y[0])
    j = jet_eval(f, P, 1, 1)
    assert j.deriv(x_index=(1, 0), y_index=(1, 0)) == 1.0


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.integers(-4, 4),  # coefficient
            st.integers(0, 1),  # x1 exponent
            st.integers(0, 1),  # x2 exponent
            st.integers(0, 2),  # y1 exponent
            st.integers(0, 2),  # y2 exponent
        ),
        min_size=1,
        max_size=5,
    )
)
def test_polynomial_derivatives_exact(terms):
    # restrict to the (1, 4) truncation box
    terms = [t for t in terms if t[1] + t[2] <= 1 and t[3] + t[4] <= 4]
    if not terms:
        return

    def poly(x, y):
        acc = 0.0
        for c, a1, a2, b1, b2 in terms:
            acc = acc + c * x[0] ** a1 * x[1] ** a2 * y[0] ** b1 * y[1] ** b2
        return acc

    f = ScalarField(2, poly)
    j = jet_eval(f, FiberPoint([2.0, -1.0], [3.0, -2.0]), 1, 4)
    # analytic derivative of each monomial at an integer point is an integer
    for ax in [(0, 0), (1, 0), (0, 1)]:
        for by in [(0, 0), (1, 0), (0, 2), (1, 1), (2, 0)]:
            expected = 0
            for c, a1, a2, b1, b2 in terms:
                e = c
                for exp, order, v in (
                    (a1, ax[0], 2),
                    (a2, ax[1], -1),
                    (b1, by[0], 3),
                    (b2, by[1], -2),
                ):
                    if order > exp:
                        e = 0
                        break
                    e *= math.perm(exp, order) * v ** (exp - order)
                expected += e
            assert j.deriv(x_index=ax, y_index=by) == expected


def test_fd_first_derivative_of_norm():
    f = ScalarField(2, lambda x, y: smooth_sqrt(y[0] * y[0] + y[1] * y[1]))
    val = fd_derivative(f, P, y_index=(1, 0))
    assert abs(val - 0.6) < 1e-8


def test_fd_third_derivative_of_cube():
    f = ScalarField(2, lambda x, y: y[0] ** 3)
    val = fd_derivative(f, P, y_index=(3, 0))
    assert abs(val - 6.0) < 1e-4


def test_fd_oracle_on_transformed_randers():
    # frozen instance: curved Randers base with a small covector field
    base = metric_field(
        parse_metric(
            {"kind": "randers", "a": [["1+x1*x1", "0"], ["0", "1"]], "b": ["0.2", "0"]},
            2,
        )
    )
    h = parse_h_vector({"c": ["0.1", "0.05"], "rho": "0.05"}, 2)
    field = changed_metric_field(base, h)
    p = FiberPoint([0.4, -0.3], [0.8, 0.6])
    frozen_fd = -0.5007053523296143  # central-difference value, recorded first
    assert abs(fd_derivative(field, p, y_index=(1, 1)) - frozen_fd) < 1e-12
    jet = jet_eval(field, p, 0, 2).deriv(y_index=(1, 1))
    assert abs(jet - frozen_fd) / abs(frozen_fd) < 1e-5


def _composite_fields(n):
    sqrt2 = lambda x, y: smooth_sqrt(
        sum(yi * yi for yi in y) + 0.1 * sum(xi * xi for xi in x)
    )
    return [
        ScalarField(n, lambda x, y: (y[0] + 2.0) ** 2 * y[1] / (y[0] + y[1] + 4.0)),
        ScalarField(n, sqrt2),
        ScalarField(n, lambda x, y: (x[0] + 2.0) / smooth_sqrt(y[0] * y[0] + y[1] * y[1] + 1.0)),
        ScalarField(n, lambda x, y: (y[0] * y[0] + y[1] * y[1]) ** 1.5 / (3.0 + x[1])),
    ]


def test_fd_matches_jets_on_composite_suite():
    rng = np.random.default_rng(5)
    indices = [
        ((0, 0), (1, 0)),
        ((0, 0), (1, 1)),
        ((1, 0), (0, 1)),
        ((0, 0), (2, 1)),
        ((0, 1), (2, 0)),
        ((0, 0), (2, 2)),
    ]
    for field in _composite_fields(2):
        x = rng.uniform(-0.5, 0.5, 2)
        y = rng.uniform(0.5, 1.5, 2)
        p = FiberPoint(x, y)
        j = jet_eval(field, p, 1, 4)
        for ax, by in indices:
            fd = fd_derivative(field, p, x_index=ax, y_index=by)
            jet = j.deriv(x_index=ax, y_index=by)
            assert abs(fd - jet) <= max(1e-5 * abs(jet), 1e-7)


def test_homogeneous_pushforward():
    f = ScalarField(2, lambda x, y: smooth_sqrt(2.0 * y[0] * y[0] + y[1] * y[1]))
    j1 = jet_eval(f, P, 0, 1)
    for lam in (0.5, 2.0, 3.0):
        pl = FiberPoint(P.x, lam * P.y)
        jl = jet_eval(f, pl, 0, 1)
        assert abs(jl.value - lam * j1.value) < 1e-10 * jl.value
        for idx in ((1, 0), (0, 1)):
            assert abs(jl.deriv(y_index=idx) - j1.deriv(y_index=idx)) < 1e-10


def test_division_and_sqrt_truncation_exactness():
    # rational + sqrt composite differentiated four times stays consistent
    f = ScalarField(2, lambda x, y: smooth_sqrt(y[0] ** 4 + y[1] ** 4))
    j = jet_eval(f, FiberPoint([0.0, 0.0], [1.0, 1.0]), 0, 4)
    fd = fd_derivative(f, FiberPoint([0.0, 0.0], [1.0, 1.0]), y_index=(3, 1))
    assert abs(j.deriv(y_index=(3, 1)) - fd) < 1e-6


def test_integer_power_at_zero_value():
    f = ScalarField(2, lambda x, y: (y[0] - 3.0) ** 3)
    j = jet_eval(f, P, 0, 3)  # y[0] - 3 has value 0 at P
    assert j.value == 0.0
    assert j.deriv(y_index=(3, 0)) == 6.0


def test_domain_errors():
    f = ScalarField(2, lambda x, y: smooth_sqrt(-1.0 - y[0] * y[0]))
    with pytest.raises(EvaluationDomainError):
        jet_eval(f, P, 0, 1)
    g = ScalarField(2, lambda x, y: y[0] / (y[0] - 3.0))
    with pytest.raises(ZeroDivisionError):
        jet_eval(g, P, 0, 1)
    base = metric_field(parse_metric({"kind": "euclidean"}, 2))
    huge = parse_h_vector({"c": ["2", "0"], "rho": "0"}, 2)
    with pytest.raises(EvaluationDomainError):
        # beta > L makes the change undefined
        jet_eval(changed_metric_field(base, huge), FiberPoint([0, 0], [1.0, 0.1]), 0, 1)


def test_order_caps_and_point_validation():
    with pytest.raises(ValueError):
        jet_space(2, 2, 4)
    with pytest.raises(ValueError):
        jet_space(2, 1, 5)
    with pytest.raises(ValueError):
        jet_space(7, 1, 4)
    with pytest.raises(ValueError):
        FiberPoint([1.0], [1.0])
    with pytest.raises(ValueError):
        FiberPoint([1.0, 2.0], [0.0, 0.0])
    f = ScalarField(2, lambda x, y: y[0])
    j = jet_eval(f, P, 0, 1)
    with pytest.raises(ValueError):
        j.deriv(y_index=(2, 0))


def test_signature_alignment():
    f = ScalarField(2, lambda x, y: y[0] * y[1] + x[0])
    j14 = jet_eval(f, P, 1, 4)
    j02 = j14.truncate(0, 2)
    prod = j14 * j02  # aligned to (0, 2)
    assert prod.space.order_x == 0 and prod.space.order_y == 2
    assert abs(prod.value - f([*P.x], [*P.y]) ** 2) < 1e-12


def test_derivative_table_convention():
    # the accessor returns plain partials: for y1^3 the third one is 6, not 1
    f = ScalarField(2, lambda x, y: y[0] ** 3)
    j = jet_eval(f, P, 0, 3)
    table = j.as_table()
    assert table[((0, 0), (3, 0))] == 6.0
    assert j.deriv(y_index=(3, 0)) == 6.0


def test_kernel_backends_agree_bitwise():
    space = jet_space(3, 1, 4)
    rng = np.random.default_rng(0)
    a = rng.normal(size=space.size)
    b = rng.normal(size=space.size)
    ii, jj, kk = space.mul_plan()
    out = convolve(a, b, ii, jj, kk, space.size)
    ref = convolve_reference(a, b, ii, jj, kk, space.size)
    assert np.array_equal(out, ref)


def test_scalar_field_determinism(euclid2, p0):
    a = jet_eval(euclid2, p0, 1, 4)
    b = jet_eval(euclid2, p0, 1, 4)
    assert np.array_equal(a.coeffs, b.coeffs)
