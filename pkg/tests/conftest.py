import numpy as np
import pytest

from finslercalc import FiberPoint, metric_field, parse_h_vector, parse_metric


@pytest.fixture(scope="session")
def euclid2():
    return metric_field(parse_metric({"kind": "euclidean"}, 2))


@pytest.fixture(scope="session")
def riemann2_spec():
    return parse_metric(
        {"kind": "riemannian", "a": [["1+x1*x1", "0"], ["0", "1+0.5*x2*x2"]]}, 2
    )


@pytest.fixture(scope="session")
def riemann2(riemann2_spec):
    return metric_field(riemann2_spec)


@pytest.fixture(scope="session")
def randers2_flat():
    # position-independent Randers metric
    return metric_field(
        parse_metric(
            {"kind": "randers", "a": [["1", "0"], ["0", "1"]], "b": ["0.2", "0"]}, 2
        )
    )


@pytest.fixture(scope="session")
def randers2_curved():
    return metric_field(
        parse_metric(
            {
                "kind": "randers",
                "a": [["1+x1*x1", "0"], ["0", "1"]],
                "b": ["0.15", "0.05*x1"],
            },
            2,
        )
    )


@pytest.fixture(scope="session")
def h_small():
    return parse_h_vector({"c": ["0.1", "0.05"], "rho": "0.05"}, 2)


@pytest.fixture(scope="session")
def h_exact_grad():
    # rho = 0 with x-dependent components; exact h-vector on any Riemannian base
    return parse_h_vector({"c": ["0.2+0.1*x2", "0.1*x1"], "rho": "0"}, 2)


@pytest.fixture(scope="session")
def p0():
    return FiberPoint([0.4, -0.3], [0.8, 0.6])


@pytest.fixture(scope="session")
def p34():
    return FiberPoint([0.0, 0.0], [3.0, 4.0])


def sample_points(n, count, seed, box=0.8):
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(count):
        x = rng.uniform(-box, box, n)
        y = rng.normal(size=n)
        y /= np.linalg.norm(y)
        pts.append(FiberPoint(x, y))
    return pts
