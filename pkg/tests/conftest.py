import numpy as np
import pytest
from hypothesis import strategies as st

from convnorm.errors import GeometryError
from convnorm.geometry import ConvGeometry, check_assumption1


def naive_conv(K, x, stride=(1, 1), padding=(0, 0)):
    """Six nested loops, straight from the definition of cross-correlation."""
    d_out, d_in, k1, k2 = K.shape
    _, h, w = x.shape
    p1, p2 = padding
    s1, s2 = stride
    xp = np.zeros((d_in, h + 2 * p1, w + 2 * p2))
    xp[:, p1:p1 + h, p2:p2 + w] = x
    h_out = (h + 2 * p1 - k1) // s1 + 1
    w_out = (w + 2 * p2 - k2) // s2 + 1
    out = np.zeros((d_out, h_out, w_out))
    for i in range(d_out):
        for y in range(h_out):
            for z in range(w_out):
                acc = 0.0
                for j in range(d_in):
                    for k in range(k1):
                        for t in range(k2):
                            acc += K[i, j, k, t] * xp[j, y * s1 + k, z * s2 + t]
                out[i, y, z] = acc
    return out


def naive_matrix(kernel):
    """Dense operator built from :func:`naive_conv` on basis inputs."""
    g = kernel.geometry
    n = g.d_in * g.h_in * g.w_in
    cols = []
    for c in range(n):
        e = np.zeros(n)
        e[c] = 1.0
        cols.append(naive_conv(kernel.data, e.reshape(g.input_shape), (g.s1, g.s2), (g.p1, g.p2)).ravel())
    return np.array(cols).T


@st.composite
def geometries(draw, max_channels=3, max_kernel=4, max_stride=3, max_padding=2, max_input=9, assumption=True):
    k1 = draw(st.integers(1, max_kernel))
    k2 = draw(st.integers(1, max_kernel))
    kwargs = dict(
        d_in=draw(st.integers(1, max_channels)),
        d_out=draw(st.integers(1, max_channels)),
        h_in=draw(st.integers(k1, max_input)),
        w_in=draw(st.integers(k2, max_input)),
        k1=k1,
        k2=k2,
        s1=draw(st.integers(1, max_stride)),
        s2=draw(st.integers(1, max_stride)),
        p1=draw(st.integers(0, max_padding)),
        p2=draw(st.integers(0, max_padding)),
    )
    g = ConvGeometry(**kwargs)
    if assumption:
        from hypothesis import assume

        assume(check_assumption1(g))
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        prev = _acceptance.get(name)
        _acceptance[name] = "FAIL" if report.outcome == "failed" or prev == "FAIL" else report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance.items():
        label = "PASS" if outcome == "PASSED" else outcome
        terminalreporter.write_line(f"{label:5s} {name}")
