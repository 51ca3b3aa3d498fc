import itertools

import pytest
from hypothesis import given, settings

from convnorm.errors import GeometryError
from convnorm.geometry import ConvGeometry, KernelIndex, check_assumption1, index_classes, output_dims
from convnorm.norms import Kernel4D
from convnorm.oracle import materialize

from conftest import geometries


def geom(h=5, k=3, s=1, p=0, d_in=1, d_out=1):
    return ConvGeometry(d_in, d_out, h, h, k, k, s, s, p, p)


@pytest.mark.parametrize(
    "h, k, p, s, expected",
    [
        (32, 3, 1, 1, 32),
        (5, 3, 0, 2, 2),
        (7, 5, 1, 2, 3),  # the 7x7, k=5, p=1, s=2 illustration of the index classes
    ],
)
def test_output_dims(h, k, p, s, expected):
    assert output_dims(geom(h, k, s, p)) == (expected, expected)


@pytest.mark.parametrize(
    "h, k, s, p, expected",
    [
        (32, 3, 1, 1, True),
        (7, 5, 2, 1, True),
        (5, 5, 1, 0, False),  # c = 1 even without padding: 5 + 1 > 5
        (4, 3, 1, 0, True),
        (5, 3, 3, 0, False),
        (6, 3, 3, 0, True),
        (5, 3, 1, 2, True),  # c = 2: 3 + 2 - 2 = 3
    ],
)
def test_check_assumption1(h, k, s, p, expected):
    assert check_assumption1(geom(h, k, s, p)) is expected


def test_assumption_checks_axes_independently():
    g = ConvGeometry(1, 1, 32, 3, 3, 3)
    assert not check_assumption1(g)
    assert check_assumption1(ConvGeometry(1, 1, 32, 4, 3, 3))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(d_in=0),
        dict(k1=0),
        dict(s1=0),
        dict(p2=-1),
        dict(k1=8),  # does not fit the 5 + 2*0 input
        dict(dilation=2),
        dict(groups=2),
    ],
)
def test_invalid_geometry(kwargs):
    base = dict(d_in=1, d_out=1, h_in=5, w_in=5, k1=3, k2=3)
    base.update(kwargs)
    with pytest.raises(GeometryError):
        ConvGeometry(**base)


def brute_class(g, a, b):
    slack1, slack2 = g.slack
    return {
        (c, d)
        for c, d in itertools.product(range(1, g.k1 + 1), range(1, g.k2 + 1))
        if (c - a) % g.s1 == 0 and (d - b) % g.s2 == 0 and 0 <= c - a <= slack1 and 0 <= d - b <= slack2
    }


def test_stride_one_class_is_everything():
    fam = index_classes(geom(h=5, k=3))
    assert set(fam.by_anchor(1, 1).members) == {(c, d) for c in (1, 2, 3) for d in (1, 2, 3)}


def test_stride_two_classes():
    fam = index_classes(geom(h=7, k=3, s=2))
    assert set(fam.by_anchor(1, 1).members) == {(1, 1), (1, 3), (3, 1), (3, 3)}
    assert set(fam.by_anchor(2, 2).members) == {(2, 2)}


def test_stride2_class_pattern():
    fam = index_classes(geom(h=7, k=5, s=2, p=1))
    cls = fam.by_anchor(1, 1)
    assert set(cls.members) == {(c, d) for c in (1, 3, 5) for d in (1, 3, 5)}
    assert len(cls) == 9
    assert cls.anchor == KernelIndex(1, 1)


def test_dedupe_keeps_distinct_sets():
    g = geom(h=5, k=3)
    full = index_classes(g, dedupe=False)
    dedup = index_classes(g)
    assert len(full) == 9
    assert {c.members for c in full} == {c.members for c in dedup}
    assert len({c.members for c in dedup}) == len(dedup)


@settings(max_examples=200, deadline=None)
@given(geometries(assumption=False))
def test_classes_match_brute_force(g):
    fam = index_classes(g, dedupe=False)
    assert len(fam) == g.k1 * g.k2
    union = set()
    for cls in fam:
        members = set(cls.members)
        assert cls.anchor in members
        assert members == brute_class(g, *cls.anchor)
        union |= members
    assert union == set(itertools.product(range(1, g.k1 + 1), range(1, g.k2 + 1)))
    for cls in index_classes(g):
        assert set(fam.by_anchor(*cls.anchor).members) == set(cls.members)


@settings(max_examples=50, deadline=None)
@given(geometries(assumption=False, max_input=7))
def test_matrix_shape_matches_output_dims(g):
    import numpy as np

    M = materialize(Kernel4D(g, np.ones(g.kernel_shape)))
    h_out, w_out = output_dims(g)
    assert M.matrix.shape == (g.d_out * h_out * w_out, g.d_in * g.h_in * g.w_in)


def test_by_anchor_out_of_range():
    with pytest.raises(KeyError):
        index_classes(geom()).by_anchor(4, 1)
