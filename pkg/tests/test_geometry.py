import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from projsa.geometry import (
    Box,
    FaceSignature,
    FaceTag,
    dist_to_normal_cone_shifted,
    face_signature,
    in_normal_cone,
    project_box,
    project_tangent,
)

L, U, I = FaceTag.AT_LOWER, FaceTag.AT_UPPER, FaceTag.INTERIOR
finite = st.floats(-1e6, 1e6, allow_nan=False)


@st.composite
def boxes(draw, max_dim=4):
    d = draw(st.integers(1, max_dim))
    lo = np.array(draw(st.lists(st.floats(-100, 100), min_size=d, max_size=d)))
    w = np.array(draw(st.lists(st.floats(1e-3, 50), min_size=d, max_size=d)))
    return Box(lo, lo + w)


@st.composite
def box_and_point(draw):
    box = draw(boxes())
    x = np.array(draw(st.lists(finite, min_size=box.dim, max_size=box.dim)))
    return box, x


def test_box_rejects_degenerate():
    with pytest.raises(ValueError):
        Box([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        Box([0.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        Box([], [])


@pytest.mark.parametrize("lo,hi,x,want", [
    ([0, 0], [1, 1], [1.5, 0.5], [1.0, 0.5]),
    ([0, 0], [1, 1], [0.3, 0.7], [0.3, 0.7]),
    ([-1, 0], [1, 1], [-3, 2], [-1, 1]),
])
def test_project_box_examples(lo, hi, x, want):
    assert project_box(x, Box(lo, hi)).tolist() == want


def test_project_box_dimension_mismatch():
    with pytest.raises(ValueError):
        project_box([1.0, 2.0, 3.0], Box.cube(2))


@pytest.mark.parametrize("x,want", [
    ([0.0, 1.0], (L, U)),
    ([0.5, 0.5], (I, I)),
    ([1e-10, 0.5], (L, I)),
])
def test_face_signature_examples(x, want):
    assert tuple(face_signature(x, Box.cube(2), 1e-9)) == want


def test_face_signature_errors():
    with pytest.raises(ValueError):
        face_signature([1.1, 0.5], Box.cube(2), 1e-9)
    with pytest.raises(ValueError):
        face_signature([0.5, 0.5], Box.cube(2), 0.5)


@pytest.mark.parametrize("tags,v,want", [
    ((U, U), [2, 3], True),
    ((I, I), [0.1, 0], False),
    ((L, I), [-4, 0], True),
    ((L, I), [1, 0], False),
    ((U, I), [-1, 0], False),
])
def test_in_normal_cone_examples(tags, v, want):
    assert in_normal_cone(v, FaceSignature.of(*tags)) is want


@pytest.mark.parametrize("tags,v,want", [
    ((L, I), [-2, 3], [0, 3]),
    ((I, I), [5, -5], [5, -5]),
    ((U, U), [1, -1], [0, -1]),
])
def test_project_tangent_examples(tags, v, want):
    assert project_tangent(v, FaceSignature.of(*tags)).tolist() == want


@pytest.mark.parametrize("c,lo,hi,tag,want", [
    (-2.0, -1.0, 1.0, I, 1.0),
    (-1.0, 1.0, 1.0, I, 0.0),
    (-3.0, 0.0, 0.0, L, 0.0),
    (3.0, 0.0, 0.0, L, 3.0),
    (3.0, 0.0, 0.0, U, 0.0),
    (-3.0, 0.0, 0.0, U, 3.0),
    (0.0, -math.inf, math.inf, I, 0.0),
])
def test_dist_to_normal_cone_shifted_examples(c, lo, hi, tag, want):
    assert dist_to_normal_cone_shifted(c, lo, hi, tag) == want


def test_dist_to_normal_cone_shifted_rejects_reversed_interval():
    with pytest.raises(ValueError):
        dist_to_normal_cone_shifted(0.0, 1.0, -1.0, I)


@given(box_and_point())
def test_projection_idempotent_and_feasible(bx):
    box, x = bx
    p = project_box(x, box)
    assert box.contains(p)
    assert np.array_equal(project_box(p, box), p)


@given(box_and_point(), st.data())
def test_projection_nonexpansive(bx, data):
    box, x = bx
    y = np.array(data.draw(st.lists(finite, min_size=box.dim, max_size=box.dim)))
    # coordinatewise: |clamp(a) - clamp(b)| <= |a - b| holds exactly in floating point
    assert np.all(np.abs(project_box(x, box) - project_box(y, box)) <= np.abs(x - y))
    assert np.linalg.norm(project_box(x, box) - project_box(y, box)) <= np.linalg.norm(x - y)


@given(box_and_point())
def test_residual_lies_in_normal_cone(bx):
    box, y = bx
    p = project_box(y, box)
    assert in_normal_cone(y - p, face_signature(p, box))


@given(st.lists(st.sampled_from([L, U, I]), min_size=1, max_size=5), st.data())
def test_tangent_normal_complementarity(tags, data):
    sig = FaceSignature.of(*tags)
    d = len(tags)
    v = np.array(data.draw(st.lists(finite, min_size=d, max_size=d)))
    t = project_tangent(v, sig)
    # Moreau split: v = t + n with n normal and t orthogonal to n
    n = v - t
    assert np.array_equal(t + n, v)
    assert in_normal_cone(n, sig)
    assert float(np.dot(t, n)) == 0.0
    w = np.array(data.draw(st.lists(st.floats(0, 1e3), min_size=d, max_size=d)))
    w = np.where(np.array(tags) == L, -w, np.where(np.array(tags) == U, w, 0.0))
    assert in_normal_cone(w, sig)
    assert float(np.dot(t, w)) <= 0.0


@given(st.floats(-10, 10), st.floats(-5, 5), st.floats(0, 5), st.sampled_from([L, U, I]))
def test_dist_matches_brute_force(c, lo, width, tag):
    hi = lo + width
    # brute: dist(0, c + [lo, hi] + (-N)) over a dense sample of the set
    pts = c + np.linspace(lo, hi, 201)
    if tag == L:
        pts = np.concatenate([pts, c + hi + np.linspace(0, 50, 2001)])
    elif tag == U:
        pts = np.concatenate([pts, c + lo - np.linspace(0, 50, 2001)])
    brute = float(np.min(np.abs(pts)))
    got = dist_to_normal_cone_shifted(c, lo, hi, tag)
    assert got <= brute + 1e-12
    assert brute - got <= max(width / 200, 50 / 2000) + 1e-12
