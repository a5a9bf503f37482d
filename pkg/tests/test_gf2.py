import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from cfrelay.gf2 import (
    csr_from_edges,
    forward_substitute,
    leftover_rows_as_ints,
    rref,
    row_residuals,
    solution_space,
    solve_core,
    triangulate,
)
from oracles import all_binary, gf2_rank, gf2_solve


def _csr(a):
    r, c = np.nonzero(a)
    return csr_from_edges(r, c, a.shape[0])


@st.composite
def systems(draw):
    rows = draw(st.integers(1, 14))
    cols = draw(st.integers(1, 14))
    seed = draw(st.integers(0, 2**31))
    density = draw(st.floats(0.1, 0.6))
    rng = np.random.default_rng(seed)
    a = (rng.random((rows, cols)) < density).astype(np.uint8)
    return a, rng


def test_csr_groups_rows():
    ptr, idx = csr_from_edges([2, 0, 2, 1], [5, 3, 1, 4], 3)
    assert ptr.tolist() == [0, 1, 2, 4]
    assert idx.tolist() == [3, 4, 1, 5]


@settings(max_examples=200)
@given(systems())
def test_solve_core_agrees_with_dense_elimination(sys_):
    a, rng = sys_
    b = rng.integers(0, 2, a.shape[0]).astype(np.uint8)
    ptr, idx = _csr(a)
    tri = triangulate(ptr, idx, a.shape[1])
    x, bad, unique = solve_core(tri, b)
    consistent, dense_unique, _ = gf2_solve(a, b)
    assert (len(bad) == 0) == consistent
    assert unique == dense_unique
    if consistent:
        assert np.array_equal(a.astype(int) @ x % 2, b)


@settings(max_examples=200)
@given(systems())
def test_unique_solution_is_recovered(sys_):
    a, rng = sys_
    x0 = rng.integers(0, 2, a.shape[1]).astype(np.uint8)
    b = (a.astype(int) @ x0 % 2).astype(np.uint8)
    tri = triangulate(*_csr(a), a.shape[1])
    x, bad, unique = solve_core(tri, b)
    assert not bad
    if gf2_rank(a) == a.shape[1]:
        assert unique and np.array_equal(x, x0)


@settings(max_examples=100)
@given(systems())
def test_triangulation_structure(sys_):
    a, _ = sys_
    tri = triangulate(*_csr(a), a.shape[1])
    cols = [c for _, c in tri.pivots] + list(tri.decimated)
    assert sorted(cols) == list(range(a.shape[1]))
    pivot_rows = [r for r, _ in tri.pivots]
    assert len(set(pivot_rows)) == len(pivot_rows)
    assert not set(pivot_rows) & set(tri.leftover)
    # the reduced core has the rank the pivots leave over
    core = leftover_rows_as_ints(tri)
    _, piv = rref(core, tri.n_decimated)
    assert len(tri.pivots) + len(piv) == gf2_rank(a)


@settings(max_examples=100)
@given(systems())
def test_unknown_columns_are_respected(sys_):
    a, rng = sys_
    unknown = rng.random(a.shape[1]) < 0.6
    x0 = rng.integers(0, 2, a.shape[1]).astype(np.uint8)
    b = (a.astype(int) @ x0 % 2).astype(np.uint8)
    fold = (a[:, ~unknown].astype(int) @ x0[~unknown] % 2).astype(np.uint8)
    tri = triangulate(*_csr(a), a.shape[1], unknown_cols=unknown)
    x, bad, unique = solve_core(tri, b ^ fold)
    assert not bad
    assert np.all(x[~unknown] == 0)
    full = np.where(unknown, x, x0)
    assert np.array_equal(a.astype(int) @ full % 2, b)
    assert unique == (gf2_rank(a[:, unknown]) == unknown.sum())


def test_active_rows_limit_the_system():
    a = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]], dtype=np.uint8)
    tri = triangulate(*_csr(a), 3, active_rows=[True, False, False])
    involved = {r for r, _ in tri.pivots} | set(tri.leftover)
    assert involved <= {0}


def test_forward_substitute_and_residuals():
    a = np.array([[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1]], dtype=np.uint8)
    tri = triangulate(*_csr(a), 4)
    rhs = np.array([1, 0, 1], dtype=np.uint8)
    vals = np.zeros(tri.n_decimated, dtype=np.uint8)
    x = forward_substitute(tri, rhs, vals)
    assert np.array_equal(a.astype(int) @ x % 2, rhs)
    assert not row_residuals(tri, [0, 1, 2], rhs, x).any()


def test_rref_carries_augmented_bits():
    rows = [0b1011, 0b0110, 0b1101]  # low 3 bits are coefficients, bit 3 the rhs
    reduced, piv = rref(rows, 3)
    assert len(piv) == gf2_rank(np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]]))
    for r in reduced[len(piv):]:
        assert r & 0b111 == 0


@settings(max_examples=150)
@given(systems())
def test_solution_space_matches_enumeration(sys_):
    a, rng = sys_
    cols = a.shape[1]
    b = rng.integers(0, 2, a.shape[0]).astype(np.uint8)
    ptr, idx = _csr(a)
    x0, basis = solution_space(triangulate(ptr, idx, cols), b)
    xs = all_binary(cols)
    truth = {tuple(x) for x in xs[np.all((xs.astype(int) @ a.T.astype(int)) % 2 == b, axis=1)].tolist()}
    if x0 is None:
        assert not truth
        return
    assert len(basis) == cols - gf2_rank(a)
    combos = all_binary(len(basis)).astype(int)
    span = (combos @ np.array(basis, dtype=int).reshape(len(basis), cols)) % 2 if basis else np.zeros((1, cols), int)
    got = {tuple(((x0.astype(int) + s) % 2).tolist()) for s in span}
    assert got == truth
    if basis:
        x1, none = solution_space(triangulate(ptr, idx, cols), b, max_basis=len(basis) - 1)
        assert none is None and np.array_equal(x1, x0)
