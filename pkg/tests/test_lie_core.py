import math
from fractions import Fraction

import numpy as np
import pytest

import sl3flows as sf
from sl3flows.lie_core import (
    BASIS_NAMES,
    DIM,
    FRAME,
    STRUCTURE,
    coords_to_matrix,
    matrix_to_coords,
)


# --- independent oracle: the Kronecker-delta commutator on elementary matrices

# frame elements as {(i, j): coefficient} dictionaries, 0-based indices
_FRAME_DICTS = [
    {(2, 0): 1},
    {(1, 0): 1},
    {(2, 1): 1},
    {(0, 0): Fraction(1, 2), (1, 1): Fraction(-1, 2)},
    {(1, 1): Fraction(1, 2), (2, 2): Fraction(-1, 2)},
    {(0, 1): 1},
    {(1, 2): 1},
    {(0, 2): 1},
]


def _delta_bracket(a: dict, b: dict) -> dict:
    out = {}
    for (i, j), ca in a.items():
        for (l, m), cb in b.items():
            if j == l:
                out[(i, m)] = out.get((i, m), 0) + ca * cb
            if m == i:
                out[(l, j)] = out.get((l, j), 0) - ca * cb
    return {k: v for k, v in out.items() if v != 0}


def _dict_to_matrix(d: dict) -> np.ndarray:
    m = np.zeros((3, 3))
    for (i, j), c in d.items():
        m[i, j] = float(c)
    return m


def test_bracket_matches_delta_formula_on_all_pairs():
    for i in range(DIM):
        for j in range(DIM):
            got = sf.bracket(sf.frame_element(i), sf.frame_element(j)).matrix
            want = _dict_to_matrix(_delta_bracket(_FRAME_DICTS[i], _FRAME_DICTS[j]))
            assert np.array_equal(got, want), (BASIS_NAMES[i], BASIS_NAMES[j])


def test_bracket_e12_e23_is_e13():
    got = sf.bracket(sf.frame_element("E12"), sf.frame_element("E23"))
    assert np.array_equal(got.matrix, sf.Z.matrix)


def test_bracket_antisymmetry_diagonal():
    rng = np.random.default_rng(1)
    for _ in range(5):
        x = sf.AlgebraElement.from_coords(rng.normal(size=DIM))
        assert np.max(np.abs(sf.bracket(x, x).matrix)) == 0.0


def test_bracket_e13_e12_is_zero():
    got = sf.bracket(sf.frame_element("E13"), sf.frame_element("E12"))
    assert np.max(np.abs(got.matrix)) == 0.0


def test_structure_table_exact_invariants():
    assert STRUCTURE.antisymmetry_holds()
    assert STRUCTURE.jacobi_holds()


def test_jacobi_random_triples():
    rng = np.random.default_rng(7)
    for _ in range(100):
        x, y, z = (sf.AlgebraElement.from_coords(rng.uniform(-1, 1, DIM)) for _ in range(3))
        acc = (
            sf.bracket(x, sf.bracket(y, z)).matrix
            + sf.bracket(y, sf.bracket(z, x)).matrix
            + sf.bracket(z, sf.bracket(x, y)).matrix
        )
        assert np.max(np.abs(acc)) <= 1e-12


def test_coords_roundtrip_exact():
    rng = np.random.default_rng(2)
    for _ in range(20):
        c = rng.uniform(-2, 2, DIM)
        assert np.array_equal(matrix_to_coords(coords_to_matrix(c)), c)


def test_exp_single_shear():
    t = 0.7
    g = sf.exp_map(sf.frame_element("E12"), t)
    assert np.array_equal(g.matrix, np.eye(3) + t * FRAME[5])


def test_exp_zero_time():
    x = sf.AlgebraElement.from_coords(np.arange(DIM, dtype=float))
    assert np.array_equal(sf.exp_map(x, 0.0).matrix, np.eye(3))


def test_exp_nilpotent_pair_series():
    x = sf.unipotent(1.0, 1.0)
    t = 0.9
    want = np.eye(3) + t * x.matrix + 0.5 * t * t * FRAME[7]
    assert np.max(np.abs(sf.exp_map(x, t).matrix - want)) <= 1e-15


def test_exp_group_law_nilpotent():
    x = sf.unipotent(0.3, -1.2, 0.5)
    a = sf.exp_map(x, 0.8).matrix @ sf.exp_map(x, 0.5).matrix
    b = sf.exp_map(x, 1.3).matrix
    assert np.max(np.abs(a - b)) <= 1e-12


def test_exp_diagonal_closed_form():
    t = 0.6
    g = sf.exp_map(sf.frame_element("D1"), t)
    want = np.diag([math.exp(t / 2), math.exp(-t / 2), 1.0])
    assert np.max(np.abs(g.matrix - want)) <= 1e-12


def test_ad_z_cubed_vanishes():
    m = sf.ad_matrix(sf.Z)
    assert np.max(np.abs(m @ m @ m)) == 0.0


def test_ad_zero():
    zero = sf.AlgebraElement(np.zeros((3, 3)))
    assert np.array_equal(sf.ad_matrix(zero), np.zeros((DIM, DIM)))


def test_ad_unipotent_strictly_lower_triangular():
    for u in (sf.frame_element("E12"), sf.unipotent(0.7, -0.3, 0.2), sf.Z):
        m = sf.ad_matrix(u)
        assert np.max(np.abs(np.triu(m))) == 0.0


def _expected_central_adjoint(at: float) -> np.ndarray:
    m = np.eye(DIM)
    m[3, 0] = 2 * at
    m[4, 0] = 2 * at
    m[7, 0] = -(at ** 2)
    m[6, 1] = -at
    m[5, 2] = at
    m[7, 3] = -at / 2
    m[7, 4] = -at / 2
    return m


@pytest.mark.parametrize("at", [0.5, 1.0, 2.0])
def test_adjoint_matrix_of_central_direction(at):
    got = sf.adjoint_matrix(sf.Z, at)
    assert np.max(np.abs(got - _expected_central_adjoint(at))) <= 1e-12


def test_adjoint_identity_at_zero():
    v = sf.AlgebraElement.from_coords(np.linspace(-1, 1, DIM))
    assert np.array_equal(sf.adjoint_matrix(v, 0.0), np.eye(DIM))


def test_adjoint_one_parameter_group():
    rng = np.random.default_rng(3)
    for _ in range(5):
        v = sf.AlgebraElement.from_coords(rng.uniform(-0.5, 0.5, DIM))
        prod = sf.adjoint_matrix(v, 0.4) @ sf.adjoint_matrix(v, 0.9)
        assert np.max(np.abs(prod - sf.adjoint_matrix(v, 1.3))) <= 1e-10


def test_adjoint_derivative_is_ad():
    rng = np.random.default_rng(4)
    h = 1e-5
    for _ in range(5):
        v = sf.AlgebraElement.from_coords(rng.uniform(-0.5, 0.5, DIM))
        fd = (sf.adjoint_matrix(v, h) - sf.adjoint_matrix(v, -h)) / (2 * h)
        assert np.max(np.abs(fd - sf.ad_matrix(v))) <= 1e-6


def test_heisenberg_partner_examples():
    w, c = sf.heisenberg_partner(sf.frame_element("E12"))
    assert np.array_equal(w.matrix, FRAME[6]) and c == -1.0
    w, c = sf.heisenberg_partner(sf.frame_element("E23"))
    assert np.array_equal(w.matrix, FRAME[5]) and c == 1.0
    # sign convention: [U, W] = -c Z in both cases
    for u in (sf.frame_element("E12"), sf.unipotent(2.0, 0.5, -1.0)):
        w, c = sf.heisenberg_partner(u)
        assert np.max(np.abs(sf.bracket(u, w).matrix - (-c) * sf.Z.matrix)) <= 1e-15


def test_heisenberg_partner_rejects_central_direction():
    with pytest.raises(ValueError):
        sf.heisenberg_partner(sf.frame_element("E13"))


def test_heisenberg_partner_rejects_non_nilpotent():
    with pytest.raises(ValueError):
        sf.heisenberg_partner(sf.frame_element("D1"))


def _sympy_rank_blocks(mat_exact) -> list:
    """Brute-force Jordan block sizes from exact ranks of powers."""
    import sympy

    m = sympy.Matrix(mat_exact)
    n = m.shape[0]
    ranks = [n]
    p = sympy.eye(n)
    for _ in range(n):
        p = p * m
        ranks.append(p.rank())
    blocks = []
    for k in range(1, n + 1):
        nxt = ranks[k + 1] if k + 1 <= n else 0
        blocks.extend([k] * (ranks[k - 1] - 2 * ranks[k] + nxt))
    return sorted(blocks, reverse=True)


def test_jordan_blocks_of_central_adjoint():
    assert sf.jordan_blocks(sf.ad_matrix(sf.Z)) == [3, 2, 2, 1]


def test_jordan_blocks_zero_matrix():
    assert sf.jordan_blocks(np.zeros((DIM, DIM))) == [1] * DIM


def test_jordan_blocks_vs_exact_rank_oracle():
    u = sf.unipotent(1.0, 1.0)
    m = sf.ad_matrix(u)
    exact = [[Fraction(x).limit_denominator(4) for x in row] for row in (2 * m)]
    want = _sympy_rank_blocks(exact)
    assert sf.jordan_blocks(m) == want
    assert want == [5, 3]


def test_jordan_blocks_rejects_non_nilpotent():
    with pytest.raises(ValueError):
        sf.jordan_blocks(sf.ad_matrix(sf.frame_element("D1")))


def test_decompose_frame_element():
    lower, diag, upper = sf.decompose(sf.Z)
    assert np.max(np.abs(lower.matrix)) == 0.0
    assert np.max(np.abs(diag.matrix)) == 0.0
    assert np.array_equal(upper.matrix, sf.Z.matrix)


def test_decompose_diagonal_matrix():
    x = sf.AlgebraElement(np.diag([1.0, 0.0, -1.0]))
    lower, diag, upper = sf.decompose(x)
    assert np.max(np.abs(lower.matrix)) == 0.0
    assert np.max(np.abs(upper.matrix)) == 0.0
    assert np.array_equal(diag.matrix, x.matrix)
    # spanned by the two diagonal frame directions with coefficients 2, 2
    assert np.allclose(diag.coords, [0, 0, 0, 2, 2, 0, 0, 0])


def test_decompose_linearity():
    rng = np.random.default_rng(5)
    x = sf.AlgebraElement.from_coords(rng.uniform(-1, 1, DIM))
    y = sf.AlgebraElement.from_coords(rng.uniform(-1, 1, DIM))
    for part_sum, part_x, part_y in zip(sf.decompose(x + y), sf.decompose(x), sf.decompose(y)):
        assert np.allclose(part_sum.matrix, part_x.matrix + part_y.matrix)


def test_algebra_element_rejects_trace():
    with pytest.raises(ValueError):
        sf.AlgebraElement(np.eye(3))


def test_group_element_rejects_det_drift():
    with pytest.raises(ValueError):
        sf.GroupElement(2.0 * np.eye(3))


def test_group_element_distance_and_compose():
    g = sf.exp_map(sf.frame_element("E21"), 0.3)
    h = sf.exp_map(sf.frame_element("E21"), -0.3)
    assert g.compose(h).distance(sf.GroupElement.identity()) <= 1e-15
