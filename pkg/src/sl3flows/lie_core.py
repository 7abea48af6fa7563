"""Exact linear algebra for sl(3,R) in a fixed ordered frame.

Everything in this package speaks the same 8-dimensional coordinate
language.  The frame, with its canonical index map, is

    0   E31                 1   E21                 2   E32
    3   D1 = (E11 - E22)/2  4   D2 = (E22 - E33)/2
    5   E12                 6   E23                 7   E13

where ``Eij`` is the elementary matrix with a single 1 in row i, column j.
Indices 0-2 span the lower nilpotent subalgebra, 3-4 the diagonal
(abelian) part, 5-7 the upper nilpotent subalgebra whose centre is
spanned by ``E13``.  All 8-vectors and 8x8 matrices produced here and in
the downstream modules use this ordering.

Structure constants are computed once, exactly, over the rationals; the
floating-point tables are derived from them.
"""

from __future__ import annotations

import dataclasses
from fractions import Fraction

import numpy as np
import scipy.linalg

#: absolute scale-relative tolerance for the traceless check
TRACE_TOL = 1e-12

#: default tolerance for |det - 1| on group elements
DET_TOL = 1e-9

DIM = 8

BASIS_NAMES = ("E31", "E21", "E32", "D1", "D2", "E12", "E23", "E13")


def _unit(i: int, j: int) -> np.ndarray:
    m = np.zeros((3, 3))
    m[i, j] = 1.0
    return m


_FRAME_LIST = [
    _unit(2, 0),
    _unit(1, 0),
    _unit(2, 1),
    0.5 * (_unit(0, 0) - _unit(1, 1)),
    0.5 * (_unit(1, 1) - _unit(2, 2)),
    _unit(0, 1),
    _unit(1, 2),
    _unit(0, 2),
]

FRAME = np.stack(_FRAME_LIST)
FRAME.flags.writeable = False


def matrix_to_coords(matrix: np.ndarray) -> np.ndarray:
    """Frame coordinates of a traceless 3x3 matrix (exact linear bijection)."""
    m = np.asarray(matrix, dtype=float)
    return np.array(
        [
            m[2, 0],
            m[1, 0],
            m[2, 1],
            2.0 * m[0, 0],
            -2.0 * m[2, 2],
            m[0, 1],
            m[1, 2],
            m[0, 2],
        ]
    )


def coords_to_matrix(coords: np.ndarray) -> np.ndarray:
    """Inverse of :func:`matrix_to_coords`."""
    return np.tensordot(np.asarray(coords, dtype=float), FRAME, axes=1)


@dataclasses.dataclass(frozen=True)
class AlgebraElement:
    """An element of sl(3,R): a traceless 3x3 matrix with frame coordinates.

    Instances are immutable; all operations return new elements.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m))))
        if abs(float(np.trace(m))) > TRACE_TOL * scale:
            raise ValueError(f"matrix is not traceless: trace = {np.trace(m):.3e}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_coords(cls, coords) -> "AlgebraElement":
        return cls(coords_to_matrix(coords))

    @property
    def coords(self) -> np.ndarray:
        return matrix_to_coords(self.matrix)

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix))

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(self.matrix + other.matrix)

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(self.matrix - other.matrix)

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(-self.matrix)

    def __mul__(self, scalar: float) -> "AlgebraElement":
        return AlgebraElement(self.matrix * float(scalar))

    __rmul__ = __mul__

    def __repr__(self):
        terms = []
        for name, c in zip(BASIS_NAMES, self.coords):
            if abs(c) > 1e-14:
                terms.append(f"{c:+g}*{name}")
        return "AlgebraElement(" + (" ".join(terms) or "0") + ")"


@dataclasses.dataclass(frozen=True)
class GroupElement:
    """A point of SL(3,R): a 3x3 matrix with det within `det_tol` of 1."""

    matrix: np.ndarray
    det_tol: float = DET_TOL

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
        drift = abs(float(np.linalg.det(m)) - 1.0)
        if drift > self.det_tol:
            raise ValueError(f"determinant drift {drift:.3e} exceeds tolerance {self.det_tol:.1e}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(np.eye(3))

    def det_drift(self) -> float:
        return abs(float(np.linalg.det(self.matrix)) - 1.0)

    def compose(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.matrix @ other.matrix)

    __matmul__ = compose

    def inverse(self) -> "GroupElement":
        return GroupElement(np.linalg.inv(self.matrix))

    def distance(self, other: "GroupElement") -> float:
        """Frobenius distance between the two matrices."""
        return float(np.linalg.norm(self.matrix - other.matrix))

    def __repr__(self):
        return f"GroupElement({np.array2string(self.matrix, precision=4)})"


# ---------------------------------------------------------------------------
# exact structure constants
# ---------------------------------------------------------------------------

_F0 = Fraction(0)
_F1 = Fraction(1)
_FH = Fraction(1, 2)


def _unit_exact(i, j):
    return tuple(
        tuple(_F1 if (r, c) == (i, j) else _F0 for c in range(3)) for r in range(3)
    )


def _scale_exact(mat, s):
    return tuple(tuple(s * x for x in row) for row in mat)


def _add_exact(a, b, sb=_F1):
    return tuple(tuple(x + sb * y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def _mul_exact(a, b):
    return tuple(
        tuple(sum(a[r][k] * b[k][c] for k in range(3)) for c in range(3))
        for r in range(3)
    )


FRAME_EXACT = (
    _unit_exact(2, 0),
    _unit_exact(1, 0),
    _unit_exact(2, 1),
    _scale_exact(_add_exact(_unit_exact(0, 0), _unit_exact(1, 1), -_F1), _FH),
    _scale_exact(_add_exact(_unit_exact(1, 1), _unit_exact(2, 2), -_F1), _FH),
    _unit_exact(0, 1),
    _unit_exact(1, 2),
    _unit_exact(0, 2),
)


def exact_coords(mat) -> tuple:
    """Frame coordinates of an exact (Fraction-valued) traceless matrix."""
    return (
        mat[2][0],
        mat[1][0],
        mat[2][1],
        2 * mat[0][0],
        -2 * mat[2][2],
        mat[0][1],
        mat[1][2],
        mat[0][2],
    )


def exact_bracket_coords(i: int, j: int) -> tuple:
    """Coordinates of [B_i, B_j], computed over the rationals."""
    a, b = FRAME_EXACT[i], FRAME_EXACT[j]
    comm = _add_exact(_mul_exact(a, b), _mul_exact(b, a), -_F1)
    return exact_coords(comm)


@dataclasses.dataclass(frozen=True)
class StructureTable:
    """The 8x8x8 table of structure constants: [B_i, B_j] = sum_k c[i][j][k] B_k."""

    constants: tuple

    @classmethod
    def build(cls) -> "StructureTable":
        table = tuple(
            tuple(exact_bracket_coords(i, j) for j in range(DIM)) for i in range(DIM)
        )
        return cls(table)

    def as_array(self) -> np.ndarray:
        arr = np.array(
            [[[float(c) for c in row] for row in plane] for plane in self.constants]
        )
        arr.flags.writeable = False
        return arr

    def antisymmetry_holds(self) -> bool:
        c = self.constants
        return all(
            c[i][j][k] == -c[j][i][k]
            for i in range(DIM)
            for j in range(DIM)
            for k in range(DIM)
        )

    def jacobi_holds(self) -> bool:
        """Exact Jacobi identity over the table, all index triples."""
        c = self.constants
        for i in range(DIM):
            for j in range(DIM):
                for k in range(DIM):
                    for m in range(DIM):
                        s = sum(
                            c[j][k][l] * c[i][l][m]
                            + c[k][i][l] * c[j][l][m]
                            + c[i][j][l] * c[k][l][m]
                            for l in range(DIM)
                        )
                        if s != 0:
                            return False
        return True


STRUCTURE = StructureTable.build()


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def frame_element(index) -> AlgebraElement:
    """Frame element by index 0..7 or by name ("E13", "D1", ...)."""
    if isinstance(index, str):
        index = BASIS_NAMES.index(index)
    return AlgebraElement(FRAME[index])


E31, E21, E32, D1, D2, E12, E23, E13 = (frame_element(i) for i in range(DIM))

#: the centre of the upper nilpotent subalgebra
Z = E13


def unipotent(c12: float, c23: float, c13: float = 0.0) -> AlgebraElement:
    """The upper-nilpotent element c12*E12 + c23*E23 + c13*E13."""
    return AlgebraElement(c12 * FRAME[5] + c23 * FRAME[6] + c13 * FRAME[7])


def bracket(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    """Commutator [x, y] = xy - yx."""
    return AlgebraElement(x.matrix @ y.matrix - y.matrix @ x.matrix)


def _nilpotent_part_exp(m: np.ndarray):
    """exp(m) by the terminating series if m^3 = 0, else None."""
    m2 = m @ m
    scale = max(1.0, float(np.max(np.abs(m)))) ** 3
    if np.max(np.abs(m2 @ m)) <= 1e-12 * scale:
        return np.eye(3) + m + 0.5 * m2
    return None


def exp_map(x: AlgebraElement, t: float = 1.0) -> GroupElement:
    """The exponential exp(t*x) as a group element.

    For nilpotent arguments (x^3 = 0) the series terminates and the result
    is exact; otherwise scaling-and-squaring (Pade) is used.
    """
    m = float(t) * x.matrix
    e = _nilpotent_part_exp(m)
    if e is None:
        e = scipy.linalg.expm(m)
    return GroupElement(e)


def ad_matrix(x: AlgebraElement) -> np.ndarray:
    """Matrix of y -> [x, y] in frame coordinates."""
    xm = x.matrix
    cols = [matrix_to_coords(xm @ FRAME[j] - FRAME[j] @ xm) for j in range(DIM)]
    return np.array(cols).T


def adjoint_matrix(v: AlgebraElement, t: float) -> np.ndarray:
    """Frame-coordinate matrix of y -> exp(tv) y exp(-tv).

    This equals the frame-coordinate differential of the time-(-t) flow of
    the constant field v, so the columns give the transported frame.
    """
    g = exp_map(v, t).matrix
    ginv = exp_map(v, -t).matrix
    cols = [matrix_to_coords(g @ FRAME[j] @ ginv) for j in range(DIM)]
    return np.array(cols).T


def heisenberg_partner(u: AlgebraElement) -> tuple[AlgebraElement, float]:
    """Pick the frame partner w of an upper-nilpotent u with [u, w] = -c z.

    The sign convention is fixed by ``[u, w] = -c * E13``; with
    u = E12 the partner is (E23, c = -1), with u = E23 it is (E12, c = 1).
    Rejects u parallel to E13 (that direction only reparametrizes the
    central flow) and u outside the upper nilpotent subalgebra.

    Returns:
        (w, c) with w one of E12, E23 and c != 0.
    """
    co = u.coords
    off = np.max(np.abs(np.concatenate([co[:5]])))
    if off > 1e-12 * max(1.0, float(np.max(np.abs(co)))):
        raise ValueError("u must lie in the upper nilpotent subalgebra span{E12, E23, E13}")
    c12, c23 = float(co[5]), float(co[6])
    if c12 * c12 + c23 * c23 <= 1e-24:
        raise ValueError(
            "u is parallel to E13: only a time-change of the central flow; no shear partner"
        )
    if abs(c12) >= abs(c23):
        return E23, -c12
    return E12, c23


def jordan_blocks(m: np.ndarray, sv_tol: float = 1e-9) -> list[int]:
    """Jordan block sizes of a nilpotent matrix, from ranks of its powers.

    Ranks are numerical (singular values above `sv_tol`).  Raises
    ValueError if m^n does not vanish.
    """
    a = np.asarray(m, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(a)))) ** n
    if np.max(np.abs(np.linalg.matrix_power(a, n))) > 1e-8 * scale:
        raise ValueError("matrix is not nilpotent (m^n != 0)")

    def rank(p: np.ndarray) -> int:
        sv = np.linalg.svd(p, compute_uv=False)
        return int(np.sum(sv > sv_tol))

    ranks = [n]
    p = np.eye(n)
    for _ in range(n):
        p = p @ a
        ranks.append(rank(p))
    blocks = []
    for k in range(1, n + 1):
        nxt = ranks[k + 1] if k + 1 <= n else 0
        count = ranks[k - 1] - 2 * ranks[k] + nxt
        blocks.extend([k] * count)
    return sorted(blocks, reverse=True)


def decompose(x: AlgebraElement):
    """Split x into (lower-nilpotent, diagonal, upper-nilpotent) parts."""
    co = x.coords
    parts = []
    for sl in (slice(0, 3), slice(3, 5), slice(5, 8)):
        c = np.zeros(DIM)
        c[sl] = co[sl]
        parts.append(AlgebraElement.from_coords(c))
    return tuple(parts)
