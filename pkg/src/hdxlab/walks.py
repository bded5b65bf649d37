"""Face-level random walks materialized as row-stochastic Markov operators.

Every operator pairs a transition matrix with the stationary measures of its
source and target levels; the joint distribution source(u) * P(u, v) is what
the spectra module symmetrizes.  Operators are dense when both levels have at
most 5000 faces and sparse (CSR) otherwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .complexes import Complex
from .errors import (
    EmptyWalk,
    HdxError,
    InconsistentMarginals,
    LevelOutOfRange,
    NotPartite,
    OverlappingColors,
)

DENSE_LIMIT = 5000
ROW_TOL = 1e-10


def _maybe_dense(mat):
    if sp.issparse(mat) and max(mat.shape) <= DENSE_LIMIT:
        return np.asarray(mat.todense())
    return mat


@dataclass
class MarkovOperator:
    """Row-stochastic transition matrix between two indexed face levels."""

    source_faces: np.ndarray
    source_measure: np.ndarray
    target_faces: np.ndarray
    target_measure: np.ndarray
    matrix: object  # (m_source, m_target) dense ndarray or scipy CSR

    def __post_init__(self):
        rows = self.row_sums()
        if np.any(np.abs(rows - 1.0) > ROW_TOL):
            raise HdxError(f"rows must be stochastic; worst residual "
                           f"{np.max(np.abs(rows - 1.0)):.3g}")

    # -- shape ------------------------------------------------------------------

    @property
    def shape(self):
        return (len(self.source_measure), len(self.target_measure))

    @property
    def is_square(self) -> bool:
        return (self.source_faces.shape == self.target_faces.shape
                and np.array_equal(self.source_faces, self.target_faces))

    def row_sums(self) -> np.ndarray:
        if sp.issparse(self.matrix):
            return np.asarray(self.matrix.sum(axis=1)).ravel()
        return self.matrix.sum(axis=1)

    # -- distributions -------------------------------------------------------------

    def joint(self):
        """Joint distribution source(u) * P(u, v); sums to 1."""
        if sp.issparse(self.matrix):
            return sp.diags(self.source_measure) @ self.matrix
        return self.source_measure[:, None] * self.matrix

    def reverse(self) -> "MarkovOperator":
        """Time-reversed operator from target to source."""
        j = self.joint()
        if sp.issparse(j):
            mat = (sp.diags(1.0 / self.target_measure) @ j.T).tocsr()
        else:
            mat = j.T / self.target_measure[:, None]
        return MarkovOperator(self.target_faces, self.target_measure,
                              self.source_faces, self.source_measure, mat)

    def compose(self, other: "MarkovOperator") -> "MarkovOperator":
        if self.shape[1] != other.shape[0]:
            raise HdxError("operator shapes do not compose")
        mat = self.matrix @ other.matrix
        return MarkovOperator(self.source_faces, self.source_measure,
                              other.target_faces, other.target_measure,
                              _maybe_dense(mat))

    def apply(self, g: np.ndarray) -> np.ndarray:
        """Average a function on the target level back to the source level."""
        return self.matrix @ g

    def detailed_balance_residual(self) -> float:
        j = self.joint()
        jr = self.reverse().joint()
        diff = j - jr.T
        if sp.issparse(diff):
            return float(abs(diff).max()) if diff.nnz else 0.0
        return float(np.max(np.abs(diff))) if diff.size else 0.0

    def to_bipartite_graph(self) -> "BipartiteGraph":
        return BipartiteGraph(self.source_faces, self.target_faces, self.joint())

    def to_weighted_graph(self) -> "WeightedGraph":
        if not self.is_square:
            raise HdxError("not a square operator")
        return WeightedGraph(self.source_faces, self.joint())

    def triplets(self):
        """Yield (source_face, target_face, prob) rows for CSV export."""
        mat = self.matrix.tocoo() if sp.issparse(self.matrix) else None
        if mat is None:
            for i in range(self.shape[0]):
                for j in range(self.shape[1]):
                    p = float(self.matrix[i, j])
                    if p > 0:
                        yield (tuple(self.source_faces[i]), tuple(self.target_faces[j]), p)
        else:
            for i, j, p in zip(mat.row, mat.col, mat.data):
                yield (tuple(self.source_faces[i]), tuple(self.target_faces[j]), float(p))


@dataclass
class BipartiteGraph:
    """Bipartite edge distribution; each side is its own probability space."""

    left_items: object
    right_items: object
    joint: object  # (|L|, |R|) nonnegative, sums to 1

    def __post_init__(self):
        total = self.joint.sum()
        if abs(total - 1.0) > 1e-8:
            raise InconsistentMarginals(f"edge distribution sums to {total:.12g}")

    @property
    def left_measure(self) -> np.ndarray:
        if sp.issparse(self.joint):
            return np.asarray(self.joint.sum(axis=1)).ravel()
        return self.joint.sum(axis=1)

    @property
    def right_measure(self) -> np.ndarray:
        if sp.issparse(self.joint):
            return np.asarray(self.joint.sum(axis=0)).ravel()
        return self.joint.sum(axis=0)


@dataclass
class WeightedGraph:
    """Symmetric joint distribution over ordered vertex pairs."""

    items: object
    joint: object  # (m, m), symmetric, sums to 1

    def __post_init__(self):
        diff = self.joint - self.joint.T
        resid = float(abs(diff).max()) if sp.issparse(diff) else float(np.max(np.abs(diff)))
        if resid > 1e-9:
            raise HdxError(f"graph joint must be symmetric; residual {resid:.3g}")

    @property
    def vertex_measure(self) -> np.ndarray:
        if sp.issparse(self.joint):
            return np.asarray(self.joint.sum(axis=1)).ravel()
        return self.joint.sum(axis=1)

    def transition(self):
        pi = self.vertex_measure
        if sp.issparse(self.joint):
            return sp.diags(1.0 / pi) @ self.joint
        return self.joint / pi[:, None]

    def cut(self, a, b) -> float:
        """Ordered-pair mass J(A x B)."""
        a = np.asarray(sorted(a), dtype=int)
        b = np.asarray(sorted(b), dtype=int)
        if sp.issparse(self.joint):
            return float(self.joint[np.ix_(a, b)].sum())
        return float(self.joint[np.ix_(a, b)].sum())


# -- constructors -----------------------------------------------------------------


def _check_level(c: Complex, k: int, hi: int | None = None):
    top = c.d if hi is None else hi
    if not 0 <= k <= top:
        raise LevelOutOfRange(f"level {k} out of range [0, {top}]")


def _operator(c, src_level, tgt_level, rows, cols, vals) -> MarkovOperator:
    src = c.level(src_level)
    tgt = c.level(tgt_level)
    shape = (src.size, tgt.size)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    mat.sum_duplicates()
    return MarkovOperator(src.faces, src.measure, tgt.faces, tgt.measure,
                          _maybe_dense(mat))


def up_operator(c: Complex, k: int) -> MarkovOperator:
    """Walk one level up; P(t -> s) = measure(s) / ((k+2) measure(t))."""
    if not 0 <= k <= c.d - 1:
        raise LevelOutOfRange(f"up operator needs 0 <= k <= d-1, got {k}")
    src = c.level(k)
    tgt = c.level(k + 1)
    rows, cols, vals = [], [], []
    for drop in range(k + 2):
        keep = [j for j in range(k + 2) if j != drop]
        sub_idx = src.index_rows(tgt.faces[:, keep])
        rows.append(sub_idx)
        cols.append(np.arange(tgt.size))
        vals.append(tgt.measure / ((k + 2) * src.measure[sub_idx]))
    return _operator(c, k, k + 1, np.concatenate(rows), np.concatenate(cols),
                     np.concatenate(vals))


def down_operator(c: Complex, k: int) -> MarkovOperator:
    """Walk one level down; uniform over the k+2 facets."""
    if not 0 <= k <= c.d - 1:
        raise LevelOutOfRange(f"down operator needs 0 <= k <= d-1, got {k}")
    src = c.level(k + 1)
    tgt = c.level(k)
    rows, cols, vals = [], [], []
    for drop in range(k + 2):
        keep = [j for j in range(k + 2) if j != drop]
        sub_idx = tgt.index_rows(src.faces[:, keep])
        rows.append(np.arange(src.size))
        cols.append(sub_idx)
        vals.append(np.full(src.size, 1.0 / (k + 2)))
    return _operator(c, k + 1, k, np.concatenate(rows), np.concatenate(cols),
                     np.concatenate(vals))


def containment_operator(c: Complex, k: int, l: int) -> MarkovOperator:
    """Multi-level down walk X(k) -> X(l); uniform over contained l-faces."""
    if not (-1 <= l < k <= c.d):
        raise LevelOutOfRange(f"containment needs -1 <= l < k <= d, got k={k}, l={l}")
    src = c.level(k)
    if l == -1:
        mat = np.ones((src.size, 1))
        tgt = c.level(-1)
        return MarkovOperator(src.faces, src.measure, tgt.faces, tgt.measure, mat)
    tgt = c.level(l)
    p = 1.0 / math.comb(k + 1, l + 1)
    rows, cols, vals = [], [], []
    for keep in itertools.combinations(range(k + 1), l + 1):
        sub_idx = tgt.index_rows(src.faces[:, list(keep)])
        rows.append(np.arange(src.size))
        cols.append(sub_idx)
        vals.append(np.full(src.size, p))
    return _operator(c, k, l, np.concatenate(rows), np.concatenate(cols),
                     np.concatenate(vals))


def containment_operator_by_product(c: Complex, k: int, l: int) -> MarkovOperator:
    """Same walk as a product of single-level down operators."""
    if not (0 <= l < k <= c.d):
        raise LevelOutOfRange("product form needs 0 <= l < k <= d")
    op = down_operator(c, k - 1)
    for level in range(k - 2, l - 1, -1):
        op = op.compose(down_operator(c, level))
    return op


def lower_walk(c: Complex, k: int, l: int) -> MarkovOperator:
    """Down to X(l), back up: a self-adjoint PSD walk on X(k)."""
    down = containment_operator(c, k, l)
    return down.compose(down.reverse())


def complement_walk(c: Complex, l1: int, l2: int) -> MarkovOperator:
    """Bipartite walk X(l1) -> X(l2) through a disjoint union face."""
    _check_level(c, l1)
    _check_level(c, l2)
    u_level = l1 + l2 + 1
    if u_level > c.d:
        raise LevelOutOfRange(
            f"complement walk needs l1+l2+1 <= d, got {l1}+{l2}+1 > {c.d}")
    union = c.level(u_level)
    src = c.level(l1)
    tgt = c.level(l2)
    split = 1.0 / math.comb(u_level + 1, l1 + 1)
    rows, cols, vals = [], [], []
    all_pos = range(u_level + 1)
    for keep in itertools.combinations(all_pos, l1 + 1):
        rest = [j for j in all_pos if j not in keep]
        s_idx = src.index_rows(union.faces[:, list(keep)])
        t_idx = tgt.index_rows(union.faces[:, rest])
        rows.append(s_idx)
        cols.append(t_idx)
        vals.append(union.measure * split)
    joint = sp.coo_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(src.size, tgt.size)).tocsr()
    joint.sum_duplicates()
    if joint.nnz == 0:
        raise EmptyWalk("no union face exists for this complement walk")
    mat = sp.diags(1.0 / src.measure) @ joint
    return MarkovOperator(src.faces, src.measure, tgt.faces, tgt.measure,
                          _maybe_dense(mat.tocsr()))


def colored_walk(c: Complex, colors_i, colors_j) -> MarkovOperator:
    """Bipartite walk X[I] -> X[J] through a face of color I | J."""
    if not c.is_partite:
        raise NotPartite("colored walk needs a partite complex")
    I = frozenset(int(x) for x in colors_i)
    J = frozenset(int(x) for x in colors_j)
    if not I or not J:
        raise HdxError("color sets must be nonempty")
    if I & J:
        raise OverlappingColors(f"colors overlap: {sorted(I & J)}")
    faces_i, meas_i = c.colored_level(I)
    faces_j, meas_j = c.colored_level(J)
    faces_u, meas_u = c.colored_level(I | J)
    col = np.asarray(c.coloring)
    in_i = np.isin(col[faces_u], sorted(I))
    s_rows = np.sort(faces_u[in_i].reshape(len(faces_u), len(I)), axis=1)
    t_rows = np.sort(faces_u[~in_i].reshape(len(faces_u), len(J)), axis=1)

    def rows_to_idx(rows, ref_faces):
        from .complexes import _encode_rows
        ref_keys = _encode_rows(ref_faces.astype(np.int64), c.n_vertices)
        order = np.argsort(ref_keys)
        keys = _encode_rows(rows.astype(np.int64), c.n_vertices)
        pos = np.searchsorted(ref_keys[order], keys)
        return order[pos]

    s_idx = rows_to_idx(s_rows, faces_i)
    t_idx = rows_to_idx(t_rows, faces_j)
    joint = sp.coo_matrix((meas_u, (s_idx, t_idx)),
                          shape=(len(faces_i), len(faces_j))).tocsr()
    joint.sum_duplicates()
    if joint.nnz == 0:
        raise EmptyWalk("no face carries both color sets")
    mat = sp.diags(1.0 / meas_i) @ joint
    return MarkovOperator(faces_i, meas_i, faces_j, meas_j,
                          _maybe_dense(mat.tocsr()))


def fixed_union_walk(c: Complex, l: int, j: int) -> MarkovOperator:
    """Walk on X(l) through a common (l+j)-face, keeping |t & t'| = l+1-j."""
    _check_level(c, l)
    if not 1 <= j <= l + 1:
        raise LevelOutOfRange(f"fixed union walk needs 1 <= j <= l+1, got j={j}")
    if l + j + 1 > c.d + 1:
        raise LevelOutOfRange(f"fixed union walk needs l+j <= d, got {l}+{j} > {c.d}")
    union = c.level(l + j)
    lev = c.level(l)
    norm = 1.0 / (math.comb(l + j + 1, l + 1) * math.comb(l + 1, j))
    rows, cols, vals = [], [], []
    all_pos = range(l + j + 1)
    for keep in itertools.combinations(all_pos, l + 1):
        rest = tuple(p for p in all_pos if p not in keep)  # |rest| = j
        t_idx = lev.index_rows(np.sort(union.faces[:, list(keep)], axis=1))
        # t' takes all of rest plus l+1-j positions inside keep
        for extra in itertools.combinations(keep, l + 1 - j):
            cols_sel = sorted(rest + extra)
            t2_idx = lev.index_rows(np.sort(union.faces[:, cols_sel], axis=1))
            rows.append(t_idx)
            cols.append(t2_idx)
            vals.append(union.measure * norm)
    joint = sp.coo_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(lev.size, lev.size)).tocsr()
    joint.sum_duplicates()
    mat = sp.diags(1.0 / lev.measure) @ joint
    return MarkovOperator(lev.faces, lev.measure, lev.faces, lev.measure,
                          _maybe_dense(mat.tocsr()))


def nonlazy_upper_walk(c: Complex, l: int) -> MarkovOperator:
    """Up one level then down to a different l-face (direct construction)."""
    if not 0 <= l <= c.d - 1:
        raise LevelOutOfRange(f"non-lazy upper walk needs 0 <= l <= d-1, got {l}")
    lev = c.level(l)
    upper = c.level(l + 1)
    rows, cols, vals = [], [], []
    for drop in range(l + 2):
        keep = [x for x in range(l + 2) if x != drop]
        t2 = lev.index_rows(upper.faces[:, keep])
        for drop2 in range(l + 2):
            if drop2 == drop:
                continue
            keep2 = [x for x in range(l + 2) if x != drop2]
            t1 = lev.index_rows(upper.faces[:, keep2])
            rows.append(t1)
            cols.append(t2)
            vals.append(upper.measure / ((l + 2) * (l + 1)))
    joint = sp.coo_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(lev.size, lev.size)).tocsr()
    joint.sum_duplicates()
    mat = sp.diags(1.0 / lev.measure) @ joint
    return MarkovOperator(lev.faces, lev.measure, lev.faces, lev.measure,
                          _maybe_dense(mat.tocsr()))


def neighborhood_system(c: Complex, k: int):
    """Ball of each k-face: the vertex set of its link, in original ids."""
    if not 0 <= k <= c.d - 1:
        raise LevelOutOfRange(f"neighborhood system needs 0 <= k <= d-1, got {k}")
    lev = c.level(k)
    upper = c.level(k + 1)
    balls: dict[tuple, set] = {lev.face(i): set() for i in range(lev.size)}
    for drop in range(k + 2):
        keep = [j for j in range(k + 2) if j != drop]
        sub_idx = lev.index_rows(upper.faces[:, keep])
        for si, row in zip(sub_idx, upper.faces):
            balls[lev.face(int(si))].add(int(row[drop]))
    return {z: tuple(sorted(vs)) for z, vs in balls.items()}


def underlying_graph(c: Complex) -> WeightedGraph:
    """Weighted graph on X(0) whose ordered-pair joint splits each edge evenly."""
    if c.d < 1:
        raise LevelOutOfRange("underlying graph needs d >= 1")
    verts = c.level(0)
    edges = c.level(1)
    i_idx = verts.index_rows(edges.faces[:, [0]])
    j_idx = verts.index_rows(edges.faces[:, [1]])
    half = edges.measure / 2.0
    joint = sp.coo_matrix((np.concatenate([half, half]),
                           (np.concatenate([i_idx, j_idx]),
                            np.concatenate([j_idx, i_idx]))),
                          shape=(verts.size, verts.size)).tocsr()
    joint.sum_duplicates()
    return WeightedGraph(verts.faces, _maybe_dense(joint))
