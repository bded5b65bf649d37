"""Eigenvalue computation and numerical verifiers for spectral inequalities.

All spectra are computed on measure-symmetrized operators: a reversible walk P
with stationary measure pi becomes D^{1/2} P D^{-1/2}, which is symmetric, and
bipartite operators become J / sqrt(pi_L x pi_R) whose second singular value
is the bipartite expansion.  Dense symmetric solvers run up to 5000x5000;
larger operators use Lanczos iterations on the operator with the constant
eigenvector deflated, and the report carries the iteration residual.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .complexes import Complex
from .errors import (
    HypothesisViolated,
    InconsistentMarginals,
    NotApplicable,
    NotPartite,
    NotReversible,
    OrderingViolated,
    TooLarge,
)
from .walks import (
    BipartiteGraph,
    WeightedGraph,
    colored_walk,
    complement_walk,
    fixed_union_walk,
    lower_walk,
    underlying_graph,
)

DENSE_EIG_LIMIT = 5000
SLACK = 1e-9


@dataclass
class SpectralReport:
    """Spectral summary of one operator."""

    lambda2: float | None = None
    lambda_min: float | None = None
    lambda_bip: float | None = None
    method: str = "dense"
    residual: float = 0.0

    def __post_init__(self):
        if self.lambda2 is not None and self.lambda_min is not None:
            if not (-1 - 1e-8 <= self.lambda_min <= self.lambda2 <= 1 + 1e-8):
                raise NotReversible(
                    f"eigenvalues out of range: min={self.lambda_min}, l2={self.lambda2}")
        if self.lambda_bip is not None and not -1e-12 <= self.lambda_bip <= 1 + 1e-8:
            raise NotReversible(f"bipartite norm out of range: {self.lambda_bip}")

    @property
    def two_sided(self) -> float:
        return max(abs(self.lambda2), abs(self.lambda_min))

    def to_json_dict(self) -> dict:
        return {"lambda2": self.lambda2, "lambda_min": self.lambda_min,
                "lambda_bip": self.lambda_bip, "method": self.method,
                "residual": self.residual}


@dataclass
class BoundCheck:
    """One verified inequality: pass iff lhs <= rhs + slack."""

    name: str
    lhs: float
    rhs: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                "passed": bool(self.passed), "details": self.details}


# -- core eigen helpers --------------------------------------------------------


def _positive(pi: np.ndarray, what: str) -> np.ndarray:
    if np.any(pi <= 0):
        raise InconsistentMarginals(f"{what} has zero-mass elements")
    return pi


def _sym_square(joint, pi):
    s = np.sqrt(pi)
    if sp.issparse(joint):
        return sp.diags(1.0 / s) @ joint @ sp.diags(1.0 / s)
    return joint / np.outer(s, s)


def square_lambda(joint, pi) -> SpectralReport:
    """lambda2 (excluding constants) and lambda_min of a reversible walk."""
    pi = _positive(np.asarray(pi, dtype=float), "stationary measure")
    sym_resid = joint - joint.T
    sym_resid = float(abs(sym_resid).max()) if sp.issparse(sym_resid) else \
        float(np.max(np.abs(sym_resid))) if np.asarray(sym_resid).size else 0.0
    if sym_resid > 1e-8:
        raise NotReversible(f"joint not symmetric; residual {sym_resid:.3g}")
    m = joint.shape[0]
    if m == 1:
        return SpectralReport(lambda2=0.0, lambda_min=0.0, method="trivial")
    M = _sym_square(joint, pi)
    if m <= DENSE_EIG_LIMIT:
        M = np.asarray(M.todense()) if sp.issparse(M) else M
        vals = np.linalg.eigvalsh((M + M.T) / 2.0)
        l2 = float(np.clip(vals[-2], -1.0, 1.0))
        lmin = float(np.clip(vals[0], -1.0, l2))
        return SpectralReport(lambda2=l2, lambda_min=lmin, method="dense")
    s = np.sqrt(pi)

    def deflated(x):
        x = np.asarray(x).ravel()
        return M @ x - s * float(s @ x)

    op = spla.LinearOperator((m, m), matvec=deflated, dtype=float)
    hi = spla.eigsh(op, k=1, which="LA", return_eigenvectors=True)
    lo = spla.eigsh(op, k=1, which="SA", return_eigenvectors=True)
    l2 = float(hi[0][0])
    lmin = float(lo[0][0])
    resid = max(
        float(np.linalg.norm(deflated(hi[1][:, 0]) - l2 * hi[1][:, 0])),
        float(np.linalg.norm(deflated(lo[1][:, 0]) - lmin * lo[1][:, 0])))
    # deflation injects a zero eigenvalue; clip accordingly (safe direction)
    return SpectralReport(lambda2=float(np.clip(l2, 0.0, 1.0)),
                          lambda_min=float(np.clip(lmin, -1.0, 0.0)),
                          method="iterative", residual=resid)


def bipartite_lambda(joint, pi_l, pi_r) -> SpectralReport:
    """Second singular value of the symmetrized bipartite operator."""
    pi_l = _positive(np.asarray(pi_l, dtype=float), "left measure")
    pi_r = _positive(np.asarray(pi_r, dtype=float), "right measure")
    jl = np.asarray(joint.sum(axis=1)).ravel() if sp.issparse(joint) else joint.sum(axis=1)
    jr = np.asarray(joint.sum(axis=0)).ravel() if sp.issparse(joint) else joint.sum(axis=0)
    if max(np.max(np.abs(jl - pi_l)), np.max(np.abs(jr - pi_r))) > 1e-8:
        raise InconsistentMarginals("joint marginals do not match the side measures")
    if min(joint.shape) == 1:
        return SpectralReport(lambda_bip=0.0, method="trivial")
    sl, sr = np.sqrt(pi_l), np.sqrt(pi_r)
    if sp.issparse(joint):
        M = sp.diags(1.0 / sl) @ joint @ sp.diags(1.0 / sr)
    else:
        M = joint / np.outer(sl, sr)
    if max(joint.shape) <= DENSE_EIG_LIMIT:
        M = np.asarray(M.todense()) if sp.issparse(M) else M
        vals = np.sort(np.linalg.svd(M, compute_uv=False))
        return SpectralReport(lambda_bip=float(min(vals[-2], 1.0)), method="dense")

    def deflated_mv(x):
        x = np.asarray(x).ravel()
        return M @ x - sl * float(sr @ x)

    def deflated_rmv(y):
        y = np.asarray(y).ravel()
        return M.T @ y - sr * float(sl @ y)

    op = spla.LinearOperator(M.shape, matvec=deflated_mv, rmatvec=deflated_rmv,
                             dtype=float)
    u, svals, vt = spla.svds(op, k=1)
    val = float(svals[0])
    resid = float(np.linalg.norm(deflated_mv(vt[0]) - val * u[:, 0]))
    return SpectralReport(lambda_bip=float(min(val, 1.0)), method="iterative",
                          residual=resid)


def square_spectrum(op) -> SpectralReport:
    """Spectrum of a square reversible Markov operator or weighted graph."""
    if isinstance(op, WeightedGraph):
        return square_lambda(op.joint, op.vertex_measure)
    if not op.is_square:
        raise NotReversible("operator is not square")
    return square_lambda(op.joint(), op.source_measure)


def bipartite_norm(op) -> SpectralReport:
    if isinstance(op, BipartiteGraph):
        return bipartite_lambda(op.joint, op.left_measure, op.right_measure)
    return bipartite_lambda(op.joint(), op.source_measure, op.target_measure)


# -- link expansion --------------------------------------------------------------


@dataclass
class LinkExpansionReport:
    value: float
    two_sided: bool
    per_level: dict
    worst_face: tuple | None
    disconnected: list
    deduplicated: bool = False

    def __float__(self):
        return self.value

    def to_json_dict(self) -> dict:
        return {"value": self.value, "two_sided": self.two_sided,
                "per_level": {str(k): v for k, v in self.per_level.items()},
                "worst_face": list(self.worst_face) if self.worst_face else None,
                "disconnected": [list(f) for f in self.disconnected],
                "deduplicated": self.deduplicated}


def link_expansion(c: Complex, two_sided: bool = True) -> LinkExpansionReport:
    """Worst underlying-graph expansion over all links (empty face included).

    Disconnected links report lambda2 = 1 with a warning rather than an error.
    For the complete complex all links at one level are isomorphic, so a single
    representative per level is solved.
    """
    worst = -np.inf
    worst_face = None
    per_level = {}
    disconnected = []
    for k in range(-1, c.d - 1):
        lev = c.level(k)
        level_worst = -np.inf
        faces_iter = [lev.face(0)] if c.uniform_complete else lev.iter_faces()
        for s in faces_iter:
            sub = c if k == -1 else c.link(s)
            g = underlying_graph(sub)
            rep = square_lambda(g.joint, g.vertex_measure)
            val = rep.two_sided if two_sided else rep.lambda2
            if rep.lambda2 > 1 - 1e-9:
                disconnected.append(s)
                warnings.warn(f"link of {s} is disconnected; lambda2 = 1",
                              stacklevel=2)
            if val > level_worst:
                level_worst = val
            if val > worst:
                worst, worst_face = val, s
        per_level[k] = level_worst
    return LinkExpansionReport(value=float(worst), two_sided=two_sided,
                               per_level=per_level, worst_face=worst_face,
                               disconnected=disconnected,
                               deduplicated=c.uniform_complete)


# -- theorem verifiers -------------------------------------------------------------


def verify_complement_bound(c: Complex, l1: int, l2: int) -> BoundCheck:
    """Complement-walk expansion against (l1+1)(l2+1) * link expansion."""
    lam_link = link_expansion(c, two_sided=True)
    lhs = bipartite_norm(complement_walk(c, l1, l2)).lambda_bip
    rhs = (l1 + 1) * (l2 + 1) * lam_link.value
    return BoundCheck("complement_walk", lhs, rhs, lhs <= rhs + SLACK,
                      {"link_expansion": lam_link.value, "l1": l1, "l2": l2})


def verify_colored_bound(c: Complex, colors_i, colors_j) -> BoundCheck:
    """Colored-walk expansion against |I||J| * lambda.

    The hypothesis gives the links expansion lambda/((d+1) lambda + 1); the
    measured one-sided link expansion is inverted to recover lambda.  When the
    measured value sits at or above the 1/(d+1) boundary (or the recovered
    lambda reaches 1/2) the bound does not apply.
    """
    if not c.is_partite:
        raise NotPartite("colored bound needs a partite complex")
    # a complex with negative second eigenvalues is a 0-one-sided expander
    lam_prime = max(link_expansion(c, two_sided=False).value, 0.0)
    boundary = 1.0 / (c.d + 1)
    if lam_prime >= boundary - 1e-12:
        raise NotApplicable(
            f"measured link expansion {lam_prime:.6g} >= 1/(d+1) boundary")
    lam = lam_prime / (1.0 - (c.d + 1) * lam_prime)
    if lam >= 0.5:
        raise NotApplicable(f"recovered lambda {lam:.6g} >= 1/2")
    lhs = bipartite_norm(colored_walk(c, colors_i, colors_j)).lambda_bip
    rhs = len(set(colors_i)) * len(set(colors_j)) * lam
    return BoundCheck("colored_walk", lhs, rhs, lhs <= rhs + SLACK,
                      {"link_expansion_one_sided": lam_prime, "lambda": lam})


def verify_trickling(y: Complex) -> BoundCheck:
    """Three-partite inequality lambda(A23) <= eta + lambda(A01) lambda(A02)."""
    if not (y.is_partite and y.d == 2):
        raise NotPartite("trickling check needs a 2-dimensional 3-partite complex")
    col = np.asarray(y.coloring)
    eta = 0.0
    for v in np.flatnonzero(col == 0):
        lk = y.link((int(v),))
        eta = max(eta, bipartite_norm(colored_walk(lk, [0], [1])).lambda_bip)
    lam_01 = bipartite_norm(colored_walk(y, [0], [1])).lambda_bip
    lam_02 = bipartite_norm(colored_walk(y, [0], [2])).lambda_bip
    lhs = bipartite_norm(colored_walk(y, [1], [2])).lambda_bip
    rhs = eta + lam_01 * lam_02
    return BoundCheck("trickling", lhs, rhs, lhs <= rhs + SLACK,
                      {"eta": eta, "lambda_01": lam_01, "lambda_02": lam_02})


def verify_fixed_union_bound(c: Complex, l: int, j: int) -> BoundCheck:
    """Norm of (fixed-union walk - lower walk) against j^2 * link expansion."""
    a = fixed_union_walk(c, l, j)
    low = lower_walk(c, l, l - j)
    pi = a.source_measure
    diff = _sym_square(a.joint(), pi) - _sym_square(low.joint(), pi)
    diff = np.asarray(diff.todense()) if sp.issparse(diff) else diff
    lhs = float(np.max(np.abs(np.linalg.eigvalsh((diff + diff.T) / 2.0))))
    lam = link_expansion(c, two_sided=True).value
    rhs = j * j * lam
    return BoundCheck("fixed_union", lhs, rhs, lhs <= rhs + SLACK,
                      {"link_expansion": lam, "l": l, "j": j})


# -- mixing lemmas -----------------------------------------------------------------


@dataclass
class MixingReport:
    measured: float
    predicted: float
    deviation: float
    bound_rhs: float
    observed_constant: float | None

    def to_json_dict(self) -> dict:
        return {"measured": self.measured, "predicted": self.predicted,
                "deviation": self.deviation, "bound_rhs": self.bound_rhs,
                "observed_constant": self.observed_constant}


def _check_cross_disjoint(face_sets):
    for (i, fs1), (j, fs2) in itertools.combinations(enumerate(face_sets), 2):
        for f1 in fs1:
            for f2 in fs2:
                if set(f1) & set(f2):
                    raise HypothesisViolated(
                        f"faces {f1} (set {i}) and {f2} (set {j}) intersect")


def mixing_check(c: Complex, sets) -> MixingReport:
    """Count faces containing a member of each set vs the product prediction.

    ``sets`` is a list of (dimension, faces).  Faces from different sets must
    be pairwise disjoint.  The deviation bound constant is reported from the
    observation, never asserted.
    """
    dims = [int(j) for j, _ in sets]
    face_sets = [[tuple(sorted(int(v) for v in f)) for f in faces]
                 for _, faces in sets]
    for jdim, faces in zip(dims, face_sets):
        for f in faces:
            if len(f) != jdim + 1:
                raise HypothesisViolated(f"face {f} is not at dimension {jdim}")
    k = sum(j + 1 for j in dims) - 1
    if k > c.d:
        raise HypothesisViolated(f"total size {k + 1} exceeds d+1 = {c.d + 1}")
    _check_cross_disjoint(face_sets)
    lookups = [set(fs) for fs in face_sets]
    lev = c.level(k)
    measured = 0.0
    for face, w in zip(lev.iter_faces(), lev.measure):
        ok = True
        for jdim, members in zip(dims, lookups):
            if not any(set(m) <= set(face) for m in members):
                ok = False
                break
        if ok:
            measured += float(w)
    probs = [sum(c.measure_of(f) for f in fs) for fs in face_sets]
    multinomial = math.factorial(k + 1)
    for j in dims:
        multinomial //= math.factorial(j + 1)
    predicted = multinomial * math.prod(probs)
    deviation = abs(measured - predicted)
    lam = link_expansion(c, two_sided=True).value
    geo = math.prod(probs) ** (1.0 / len(probs)) if all(p > 0 for p in probs) else 0.0
    bound_rhs = lam * geo
    const = deviation / bound_rhs if bound_rhs > 0 else None
    return MixingReport(measured, predicted, deviation, bound_rhs, const)


def partite_mixing_check(c: Complex, colored_sets) -> MixingReport:
    """Partite analogue with conditional probabilities inside color classes."""
    if not c.is_partite:
        raise NotPartite("partite mixing needs a coloring")
    col_sets = [frozenset(int(x) for x in colors) for colors, _ in colored_sets]
    for a, b in itertools.combinations(col_sets, 2):
        if a & b:
            raise HypothesisViolated("color sets must be pairwise disjoint")
    face_sets = [{tuple(sorted(int(v) for v in f)) for f in faces}
                 for _, faces in colored_sets]
    col = np.asarray(c.coloring)
    for colors, faces in zip(col_sets, face_sets):
        for f in faces:
            if frozenset(col[list(f)].tolist()) != colors:
                raise HypothesisViolated(f"face {f} does not have colors {sorted(colors)}")
    union = frozenset().union(*col_sets)
    faces_u, meas_u = c.colored_level(union)
    measured = 0.0
    for face, w in zip(faces_u, meas_u):
        face = tuple(int(v) for v in face)
        ok = True
        for colors, members in zip(col_sets, face_sets):
            sub = tuple(sorted(v for v in face if col[v] in colors))
            if sub not in members:
                ok = False
                break
        if ok:
            measured += float(w)
    cond = []
    for colors, members in zip(col_sets, face_sets):
        faces_i, meas_i = c.colored_level(colors)
        lut = {tuple(int(v) for v in f): float(w) for f, w in zip(faces_i, meas_i)}
        cond.append(sum(lut.get(m, 0.0) for m in members))
    predicted = math.prod(cond)
    deviation = abs(measured - predicted)
    lam = link_expansion(c, two_sided=False).value
    geo = math.prod(cond) ** (1.0 / len(cond)) if all(p > 0 for p in cond) else 0.0
    bound_rhs = lam * geo
    const = deviation / bound_rhs if bound_rhs > 0 else None
    return MixingReport(measured, predicted, deviation, bound_rhs, const)


# -- sampler / cut lemmas -----------------------------------------------------------


def sampler_check(g: BipartiteGraph, subset, c: float) -> BoundCheck:
    """Expander sampler property for a right-side subset at threshold c."""
    if c <= 0:
        raise OrderingViolated("threshold c must be positive")
    joint = g.joint.tocsr() if sp.issparse(g.joint) else g.joint
    right = np.zeros(joint.shape[1], dtype=bool)
    right[list(subset)] = True
    pi_l = g.left_measure
    pr_s = float(g.right_measure[right].sum())
    mass_in_s = (np.asarray(joint[:, right].sum(axis=1)).ravel()
                 if sp.issparse(joint) else joint[:, right].sum(axis=1))
    cond = mass_in_s / pi_l
    bad = np.abs(cond - pr_s) > c
    pr_t = float(pi_l[bad].sum())
    lam = bipartite_lambda(joint, pi_l, g.right_measure).lambda_bip
    bound = lam * lam / (c * c) * pr_s
    return BoundCheck("sampler", pr_t, bound, pr_t <= bound + SLACK,
                      {"lambda": lam, "pr_subset": pr_s, "threshold": c})


def almost_cut_check(g, part_a, part_b, part_c) -> BoundCheck:
    """Cut-size approximation for a 3-way partition, square or bipartite."""
    a, b, cc = (sorted(set(int(x) for x in p)) for p in (part_a, part_b, part_c))
    if isinstance(g, WeightedGraph):
        pi = g.vertex_measure
        pr = lambda s: float(pi[s].sum()) if s else 0.0
        if pr(a) > pr(b) + 1e-12:
            raise OrderingViolated("need Pr[A] <= Pr[B]")
        lam = square_lambda(g.joint, pi).two_sided
        e_ab = g.cut(a, b) if a and b else 0.0
        lhs = pr(a)
        denom = (1.0 - lam) * pr(b)
        rhs = (e_ab + lam * pr(cc)) / denom if denom > 0 else np.inf
        return BoundCheck("almost_cut", lhs, rhs, lhs <= rhs + SLACK,
                          {"lambda": lam, "edge_mass": e_ab})
    if isinstance(g, BipartiteGraph):
        joint = g.joint
        nl = joint.shape[0]
        pi_l, pi_r = g.left_measure, g.right_measure
        lam = bipartite_lambda(joint, pi_l, pi_r).lambda_bip
        if lam >= 0.5:
            raise NotApplicable(f"bipartite almost-cut needs lambda < 1/2, got {lam:.4g}")

        def split(p):
            return [x for x in p if x < nl], [x - nl for x in p if x >= nl]

        def pr(p):
            left, right = split(p)
            return (float(pi_l[left].sum()) + float(pi_r[right].sum())) / 2.0

        if pr(a) > pr(b) + 1e-12:
            raise OrderingViolated("need Pr[A] <= Pr[B]")
        a_l, a_r = split(a)
        b_l, b_r = split(b)
        dense = np.asarray(joint.todense()) if sp.issparse(joint) else joint
        e_ab = 0.0
        if a_l and b_r:
            e_ab += float(dense[np.ix_(a_l, b_r)].sum())
        if b_l and a_r:
            e_ab += float(dense[np.ix_(b_l, a_r)].sum())
        lhs = pr(a)
        denom = 2.0 * (1.0 - 2.0 * lam) * pr(b)
        rhs = (e_ab + 4.0 * lam * pr(cc)) / denom if denom > 0 else np.inf
        return BoundCheck("almost_cut_bipartite", lhs, rhs, lhs <= rhs + SLACK,
                          {"lambda": lam, "edge_mass": e_ab})
    raise NotApplicable(f"unsupported graph type {type(g)!r}")


@dataclass
class EdgeExpansionReport:
    phi: float | None
    argmin: tuple | None
    lambda2: float
    cheeger_lower: float
    cheeger_upper: float
    cheeger_ok: bool | None

    def to_json_dict(self) -> dict:
        return {"phi": self.phi, "argmin": list(self.argmin) if self.argmin else None,
                "lambda2": self.lambda2, "cheeger_lower": self.cheeger_lower,
                "cheeger_upper": self.cheeger_upper, "cheeger_ok": self.cheeger_ok}


def edge_expansion_exact(g: WeightedGraph, max_vertices: int = 24) -> EdgeExpansionReport:
    """Brute-force edge expansion over all subsets with Pr <= 1/2.

    Also checks the Cheeger sandwich (1-lambda2)/2 <= Phi <= sqrt(2(1-lambda2)).
    Graphs above the vertex cap raise TooLarge; callers may still use the
    Cheeger bounds from ``square_lambda``.
    """
    m = g.joint.shape[0]
    l2 = square_lambda(g.joint, g.vertex_measure).lambda2
    lower, upper = (1.0 - l2) / 2.0, math.sqrt(max(2.0 * (1.0 - l2), 0.0))
    if m > max_vertices:
        raise TooLarge(f"{m} vertices exceeds the brute-force cap {max_vertices}")
    joint = np.asarray(g.joint.todense()) if sp.issparse(g.joint) else np.asarray(g.joint)
    pi = g.vertex_measure
    best = np.inf
    best_mask = None
    n_masks = 1 << m
    chunk = 1 << 14
    bit_cols = np.arange(m)
    for start in range(1, n_masks, chunk):
        masks = np.arange(start, min(start + chunk, n_masks), dtype=np.int64)
        bits = (masks[:, None] >> bit_cols) & 1
        bits = bits.astype(float)
        pr_s = bits @ pi
        keep = (pr_s > 0) & (pr_s <= 0.5 + 1e-15)
        if not keep.any():
            continue
        bits_k = bits[keep]
        quad = np.einsum("si,ij,sj->s", bits_k, joint, bits_k)
        cut = bits_k @ joint.sum(axis=1) - quad
        phi = cut / pr_s[keep]
        i = int(np.argmin(phi))
        if phi[i] < best:
            best = float(phi[i])
            best_mask = int(masks[keep][i])
    if best_mask is None:
        # no subset with 0 < Pr <= 1/2 exists (single live vertex): vacuous
        return EdgeExpansionReport(phi=math.inf, argmin=None, lambda2=l2,
                                   cheeger_lower=lower, cheeger_upper=upper,
                                   cheeger_ok=None)
    argmin = tuple(int(v) for v in np.flatnonzero([(best_mask >> j) & 1 for j in range(m)]))
    ok = (lower - SLACK <= best <= upper + SLACK)
    return EdgeExpansionReport(phi=best, argmin=argmin, lambda2=l2,
                               cheeger_lower=lower, cheeger_upper=upper,
                               cheeger_ok=ok)


def partition_property_check(g: WeightedGraph, partition, c: float) -> BoundCheck:
    """If crossing mass < c/2 in a c-edge expander, some part has Pr >= 1/2."""
    pi = g.vertex_measure
    parts = [sorted(set(int(x) for x in p)) for p in partition]
    seen = sorted(x for p in parts for x in p)
    if seen != list(range(g.joint.shape[0])):
        raise OrderingViolated("parts must partition the vertex set")
    crossing = 1.0 - sum(g.cut(p, p) for p in parts if p)
    hypothesis = crossing < c / 2.0
    largest = max((float(pi[p].sum()) for p in parts if p), default=0.0)
    passed = (not hypothesis) or largest >= 0.5 - SLACK
    return BoundCheck("partition_property", crossing, c / 2.0, passed,
                      {"largest_part": largest, "hypothesis_holds": bool(hypothesis)})
