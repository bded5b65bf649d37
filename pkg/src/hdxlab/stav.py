"""Four-layer set systems (S over T over A and ground set V) with their three
sampling distributions, the derived local graphs, and the goodness checker.

Two representations coexist:

* tabular -- every distribution is an explicit sparse table; all checks are
  exhaustive sums.  This is the default at desk scale and the only mode the
  agreement and decoder modules accept.
* structured -- for simplicial instances whose top level is too large to
  enumerate.  Every local graph the goodness checker needs collapses, in a
  pure weighted complex, to a small matrix whose entries are ratios of
  containment masses at levels l and l+1 (or a sparse matrix from level 2l),
  so the checks run without ever materializing the top level.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .complexes import Complex
from .errors import (
    ColorSize,
    HdxError,
    MarginalMismatch,
    NotPartite,
    ParameterRange,
    SizeCapError,
    ZeroConditioning,
)
from .spectra import bipartite_lambda, edge_expansion_exact, square_lambda
from .walks import BipartiteGraph, WeightedGraph, complement_walk

TABULAR_S_CAP = 200_000
TABULAR_TABLE_CAP = 4_000_000


# -- distribution containers ---------------------------------------------------


@dataclass
class STSTable:
    """Symmetric joint over (s1, t, s2), factored through the middle face.

    ``tables[ti]`` is either ("indep", s_idx, cond) for a conditionally
    independent pair, or ("pairs", i_idx, j_idx, p) for an explicit symmetric
    pair table (p sums to 1 within each t).
    """

    t_probs: np.ndarray
    tables: list
    n_s: int

    def s_marginal(self) -> np.ndarray:
        out = np.zeros(self.n_s)
        for pt, tab in zip(self.t_probs, self.tables):
            if tab[0] == "indep":
                _, s_idx, cond = tab
                np.add.at(out, s_idx, pt * cond)
            else:
                _, i_idx, j_idx, p = tab
                np.add.at(out, i_idx, pt * p)
        return out

    def pair_arrays(self, ti: int):
        """Explicit (i, j, p) arrays of the conditional pair joint at t."""
        tab = self.tables[ti]
        if tab[0] == "pairs":
            return tab[1], tab[2], tab[3]
        _, s_idx, cond = tab
        i = np.repeat(s_idx, len(s_idx))
        j = np.tile(s_idx, len(s_idx))
        p = np.outer(cond, cond).ravel()
        return i, j, p


@dataclass
class VasaTable:
    """Symmetric joint over (v, a1, s, a2) as parallel arrays."""

    v_idx: np.ndarray
    a1_idx: np.ndarray
    s_idx: np.ndarray
    a2_idx: np.ndarray
    probs: np.ndarray

    def __len__(self):
        return len(self.probs)


@dataclass
class StavInstance:
    """Tabular four-layer instance with explicit distribution tables.

    Layer supports index a common ground set; the v-layer is the subset of the
    ground set that the fourth coordinate is drawn from (``v_ground`` maps
    v-layer positions to ground positions; they coincide except for partite
    instances, whose amplification faces sit outside the v-layer).
    """

    provenance: str
    ground_labels: list
    v_labels: list
    v_ground: np.ndarray  # v-layer position -> ground position
    a_labels: list
    t_labels: list
    s_labels: list
    a_supports: list  # tuple of ground indices per A element
    t_supports: list
    s_supports: list
    t_probs: np.ndarray
    st_joint: sp.csr_matrix  # (|S|, |T|) joint of the main distribution
    av_tables: list  # per t: (a_idx, v_idx, p) with p summing to 1
    sts: STSTable
    vasa: VasaTable
    meta: dict = field(default_factory=dict)
    mode: str = "tabular"

    # -- derived marginals (cached) -------------------------------------------

    def __post_init__(self):
        self._cache = {}

    @property
    def n_s(self):
        return len(self.s_labels)

    @property
    def n_v(self):
        return len(self.v_labels)

    def s_probs(self) -> np.ndarray:
        if "s_probs" not in self._cache:
            self._cache["s_probs"] = np.asarray(self.st_joint.sum(axis=1)).ravel()
        return self._cache["s_probs"]

    def v_marginal(self) -> np.ndarray:
        if "v_marginal" not in self._cache:
            out = np.zeros(self.n_v)
            for pt, (a_idx, v_idx, p) in zip(self.t_probs, self.av_tables):
                np.add.at(out, v_idx, pt * p)
            self._cache["v_marginal"] = out
        return self._cache["v_marginal"]

    def reach_joint(self) -> sp.csr_matrix:
        """Marginal joint over (a, v)."""
        if "reach" not in self._cache:
            rows, cols, vals = [], [], []
            for pt, (a_idx, v_idx, p) in zip(self.t_probs, self.av_tables):
                rows.append(a_idx)
                cols.append(v_idx)
                vals.append(pt * p)
            j = sp.coo_matrix((np.concatenate(vals),
                               (np.concatenate(rows), np.concatenate(cols))),
                              shape=(len(self.a_labels), self.n_v)).tocsr()
            j.sum_duplicates()
            self._cache["reach"] = j
        return self._cache["reach"]

    def vas_triples(self):
        """Arrays (v_idx, a_idx, s_idx, p) of the (v, a, s) marginal."""
        if "vas" not in self._cache:
            st = self.st_joint.tocsc()
            v_rows, a_rows, s_rows, p_rows = [], [], [], []
            for ti, (a_idx, v_idx, p_av) in enumerate(self.av_tables):
                col = st[:, ti]
                s_idx = col.indices
                p_st = col.data
                v_rows.append(np.repeat(v_idx, len(s_idx)))
                a_rows.append(np.repeat(a_idx, len(s_idx)))
                s_rows.append(np.tile(s_idx, len(v_idx)))
                p_rows.append((p_av[:, None] * p_st[None, :]).ravel())
            self._cache["vas"] = (np.concatenate(v_rows), np.concatenate(a_rows),
                                  np.concatenate(s_rows), np.concatenate(p_rows))
        return self._cache["vas"]

    def adjacency(self):
        """Neighbor sets in the reach graph: adj_a[a], adj_v[v]."""
        if "adjacency" not in self._cache:
            j = self.reach_joint().tocoo()
            adj_a = defaultdict(set)
            adj_v = defaultdict(set)
            for a, v, p in zip(j.row, j.col, j.data):
                if p > 0:
                    adj_a[int(a)].add(int(v))
                    adj_v[int(v)].add(int(a))
            self._cache["adjacency"] = (dict(adj_a), dict(adj_v))
        return self._cache["adjacency"]


@dataclass
class StructuredHdxStav:
    """Level-structured simplicial instance; distributions stay implicit."""

    complex: Complex
    d: int
    l: int
    provenance: str = "hdx"
    mode: str = "structured"

    @property
    def meta(self):
        return {"d": self.d, "l": self.l, "n": self.complex.n_vertices}


# -- builders -----------------------------------------------------------------


def _faces_as_supports(lev):
    return [tuple(int(v) for v in row) for row in lev.faces]


def hdx_stav(c: Complex, d: int, l: int, force_mode: str | None = None):
    """Simplicial instance: S = X(d), T = X(l), A = X(l-1), V = X(0).

    The test distribution picks t by level measure and two independent
    d-faces above it; the amplification distribution picks a d-face and
    a uniform disjoint triple (a1, a2, v) inside it.
    """
    if not (1 <= l and 2 * l + 2 <= d <= c.d):
        raise ParameterRange(f"need 1 <= l and 2l+2 <= d <= {c.d}, got d={d}, l={l}")
    n_top = (math.comb(c.n_vertices, d + 1) if c.uniform_complete
             else c.level(d).size)
    per_s_vasa = (math.comb(d + 1, l) * math.comb(d + 1 - l, l) * (d + 1 - 2 * l))
    tabular_ok = (n_top <= TABULAR_S_CAP
                  and n_top * per_s_vasa <= TABULAR_TABLE_CAP
                  and n_top * math.comb(d + 1, l + 1) <= TABULAR_TABLE_CAP)
    mode = force_mode or ("tabular" if tabular_ok else "structured")
    if mode == "structured":
        return StructuredHdxStav(complex=c, d=d, l=l)
    if not tabular_ok:
        raise SizeCapError(
            f"tabular mode needs |X(d)| <= {TABULAR_S_CAP} and table sizes under "
            f"{TABULAR_TABLE_CAP}; got {n_top} top faces")

    lev_s, lev_t, lev_a, lev_v = c.level(d), c.level(l), c.level(l - 1), c.level(0)
    # (s, t) joint: P(t | s) uniform over contained l-faces
    rows, cols, vals = [], [], []
    p_ts = 1.0 / math.comb(d + 1, l + 1)
    for keep in itertools.combinations(range(d + 1), l + 1):
        t_idx = lev_t.index_rows(lev_s.faces[:, list(keep)])
        rows.append(np.arange(lev_s.size))
        cols.append(t_idx)
        vals.append(lev_s.measure * p_ts)
    st = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(lev_s.size, lev_t.size)).tocsr()
    st.sum_duplicates()
    t_probs = np.asarray(st.sum(axis=0)).ravel()

    av_tables = []
    for ti in range(lev_t.size):
        t = lev_t.faces[ti]
        a_idx = np.empty(l + 1, dtype=np.int64)
        v_idx = np.empty(l + 1, dtype=np.int64)
        for pos in range(l + 1):
            rest = np.delete(t, pos)
            a_idx[pos] = lev_a.index_of(tuple(int(x) for x in rest))
            v_idx[pos] = int(t[pos])
        av_tables.append((a_idx, v_idx, np.full(l + 1, 1.0 / (l + 1))))

    # independent pair tables per t
    stc = st.tocsc()
    tables = []
    for ti in range(lev_t.size):
        col = stc[:, ti]
        tables.append(("indep", col.indices.astype(np.int64), col.data / t_probs[ti]))
    sts = STSTable(t_probs=t_probs, tables=tables, n_s=lev_s.size)

    # amplification table: uniform disjoint (a1, a2, v) inside each s
    v_rows, a1_rows, s_rows, a2_rows, p_rows = [], [], [], [], []
    for si in range(lev_s.size):
        s = tuple(int(x) for x in lev_s.faces[si])
        p_each = float(lev_s.measure[si]) / per_s_vasa
        for a1 in itertools.combinations(s, l):
            rest1 = [x for x in s if x not in a1]
            ai1 = lev_a.index_of(a1)
            for a2 in itertools.combinations(rest1, l):
                ai2 = lev_a.index_of(a2)
                for v in rest1:
                    if v in a2:
                        continue
                    v_rows.append(v)
                    a1_rows.append(ai1)
                    s_rows.append(si)
                    a2_rows.append(ai2)
                    p_rows.append(p_each)
    vasa = VasaTable(np.array(v_rows), np.array(a1_rows), np.array(s_rows),
                     np.array(a2_rows), np.array(p_rows))

    v_labels = [int(v) for v in lev_v.faces[:, 0]]
    return StavInstance(
        provenance="hdx",
        ground_labels=v_labels,
        v_labels=v_labels,
        v_ground=np.arange(len(v_labels)),
        a_labels=list(lev_a.iter_faces()),
        t_labels=list(lev_t.iter_faces()),
        s_labels=list(lev_s.iter_faces()),
        a_supports=_faces_as_supports(lev_a),
        t_supports=_faces_as_supports(lev_t),
        s_supports=_faces_as_supports(lev_s),
        t_probs=t_probs, st_joint=st, av_tables=av_tables, sts=sts, vasa=vasa,
        meta={"complex": c, "d": d, "l": l})


def partite_ij_stav(c: Complex, colors_i, colors_j, k: int) -> StavInstance:
    """Partite instance whose amplification layer carries two fixed colors."""
    if not c.is_partite:
        raise NotPartite("partite instance needs a coloring")
    I = frozenset(int(x) for x in colors_i)
    J = frozenset(int(x) for x in colors_j)
    if not I or not J or I & J:
        raise ColorSize("I and J must be nonempty and disjoint")
    if len(I) != len(J):
        raise ColorSize("I and J must have equal size")
    l = len(I)
    if k < 4 * l + 4 or k > c.d:
        raise ParameterRange(f"need 4l+4 <= k <= d, got k={k}, l={l}")
    col = np.asarray(c.coloring)

    lev_k = c.level(k)
    s_keep = [i for i in range(lev_k.size)
              if I | J <= frozenset(col[lev_k.faces[i]].tolist())]
    if not s_keep:
        raise ParameterRange("no k-face carries both color sets")
    s_faces = [tuple(int(x) for x in lev_k.faces[i]) for i in s_keep]
    s_meas = lev_k.measure[s_keep]

    lev_t = c.level(l)
    t_faces, t_meas_raw = [], []
    for i in range(lev_t.size):
        cols_t = frozenset(col[lev_t.faces[i]].tolist())
        if cols_t & (I | J) in (I, J):
            t_faces.append(tuple(int(x) for x in lev_t.faces[i]))
            t_meas_raw.append(float(lev_t.measure[i]))
    if not t_faces:
        raise ParameterRange("no l-face matches the color pattern")

    lev_a = c.level(l - 1)
    a_faces = [tuple(int(x) for x in lev_a.faces[i]) for i in range(lev_a.size)
               if frozenset(col[lev_a.faces[i]].tolist()) in (I, J)]
    v_labels = [v for v in range(c.n_vertices) if col[v] not in I | J]
    v_pos = {v: i for i, v in enumerate(v_labels)}
    a_pos = {f: i for i, f in enumerate(a_faces)}
    t_pos = {f: i for i, f in enumerate(t_faces)}
    s_pos = {f: i for i, f in enumerate(s_faces)}

    # (s, t) joint: P(t) conditional measure, P(s | t) prop to level measure
    t_probs = np.array(t_meas_raw)
    t_probs = t_probs / t_probs.sum()
    rows, cols_, raw = [], [], []
    for si, s in enumerate(s_faces):
        for sub in itertools.combinations(s, l + 1):
            ti = t_pos.get(sub)
            if ti is None:
                continue
            rows.append(si)
            cols_.append(ti)
            raw.append(float(s_meas[si]))
    st = sp.coo_matrix((raw, (rows, cols_)),
                       shape=(len(s_faces), len(t_faces))).tocsr()
    col_tot = np.asarray(st.sum(axis=0)).ravel()
    if np.any(col_tot <= 0):
        raise ParameterRange("some t-face extends to no valid k-face")
    st = (st @ sp.diags(t_probs / col_tot)).tocsr()

    av_tables = []
    for t in t_faces:
        cols_t = [col[v] for v in t]
        inside = I if I <= frozenset(cols_t) else J
        a = tuple(v for v in t if col[v] in inside)
        v = [v for v in t if col[v] not in inside]
        assert len(v) == 1
        av_tables.append((np.array([a_pos[a]]), np.array([v_pos[v[0]]]),
                          np.array([1.0])))

    stc = st.tocsc()
    tables = []
    for ti in range(len(t_faces)):
        colv = stc[:, ti]
        tables.append(("indep", colv.indices.astype(np.int64), colv.data / t_probs[ti]))
    sts = STSTable(t_probs=t_probs, tables=tables, n_s=len(s_faces))

    # amplification: deterministic colored subfaces, v from the (v | s) marginal
    vas_v, vas_a1, vas_s, vas_a2, vas_p = [], [], [], [], []
    vprob_given_s = defaultdict(lambda: defaultdict(float))
    stc2 = st.tocoo()
    for si, ti, p in zip(stc2.row, stc2.col, stc2.data):
        a_idx, v_idx, pav = av_tables[ti]
        vprob_given_s[int(si)][int(v_idx[0])] += float(p)
    for si, vmap in vprob_given_s.items():
        s = s_faces[si]
        a_i = tuple(v for v in s if col[v] in I)
        a_j = tuple(v for v in s if col[v] in J)
        ai, aj = a_pos[a_i], a_pos[a_j]
        for vi, pv in vmap.items():
            for first, second in ((ai, aj), (aj, ai)):
                vas_v.append(vi)
                vas_a1.append(first)
                vas_s.append(si)
                vas_a2.append(second)
                vas_p.append(pv / 2.0)
    vasa = VasaTable(np.array(vas_v), np.array(vas_a1), np.array(vas_s),
                     np.array(vas_a2), np.array(vas_p))

    inst = StavInstance(
        provenance="partite_ij",
        ground_labels=list(range(c.n_vertices)),
        v_labels=v_labels,
        v_ground=np.array(v_labels, dtype=np.int64),
        a_labels=a_faces,
        t_labels=t_faces,
        s_labels=s_faces,
        a_supports=a_faces,
        t_supports=t_faces,
        s_supports=s_faces,
        t_probs=t_probs, st_joint=st, av_tables=av_tables, sts=sts, vasa=vasa,
        meta={"complex": c, "I": sorted(I), "J": sorted(J), "k": k, "l": l})
    return inst


def neighborhood_stav(c: Complex, l: int, k: int, mode: str) -> StavInstance:
    """Ball system: S = neighborhoods of k-faces, tested on l-faces of links."""
    if mode not in ("independent", "complement"):
        raise ParameterRange(f"unknown mode {mode!r}")
    if mode == "independent" and l + k + 1 > c.d:
        raise ParameterRange(f"independent mode needs l+k+1 <= d, got {l}+{k}+1 > {c.d}")
    if mode == "complement" and l + 2 * k + 2 > c.d:
        raise ParameterRange(f"complement mode needs l+2k+2 <= d, got {l}+{2*k}+2 > {c.d}")
    if k + 2 * l + 1 > c.d:
        raise ParameterRange(f"amplification needs k+2l+1 <= d, got {k}+{2*l}+1 > {c.d}")
    if l < 1:
        raise ParameterRange("need l >= 1")
    lev_z = c.level(k)
    lev_t = c.level(l)
    lev_a = c.level(l - 1)
    z_faces = list(lev_z.iter_faces())
    t_faces = list(lev_t.iter_faces())
    a_faces = list(lev_a.iter_faces())
    t_pos = {f: i for i, f in enumerate(t_faces)}
    a_pos = {f: i for i, f in enumerate(a_faces)}

    from .walks import neighborhood_system
    balls = neighborhood_system(c, k)

    # (z, t) joint: z by level measure, t from the link of z at level l
    rows, cols_, vals = [], [], []
    links = {}
    for zi, z in enumerate(z_faces):
        lk = c.link(z)
        links[z] = lk
        lab = lk.vertex_labels
        lk_t = lk.level(l)
        for i in range(lk_t.size):
            t = tuple(sorted(lab[v] for v in lk_t.faces[i]))
            rows.append(zi)
            cols_.append(t_pos[t])
            vals.append(float(lev_z.measure[zi]) * float(lk_t.measure[i]))
    st = sp.coo_matrix((vals, (rows, cols_)),
                       shape=(len(z_faces), len(t_faces))).tocsr()
    st.sum_duplicates()
    t_probs = np.asarray(st.sum(axis=0)).ravel()
    live_t = t_probs > 0

    av_tables = []
    for ti, t in enumerate(t_faces):
        a_idx = np.empty(l + 1, dtype=np.int64)
        v_idx = np.empty(l + 1, dtype=np.int64)
        for pos in range(l + 1):
            a = tuple(x for j, x in enumerate(t) if j != pos)
            a_idx[pos] = a_pos[a]
            v_idx[pos] = t[pos]
        av_tables.append((a_idx, v_idx, np.full(l + 1, 1.0 / (l + 1))))

    stc = st.tocsc()
    tables = []
    for ti in range(len(t_faces)):
        colv = stc[:, ti]
        if t_probs[ti] <= 0:
            tables.append(("indep", np.array([], dtype=np.int64), np.array([])))
            continue
        cond = colv.data / t_probs[ti]
        if mode == "independent":
            tables.append(("indep", colv.indices.astype(np.int64), cond))
        else:
            lk = c.link(t_faces[ti])
            lab = lk.vertex_labels
            comp = complement_walk(lk, k, k)
            joint = comp.joint()
            joint = np.asarray(joint.todense()) if sp.issparse(joint) else joint
            zids = []
            for row in comp.source_faces:
                z = tuple(sorted(lab[v] for v in row))
                zids.append(z_faces.index(z))
            zids = np.array(zids)
            nz = np.nonzero(joint)
            tables.append(("pairs", zids[nz[0]], zids[nz[1]], joint[nz]))
    sts = STSTable(t_probs=t_probs, tables=tables, n_s=len(z_faces))

    # amplification: z, then v in the link, then disjoint (a1, a2) via the
    # complement walk inside the link of z + v
    vas_v, vas_a1, vas_s, vas_a2, vas_p = [], [], [], [], []
    for zi, z in enumerate(z_faces):
        lk = links[z]
        lab = lk.vertex_labels
        lk_v = lk.level(0)
        for i in range(lk_v.size):
            v = int(lab[lk_v.faces[i, 0]])
            pv = float(lev_z.measure[zi]) * float(lk_v.measure[i])
            lk2 = c.link(tuple(sorted(z + (v,))))
            lab2 = lk2.vertex_labels
            comp = complement_walk(lk2, l - 1, l - 1)
            joint = comp.joint()
            joint = np.asarray(joint.todense()) if sp.issparse(joint) else joint
            a_ids = [a_pos[tuple(sorted(lab2[x] for x in row))]
                     for row in comp.source_faces]
            nz = np.nonzero(joint)
            for i1, i2 in zip(*nz):
                vas_v.append(v)
                vas_a1.append(a_ids[i1])
                vas_s.append(zi)
                vas_a2.append(a_ids[i2])
                vas_p.append(pv * joint[i1, i2])
    vasa = VasaTable(np.array(vas_v), np.array(vas_a1), np.array(vas_s),
                     np.array(vas_a2), np.array(vas_p))

    inst = StavInstance(
        provenance="neighborhood",
        ground_labels=list(range(c.n_vertices)),
        v_labels=list(range(c.n_vertices)),
        v_ground=np.arange(c.n_vertices),
        a_labels=a_faces,
        t_labels=t_faces,
        s_labels=z_faces,
        a_supports=a_faces,
        t_supports=t_faces,
        s_supports=[balls[z] for z in z_faces],
        t_probs=t_probs, st_joint=st, av_tables=av_tables, sts=sts, vasa=vasa,
        meta={"complex": c, "l": l, "k": k, "mode": mode, "live_t": live_t})
    return inst


# -- invariant checks ------------------------------------------------------------


@dataclass
class InvariantReport:
    v_marginal_uniform_dev: float
    av_independent_of_s: bool
    sts_symmetry_dev: float
    sts_marginal_dev: float
    vasa_symmetry_dev: float
    vasa_marginal_dev: float
    positive_layers: bool
    methods: dict

    def passed(self, tol: float = 1e-9, uniform_tol: float = 1e-9) -> bool:
        return (self.v_marginal_uniform_dev <= uniform_tol
                and self.av_independent_of_s
                and self.sts_symmetry_dev <= tol
                and self.sts_marginal_dev <= tol
                and self.vasa_symmetry_dev <= tol
                and self.vasa_marginal_dev <= tol
                and self.positive_layers)

    def to_json_dict(self) -> dict:
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else
                    v if isinstance(v, dict) else float(v))
                for k, v in self.__dict__.items()}


def invariant_report(x) -> InvariantReport:
    """Exact verification of the defining marginal and symmetry properties."""
    if isinstance(x, StructuredHdxStav):
        return _structured_invariants(x)
    vm = x.v_marginal()
    uniform_dev = float(np.max(np.abs(vm - 1.0 / len(vm))))
    # (a, v) | t factor is stored once per t: independence from s holds by
    # representation; report it as structural.
    sym_dev = 0.0
    for ti in range(len(x.t_probs)):
        tab = x.sts.tables[ti]
        if tab[0] == "pairs":
            _, i_idx, j_idx, p = tab
            fwd = defaultdict(float)
            for a, b, q in zip(i_idx, j_idx, p):
                fwd[(int(a), int(b))] += float(q)
            for (a, b), q in fwd.items():
                sym_dev = max(sym_dev, abs(q - fwd.get((b, a), 0.0)))
    # (s, t) marginal of the pair distribution vs the main distribution
    marg_dev = 0.0
    stc = x.st_joint.tocsc()
    for ti in range(len(x.t_probs)):
        col = stc[:, ti]
        main = np.zeros(x.n_s)
        main[col.indices] = col.data
        tab = x.sts.tables[ti]
        pair = np.zeros(x.n_s)
        if tab[0] == "indep":
            pair[tab[1]] = x.t_probs[ti] * tab[2]
        else:
            np.add.at(pair, tab[1], x.t_probs[ti] * tab[3])
        marg_dev = max(marg_dev, float(np.max(np.abs(pair - main))) if x.n_s else 0.0)
    # amplification symmetry and marginal
    fwd = defaultdict(float)
    for v, a1, s, a2, p in zip(x.vasa.v_idx, x.vasa.a1_idx, x.vasa.s_idx,
                               x.vasa.a2_idx, x.vasa.probs):
        fwd[(int(v), int(a1), int(s), int(a2))] += float(p)
    vasa_sym = 0.0
    for (v, a1, s, a2), p in fwd.items():
        vasa_sym = max(vasa_sym, abs(p - fwd.get((v, a2, s, a1), 0.0)))
    vas_marg = defaultdict(float)
    for (v, a1, s, a2), p in fwd.items():
        vas_marg[(v, a1, s)] += p
    ref = defaultdict(float)
    vv, aa, ss, pp = x.vas_triples()
    for v, a, s, p in zip(vv, aa, ss, pp):
        ref[(int(v), int(a), int(s))] += float(p)
    vasa_marg_dev = 0.0
    for key in set(vas_marg) | set(ref):
        vasa_marg_dev = max(vasa_marg_dev, abs(vas_marg.get(key, 0.0) - ref.get(key, 0.0)))
    positive = (bool(np.all(x.s_probs() > 0)) and bool(np.all(vm > 0))
                and bool(np.all(np.asarray(x.reach_joint().sum(axis=1)).ravel() > 0)))
    return InvariantReport(
        v_marginal_uniform_dev=uniform_dev,
        av_independent_of_s=True,
        sts_symmetry_dev=sym_dev,
        sts_marginal_dev=marg_dev,
        vasa_symmetry_dev=vasa_sym,
        vasa_marginal_dev=vasa_marg_dev,
        positive_layers=positive,
        methods={"av_independent_of_s": "structural (factored through t)",
                 "others": "exact summation"})


def _structured_invariants(x: StructuredHdxStav) -> InvariantReport:
    c, d, l = x.complex, x.d, x.l
    lev_t = c.level(l)
    vm = np.zeros(c.n_vertices)
    for row, w in zip(lev_t.faces, lev_t.measure):
        vm[row] += w / (l + 1)
    uniform_dev = float(np.max(np.abs(vm - 1.0 / c.n_vertices)))
    # pair distribution is built from the same conditional P(s | t) as the
    # main distribution, so the (s, t) marginal identity is algebraic; the
    # amplification marginal identity is the combinatorial ratio below.
    lhs = 1.0 / (math.comb(d + 1, l + 1) * (l + 1))
    rhs = math.comb(d + 1 - l - 1, l) / (math.comb(d + 1, l)
                                         * math.comb(d + 1 - l, l) * (d + 1 - 2 * l))
    vasa_marg_dev = abs(lhs - rhs) / lhs
    return InvariantReport(
        v_marginal_uniform_dev=uniform_dev,
        av_independent_of_s=True,
        sts_symmetry_dev=0.0,
        sts_marginal_dev=0.0,
        vasa_symmetry_dev=0.0,
        vasa_marginal_dev=vasa_marg_dev,
        positive_layers=bool(np.all(vm > 0)),
        methods={"v_marginal": "exact summation over level l",
                 "sts": "structural (independent pair with shared conditional)",
                 "vasa": "exact combinatorial identity",
                 "av_independent_of_s": "structural"})


# -- derived graphs -----------------------------------------------------------------


def derive_graph(x: StavInstance, kind: str, element=None):
    """Local views of the distributions as weighted or bipartite graphs."""
    if x.mode != "tabular":
        raise SizeCapError("derived graphs need a tabular instance")
    if kind == "reach":
        j = x.reach_joint()
        return BipartiteGraph(x.a_labels, x.v_labels, _densify(j))
    if kind == "local_reach":
        si = _find(x.s_labels, element)
        vv, aa, ss, pp = x.vas_triples()
        sel = ss == si
        j = _accumulate((aa[sel], vv[sel], pp[sel]),
                        (len(x.a_labels), x.n_v))
        total = j.sum()
        if total <= 0:
            raise ZeroConditioning(f"s element {element} has no mass")
        return BipartiteGraph(x.a_labels, x.v_labels, _densify(j) / total)
    if kind == "sts_a":
        ai = _find(x.a_labels, element)
        return _sts_conditioned(x, set(x.a_supports[ai]))
    if kind == "sts_av":
        a_el, v_el = element
        ai = _find(x.a_labels, a_el)
        vi = _find(x.v_labels, v_el)
        need = set(x.a_supports[ai]) | {int(x.v_ground[vi])}
        return _sts_conditioned(x, need)
    if kind == "vasa_v":
        vi = _find(x.v_labels, element)
        sel = x.vasa.v_idx == vi
        if not sel.any():
            raise ZeroConditioning(f"v element {element} has no mass")
        j = _accumulate((x.vasa.a1_idx[sel], x.vasa.a2_idx[sel], x.vasa.probs[sel]),
                        (len(x.a_labels), len(x.a_labels)))
        live = np.asarray((j.sum(axis=0) + j.sum(axis=1).T)).ravel() > 0
        keep = np.flatnonzero(live)
        dense = _densify(j)[np.ix_(keep, keep)]
        dense = dense / dense.sum()
        return WeightedGraph([x.a_labels[i] for i in keep], dense)
    if kind == "vas_a":
        ai = _find(x.a_labels, element)
        sel = x.vasa.a1_idx == ai
        if not sel.any():
            raise ZeroConditioning(f"a element {element} has no mass")
        pairs = {}
        for a2, s in zip(x.vasa.a2_idx[sel], x.vasa.s_idx[sel]):
            pairs.setdefault((int(a2), int(s)), len(pairs))
        cols = np.array([pairs[(int(a2), int(s))]
                         for a2, s in zip(x.vasa.a2_idx[sel], x.vasa.s_idx[sel])])
        j = _accumulate((x.vasa.v_idx[sel], cols, x.vasa.probs[sel]),
                        (x.n_v, len(pairs)))
        dense = _densify(j)
        live = dense.sum(axis=1) > 0
        keep = np.flatnonzero(live)
        dense = dense[keep] / dense.sum()
        labels = [None] * len(pairs)
        for (a2, s), i in pairs.items():
            labels[i] = (x.a_labels[a2], x.s_labels[s])
        return BipartiteGraph([x.v_labels[i] for i in keep], labels, dense)
    if kind == "t_lower":
        ti = _find(x.t_labels, element)
        t_sup = set(x.t_supports[ti])
        a_in = [ai for ai, sup in enumerate(x.a_supports) if set(sup) <= t_sup]
        if not a_in:
            raise ZeroConditioning(f"no A element inside {element}")
        # a drawn by its overall reach mass conditioned inside t, v uniform in a
        reach_mass = np.asarray(x.reach_joint().sum(axis=1)).ravel()
        w = reach_mass[a_in]
        w = w / w.sum()
        v_ids = sorted(t_sup)
        v_pos = {v: i for i, v in enumerate(v_ids)}
        j = np.zeros((len(a_in), len(v_ids)))
        for row, ai in enumerate(a_in):
            sup = x.a_supports[ai]
            for v in sup:
                j[row, v_pos[v]] = w[row] / len(sup)
        return BipartiteGraph([x.a_labels[i] for i in a_in],
                              [x.ground_labels[i] for i in v_ids], j)
    raise HdxError(f"unknown graph kind {kind!r}")


def _find(labels, element):
    try:
        return labels.index(element)
    except ValueError:
        raise ZeroConditioning(f"element {element!r} not in layer") from None


def _densify(j):
    return np.asarray(j.todense()) if sp.issparse(j) else np.asarray(j)


def _accumulate(triplet, shape):
    r, c, v = triplet
    m = sp.coo_matrix((v, (r, c)), shape=shape).tocsr()
    m.sum_duplicates()
    return m


def _sts_conditioned(x: StavInstance, need: set) -> WeightedGraph:
    """Pair graph conditioned on the middle face containing ``need``."""
    t_sel = [ti for ti, sup in enumerate(x.t_supports)
             if need <= set(sup) and x.t_probs[ti] > 0]
    if not t_sel:
        raise ZeroConditioning("conditioning event has zero probability")
    z = sum(float(x.t_probs[ti]) for ti in t_sel)
    acc = defaultdict(float)
    for ti in t_sel:
        i_idx, j_idx, p = x.sts.pair_arrays(ti)
        w = float(x.t_probs[ti]) / z
        for a, b, q in zip(i_idx, j_idx, p):
            acc[(int(a), int(b))] += w * float(q)
    live = sorted({a for a, _ in acc} | {b for _, b in acc})
    pos = {s: i for i, s in enumerate(live)}
    dense = np.zeros((len(live), len(live)))
    for (a, b), q in acc.items():
        dense[pos[a], pos[b]] += q
    return WeightedGraph([x.s_labels[i] for i in live], dense)


# -- goodness check ------------------------------------------------------------------


@dataclass
class GoodnessConfig:
    edge_expansion_threshold: float = 1.0 / 3.0
    a5_threshold: float = 0.5
    brute_force_vertices: int = 24
    sampler_spot_checks: int = 1000
    seed: int = 0


@dataclass
class GoodnessReport:
    a1_reach_lambda: float
    a2a_min_edge_expansion: float
    a2a_method: str
    a2b_max_lambda: float
    a2b_method: str
    a3a_max_lambda: float
    a3b_max_lambda: float
    a4_max_av_lambda: float
    a4_spot_check_failures: int
    a5_min_conditional: float
    inferred_gamma: float
    gamma: float
    r: float
    passes: dict
    overall_pass: bool
    notes: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if isinstance(v, dict):
                out[k] = {kk: (bool(vv) if isinstance(vv, (bool, np.bool_)) else vv)
                          for kk, vv in v.items()}
            elif isinstance(v, (bool, np.bool_)):
                out[k] = bool(v)
            else:
                out[k] = float(v) if isinstance(v, (int, float, np.floating)) else v
        return out


def _assemble_report(vals, gamma, r, cfg) -> GoodnessReport:
    a4_delta = r * gamma
    a4_sufficient = vals["a4_max_av_lambda"] ** 2 <= (8.0 / 27.0) * a4_delta
    passes = {
        "A1": vals["a1_reach_lambda"] <= math.sqrt(gamma) + 1e-9,
        "A2a": vals["a2a_min_edge_expansion"] >= cfg.edge_expansion_threshold - 1e-9,
        "A2b": vals["a2b_max_lambda"] <= gamma + 1e-9,
        "A3a": vals["a3a_max_lambda"] <= gamma + 1e-9,
        "A3b": vals["a3b_max_lambda"] <= math.sqrt(gamma) + 1e-9,
        "A4": bool(a4_sufficient and vals["a4_spot_check_failures"] == 0),
        "A5": vals["a5_min_conditional"] >= cfg.a5_threshold - 1e-9,
    }
    inferred = max(vals["a1_reach_lambda"] ** 2, vals["a2b_max_lambda"],
                   vals["a3a_max_lambda"], vals["a3b_max_lambda"] ** 2)
    overall = (passes["A1"] and passes["A2a"] and passes["A2b"] and passes["A3a"]
               and passes["A3b"] and (passes["A4"] or passes["A5"]))
    return GoodnessReport(gamma=gamma, r=r, passes=passes, overall_pass=overall,
                          inferred_gamma=inferred, **vals)


def goodness_check(x, gamma: float, r: float = 1.0,
                   config: GoodnessConfig | None = None) -> GoodnessReport:
    """Measure every goodness assumption and compare at the given gamma, r."""
    cfg = config or GoodnessConfig()
    if isinstance(x, StructuredHdxStav):
        return _goodness_structured(x, gamma, r, cfg)
    return _goodness_tabular(x, gamma, r, cfg)


def _lambda_two_sided(g: WeightedGraph):
    rep = square_lambda(g.joint, g.vertex_measure)
    return rep.lambda2, rep.two_sided


def _bipartite_value(g: WeightedGraph):
    """Bipartite reading of a symmetric graph, when its support is 2-colorable."""
    dense = _densify(g.joint)
    m = dense.shape[0]
    if np.any(np.diag(dense) > 0):
        return None
    color = -np.ones(m, dtype=int)
    for start in range(m):
        if color[start] >= 0:
            continue
        color[start] = 0
        stack = [start]
        while stack:
            u = stack.pop()
            for w in np.flatnonzero(dense[u] > 0):
                if color[w] < 0:
                    color[w] = 1 - color[u]
                    stack.append(int(w))
                elif color[w] == color[u]:
                    return None
    left = np.flatnonzero(color == 0)
    right = np.flatnonzero(color == 1)
    if len(left) == 0 or len(right) == 0:
        return None
    block = dense[np.ix_(left, right)] * 2.0
    return bipartite_lambda(block, block.sum(axis=1), block.sum(axis=0)).lambda_bip


def _sampler_spot_checks(joint: np.ndarray, delta: float, n_checks: int,
                         rng) -> int:
    """Direct checks of the delta-sampling property on random right subsets."""
    pi_l = joint.sum(axis=1)
    pi_r = joint.sum(axis=0)
    nr = joint.shape[1]
    failures = 0
    if nr <= 12:
        candidates = [np.array(c) for size in range(1, nr + 1)
                      for c in itertools.combinations(range(nr), size)]
    else:
        candidates = [np.flatnonzero(rng.random(nr) < rng.uniform(0.2, 0.8))
                      for _ in range(n_checks)]
    for cset in candidates:
        if len(cset) == 0:
            continue
        pr_c = pi_r[cset].sum()
        if pr_c < delta:
            continue
        cond = joint[:, cset].sum(axis=1) / pi_l
        good = cond >= delta / 3.0
        if pi_l[good].sum() < 1.0 / 3.0 - 1e-12:
            failures += 1
    return failures


def _goodness_tabular(x: StavInstance, gamma, r, cfg) -> GoodnessReport:
    if x.n_s > 50_000 or len(x.vasa) > TABULAR_TABLE_CAP:
        raise SizeCapError("instance too large for the exhaustive goodness check")
    notes = {}
    reach = x.reach_joint()
    a1 = bipartite_lambda(reach, np.asarray(reach.sum(axis=1)).ravel(),
                          np.asarray(reach.sum(axis=0)).ravel()).lambda_bip

    # A2a: edge expansion of every a-conditioned pair graph
    min_phi = np.inf
    a2a_method = "brute_force"
    for ai in range(len(x.a_labels)):
        try:
            g = derive_graph(x, "sts_a", x.a_labels[ai])
        except ZeroConditioning:
            continue
        m = g.joint.shape[0]
        if m <= cfg.brute_force_vertices:
            phi = edge_expansion_exact(g, cfg.brute_force_vertices).phi
        else:
            a2a_method = "cheeger_lower_bound"
            l2, _ = _lambda_two_sided(g)
            phi = (1.0 - l2) / 2.0
        min_phi = min(min_phi, phi)

    # A2b: two-sided expansion of every (a, v)-conditioned pair graph
    a2b = 0.0
    adj_a, adj_v = x.adjacency()
    for ai, vs in adj_a.items():
        for vi in vs:
            try:
                g = derive_graph(x, "sts_av", (x.a_labels[ai], x.v_labels[vi]))
            except ZeroConditioning:
                continue
            _, two = _lambda_two_sided(g)
            a2b = max(a2b, two)

    # A3a: each v-conditioned amplification graph, square or bipartite reading
    a3a = 0.0
    for vi in range(x.n_v):
        try:
            g = derive_graph(x, "vasa_v", x.v_labels[vi])
        except ZeroConditioning:
            continue
        _, two = _lambda_two_sided(g)
        bip = _bipartite_value(g)
        a3a = max(a3a, two if bip is None else min(two, bip))

    # A3b: each a-conditioned bipartite amplification graph
    a3b = 0.0
    for ai in range(len(x.a_labels)):
        try:
            g = derive_graph(x, "vas_a", x.a_labels[ai])
        except ZeroConditioning:
            continue
        a3b = max(a3b, bipartite_lambda(g.joint, g.left_measure,
                                        g.right_measure).lambda_bip)

    # A4: local reach graphs as samplers
    rng = np.random.default_rng(cfg.seed)
    a4 = 0.0
    spot_failures = 0
    for si in range(x.n_s):
        g = derive_graph(x, "local_reach", x.s_labels[si])
        dense = _densify(g.joint)
        live_a = dense.sum(axis=1) > 0
        live_v = dense.sum(axis=0) > 0
        dense = dense[np.ix_(live_a, live_v)]
        a4 = max(a4, bipartite_lambda(dense, dense.sum(axis=1),
                                      dense.sum(axis=0)).lambda_bip)
        spot_failures += _sampler_spot_checks(dense, r * gamma,
                                              cfg.sampler_spot_checks, rng)

    # A5: weighted conditional of landing in the reach of a inside s
    vm = x.v_marginal()
    ground_to_v = {int(g): i for i, g in enumerate(x.v_ground)}
    a5 = np.inf
    vv, aa, ss, pp = x.vas_triples()
    support_as = {(int(a), int(s)) for a, s, p in zip(aa, ss, pp) if p > 0}
    for ai, si in support_as:
        num = den = 0.0
        for gv in x.s_supports[si]:
            vi = ground_to_v.get(int(gv))
            if vi is None:
                continue  # outside the v-layer, zero mass under the v-marginal
            den += vm[vi]
            if vi in adj_a.get(ai, ()):
                num += vm[vi]
        a5 = min(a5, num / den if den > 0 else 0.0)

    vals = dict(a1_reach_lambda=a1, a2a_min_edge_expansion=float(min_phi),
                a2a_method=a2a_method, a2b_max_lambda=a2b,
                a2b_method="dense", a3a_max_lambda=a3a, a3b_max_lambda=a3b,
                a4_max_av_lambda=a4, a4_spot_check_failures=spot_failures,
                a5_min_conditional=float(a5))
    rep = _assemble_report(vals, gamma, r, cfg)
    rep.notes = notes
    return rep


# -- structured goodness path -----------------------------------------------------


def _goodness_structured(x: StructuredHdxStav, gamma, r, cfg) -> GoodnessReport:
    c, d, l = x.complex, x.d, x.l
    notes = {"path": "structured (containment-mass reductions in a pure complex)"}
    lev_t = c.level(l)
    lev_a = c.level(l - 1)

    # A1: reach graph assembled from level l
    rows, cols, vals = [], [], []
    for pos in range(l + 1):
        keep = [j for j in range(l + 1) if j != pos]
        a_idx = lev_a.index_rows(lev_t.faces[:, keep])
        rows.append(a_idx)
        cols.append(lev_t.faces[:, pos].astype(np.int64))
        vals.append(lev_t.measure / (l + 1))
    reach = sp.coo_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(lev_a.size, c.n_vertices)).tocsr()
    reach.sum_duplicates()
    a1 = bipartite_lambda(reach, np.asarray(reach.sum(axis=1)).ravel(),
                          np.asarray(reach.sum(axis=0)).ravel()).lambda_bip

    # neighbor lists in the reach graph
    reach_csr = reach.tocsr()

    def candidates(ai):
        return reach_csr.indices[reach_csr.indptr[ai]:reach_csr.indptr[ai + 1]]

    # A2a and A3b share the level-(l+1) mass ratios
    min_l2 = -np.inf
    a3b = 0.0
    for ai in range(lev_a.size):
        a = lev_a.faces[ai]
        vs = candidates(ai)
        m = len(vs)
        rows_1 = np.sort(np.concatenate(
            [np.tile(a, (m, 1)), vs[:, None]], axis=1), axis=1)
        mass_1 = c.containment_mass_rows(rows_1)
        pairs = np.array(list(itertools.combinations(range(m), 2)), dtype=int)
        ratio = np.zeros((m, m))
        if len(pairs):
            rows_2 = np.sort(np.concatenate(
                [np.tile(a, (len(pairs), 1)), vs[pairs[:, 0], None],
                 vs[pairs[:, 1], None]], axis=1), axis=1)
            mass_2 = c.containment_mass_rows(rows_2)
            ratio[pairs[:, 0], pairs[:, 1]] = mass_2
            ratio[pairs[:, 1], pairs[:, 0]] = mass_2
        pi = mass_1 / mass_1.sum()
        # two-step pair graph through s: T[v1, v2]
        t_mat = ratio / mass_1[:, None] / (d + 1 - l)
        np.fill_diagonal(t_mat, 1.0 / (d + 1 - l))
        l2 = square_lambda(pi[:, None] * t_mat, pi).lambda2
        min_l2 = max(min_l2, l2)
        # bipartite amplification graph through (a', s) pairs: W[v1, v2]
        denom = (d + 1 - 2 * l) * math.comb(d - l, l)
        w_mat = ratio / mass_1[:, None] * (math.comb(d - l - 1, l) / denom)
        np.fill_diagonal(w_mat, 1.0 / (d + 1 - 2 * l))
        w_l2 = square_lambda(pi[:, None] * w_mat, pi).lambda2
        a3b = max(a3b, math.sqrt(max(w_l2, 0.0)))
    min_phi = (1.0 - min_l2) / 2.0
    notes["a2a"] = "lambda2 via the small-side pair operator; Cheeger lower bound"
    notes["a3b"] = "lambda via the small-side two-step of the bipartite graph"

    # A2b: conditioned on (a, v) the two tops are drawn independently, so the
    # pair operator is rank one and its nontrivial spectrum is exactly zero.
    a2b = 0.0
    notes["a2b"] = "structural (rank-one independent pair)"

    # A3a: v-conditioned amplification graph = disjointness walk in the link
    a3a = 0.0
    dedupe = c.uniform_complete
    v_list = [0] if dedupe else list(range(c.n_vertices))
    if dedupe:
        notes["a3a"] = "single representative vertex (all links isomorphic)"
    for v in v_list:
        a3a = max(a3a, _structured_vasa_v_lambda(c, d, l, v))

    # A4: the local reach graph depends only on (d, l) in a pure complex
    a4, spot_failures = _structured_a4(d, l, r * gamma, cfg)
    notes["a4"] = "canonical split graph on d+1 labeled vertices"

    # A5: the reach of a inside s is exactly s minus a.  With a uniform
    # vertex measure the conditional is the exact count ratio; otherwise we
    # bound it from below without enumerating the top level.
    if c.uniform_complete:
        a5 = (d + 1 - l) / (d + 1)
        notes["a5"] = "exact ratio |s minus a| / |s|"
    else:
        pi0 = np.zeros(c.n_vertices)
        lev0 = c.level(0)
        pi0[lev0.faces[:, 0]] = lev0.measure
        order = np.sort(pi0)
        a5 = np.inf
        for a in lev_a.faces:
            m_a = float(pi0[a].sum())
            light = [p for p in order if p > 0][: d + 1 - l]
            m_low = float(np.sum(light))
            a5 = min(a5, m_low / (m_a + m_low))
        notes["a5"] = "lower bound from the lightest possible complement"

    vals = dict(a1_reach_lambda=a1, a2a_min_edge_expansion=float(min_phi),
                a2a_method="cheeger_lower_bound", a2b_max_lambda=a2b,
                a2b_method="structural-rank-one", a3a_max_lambda=a3a,
                a3b_max_lambda=a3b, a4_max_av_lambda=a4,
                a4_spot_check_failures=spot_failures,
                a5_min_conditional=float(a5))
    rep = _assemble_report(vals, gamma, r, cfg)
    rep.notes = notes
    return rep


def _structured_vasa_v_lambda(c: Complex, d: int, l: int, v: int) -> float:
    """Two-sided expansion of the disjoint-pair graph in the link of v."""
    others = np.array([u for u in range(c.n_vertices) if u != v], dtype=np.int64)
    if c.uniform_complete:
        unions = itertools.combinations(range(len(others)), 2 * l)
        union_rows = np.array(list(unions), dtype=np.int64)
        union_rows = others[union_rows]
        mass = np.full(len(union_rows), 1.0)
    else:
        lev = c.level(2 * l)
        has_v = (lev.faces == v).any(axis=1)
        rows = lev.faces[has_v]
        union_rows = rows[rows != v].reshape(len(rows), 2 * l)
        mass = c.containment_mass_rows(
            np.sort(np.concatenate([union_rows,
                                    np.full((len(union_rows), 1), v)], axis=1), axis=1))
    # index a-faces inside the link by rank over `others`
    a_combos = list(itertools.combinations(range(len(others)), l))
    a_rank = {comb: i for i, comb in enumerate(a_combos)}
    pos_of = np.zeros(c.n_vertices, dtype=np.int64)
    pos_of[others] = np.arange(len(others))
    splits = list(itertools.combinations(range(2 * l), l))
    rows_i, cols_j, vals = [], [], []
    for keep in splits:
        rest = tuple(i for i in range(2 * l) if i not in keep)
        left = np.sort(pos_of[union_rows[:, keep]], axis=1)
        right = np.sort(pos_of[union_rows[:, rest]], axis=1)
        li = np.array([a_rank[tuple(row)] for row in left])
        ri = np.array([a_rank[tuple(row)] for row in right])
        rows_i.append(li)
        cols_j.append(ri)
        vals.append(mass)
    j = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows_i), np.concatenate(cols_j))),
                      shape=(len(a_combos), len(a_combos))).tocsr()
    j.sum_duplicates()
    live = np.asarray(j.sum(axis=1)).ravel() > 0
    keep_idx = np.flatnonzero(live)
    j = j[keep_idx][:, keep_idx]
    j = j / j.sum()
    pi = np.asarray(j.sum(axis=1)).ravel()
    rep = square_lambda(j, pi)
    return rep.two_sided


def _structured_a4(d: int, l: int, delta: float, cfg) -> tuple[float, int]:
    verts = list(range(d + 1))
    a_list = list(itertools.combinations(verts, l))
    joint = np.zeros((len(a_list), d + 1))
    per = len(a_list) * (d + 1 - l)
    for i, a in enumerate(a_list):
        for v in verts:
            if v not in a:
                joint[i, v] = 1.0 / per
    lam = bipartite_lambda(joint, joint.sum(axis=1), joint.sum(axis=0)).lambda_bip
    rng = np.random.default_rng(cfg.seed)
    failures = _sampler_spot_checks(joint, delta, cfg.sampler_spot_checks, rng)
    return lam, failures


# -- JSON interchange ----------------------------------------------------------------


def stav_to_json_dict(x: StavInstance) -> dict:
    def lab(v):
        return list(v) if isinstance(v, tuple) else v

    st = x.st_joint.tocoo()
    vasa = x.vasa
    return {
        "provenance": x.provenance,
        "ground": [lab(v) for v in x.ground_labels],
        "v_ground": [int(i) for i in x.v_ground],
        "V": [lab(v) for v in x.v_labels],
        "A": [{"label": lab(a), "support": list(s)}
              for a, s in zip(x.a_labels, x.a_supports)],
        "T": [{"label": lab(t), "support": list(s)}
              for t, s in zip(x.t_labels, x.t_supports)],
        "S": [{"label": lab(s), "support": list(sup)}
              for s, sup in zip(x.s_labels, x.s_supports)],
        "st_joint": [[int(i), int(j), float(p)]
                     for i, j, p in zip(st.row, st.col, st.data)],
        "av_tables": [[[int(a), int(v), float(p)]
                       for a, v, p in zip(*tab)] for tab in x.av_tables],
        "sts_pairs": [[[int(i), int(j), float(p)]
                       for i, j, p in zip(*x.sts.pair_arrays(ti))]
                      for ti in range(len(x.t_probs))],
        "vasa": [[int(v), int(a1), int(s), int(a2), float(p)]
                 for v, a1, s, a2, p in zip(vasa.v_idx, vasa.a1_idx, vasa.s_idx,
                                            vasa.a2_idx, vasa.probs)],
    }


def stav_from_json_dict(data: dict) -> StavInstance:
    """Load a custom tabular instance and validate its defining invariants."""
    def unlab(v):
        return tuple(v) if isinstance(v, list) else v

    v_labels = [unlab(v) for v in data["V"]]
    ground_labels = ([unlab(v) for v in data["ground"]]
                     if "ground" in data else list(v_labels))
    v_ground = (np.asarray(data["v_ground"], dtype=np.int64)
                if "v_ground" in data else np.arange(len(v_labels)))
    a_labels = [unlab(e["label"]) for e in data["A"]]
    t_labels = [unlab(e["label"]) for e in data["T"]]
    s_labels = [unlab(e["label"]) for e in data["S"]]
    a_supports = [tuple(e["support"]) for e in data["A"]]
    t_supports = [tuple(e["support"]) for e in data["T"]]
    s_supports = [tuple(e["support"]) for e in data["S"]]
    st_rows = data["st_joint"]
    st = sp.coo_matrix(([p for _, _, p in st_rows],
                        ([i for i, _, _ in st_rows], [j for _, j, _ in st_rows])),
                       shape=(len(s_labels), len(t_labels))).tocsr()
    st.sum_duplicates()
    t_probs = np.asarray(st.sum(axis=0)).ravel()
    av_tables = []
    for ti, tab in enumerate(data["av_tables"]):
        a_idx = np.array([r[0] for r in tab], dtype=np.int64)
        v_idx = np.array([r[1] for r in tab], dtype=np.int64)
        p = np.array([r[2] for r in tab], dtype=float)
        if abs(p.sum() - 1.0) > 1e-8:
            raise MarginalMismatch(f"(a,v) table at t={ti} sums to {p.sum():.10g}")
        av_tables.append((a_idx, v_idx, p))
    tables = []
    for ti, tab in enumerate(data["sts_pairs"]):
        i_idx = np.array([r[0] for r in tab], dtype=np.int64)
        j_idx = np.array([r[1] for r in tab], dtype=np.int64)
        p = np.array([r[2] for r in tab], dtype=float)
        if abs(p.sum() - 1.0) > 1e-8:
            raise MarginalMismatch(f"pair table at t={ti} sums to {p.sum():.10g}")
        tables.append(("pairs", i_idx, j_idx, p))
    sts = STSTable(t_probs=t_probs, tables=tables, n_s=len(s_labels))
    vrows = data["vasa"]
    vasa = VasaTable(np.array([r[0] for r in vrows], dtype=np.int64),
                     np.array([r[1] for r in vrows], dtype=np.int64),
                     np.array([r[2] for r in vrows], dtype=np.int64),
                     np.array([r[3] for r in vrows], dtype=np.int64),
                     np.array([r[4] for r in vrows], dtype=float))
    inst = StavInstance(provenance=data.get("provenance", "custom"),
                        ground_labels=ground_labels, v_labels=v_labels,
                        v_ground=v_ground,
                        a_labels=a_labels, t_labels=t_labels,
                        s_labels=s_labels, a_supports=a_supports,
                        t_supports=t_supports, s_supports=s_supports,
                        t_probs=t_probs, st_joint=st, av_tables=av_tables,
                        sts=sts, vasa=vasa)
    rep = invariant_report(inst)
    if not rep.passed(tol=1e-7, uniform_tol=1e-6):
        raise MarginalMismatch(f"instance violates defining invariants: "
                              f"{rep.to_json_dict()}")
    return inst


def save_stav(x: StavInstance, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(stav_to_json_dict(x), fh)
        fh.write("\n")


def load_stav(path: str) -> StavInstance:
    with open(path) as fh:
        return stav_from_json_dict(json.load(fh))

