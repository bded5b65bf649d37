"""Shared fixtures and independent oracles used across the suite."""

import math

import numpy as np
import pytest

from hdxlab.complexes import Complex, partite_complete_complex
from hdxlab.walks import BipartiteGraph, WeightedGraph


def random_partite_complex(seed: int, sizes=None, noise: float = 1.0) -> Complex:
    """Random full-support weights on all transversals of a partite complex.

    ``noise`` scales the log-normal weight spread; small values keep the
    links well inside the expander regime, large values stress the bounds.
    """
    rng = np.random.default_rng(seed)
    if sizes is None:
        sizes = rng.integers(4, 7, size=3).tolist()
    base = partite_complete_complex(sizes)
    tops, _ = base.top_arrays()
    weights = np.exp(noise * rng.normal(size=len(tops)))
    weights = weights / weights.sum()
    return Complex(base.n_vertices, base.d, tops.copy(), weights,
                   coloring=base.coloring)


def random_weighted_graph(seed: int, n: int) -> WeightedGraph:
    """Dense random symmetric joint with full support (an expander w.h.p.)."""
    rng = np.random.default_rng(seed)
    m = rng.gamma(2.0, 1.0, size=(n, n))
    m = m + m.T
    np.fill_diagonal(m, 0.0)
    m = m / m.sum()
    return WeightedGraph(list(range(n)), m)


def random_bipartite_graph(seed: int, nl: int, nr: int) -> BipartiteGraph:
    rng = np.random.default_rng(seed)
    j = rng.gamma(2.0, 1.0, size=(nl, nr))
    j = j / j.sum()
    return BipartiteGraph(list(range(nl)), list(range(nr)), j)


def kneser_lambda(n: int, k: int) -> float:
    """Largest nontrivial eigenvalue magnitude of the normalized disjointness
    walk on k-subsets of [n] (independent closed form, exact rationals)."""
    from fractions import Fraction
    deg = math.comb(n - k, k)
    best = Fraction(0)
    for i in range(1, k + 1):
        val = Fraction(math.comb(n - k - i, k - i), deg)
        if val > abs(best):
            best = val if i % 2 == 0 else -val
    return float(abs(best))


def brute_force_rejection(test, f) -> float:
    """Independent rejection oracle: expand every pair table explicitly."""
    pos_maps = [{v: i for i, v in enumerate(sup)} for sup in test.s_supports]

    def restr(si, verts):
        vals = f.assignments[test.s_labels[si]]
        return tuple(int(vals[pos_maps[si][v]]) for v in verts)

    total = 0.0
    for ti, pt in enumerate(test.sts.t_probs):
        if pt <= 0:
            continue
        i_idx, j_idx, p = test.sts.pair_arrays(ti)
        for si, sj, q in zip(i_idx, j_idx, p):
            if test.t_supports is not None:
                verts = test.t_supports[ti]
            else:
                verts = tuple(sorted(set(test.s_supports[int(si)])
                                     & set(test.s_supports[int(sj)])))
            if restr(int(si), verts) != restr(int(sj), verts):
                total += pt * float(q)
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
