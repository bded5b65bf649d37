"""hdxlab: simplicial-complex and Grassmann random walks, spectral verifiers,
agreement tests, and plurality decoding."""

__version__ = "0.1.0"

from .complexes import (
    Complex,
    build_from_top_faces,
    complete_complex,
    graphic_matroid_complex,
    link,
    load_complex,
    partite_complete_complex,
    skeleton,
)
from .walks import (
    BipartiteGraph,
    MarkovOperator,
    WeightedGraph,
    colored_walk,
    complement_walk,
    containment_operator,
    down_operator,
    fixed_union_walk,
    lower_walk,
    neighborhood_system,
    underlying_graph,
    up_operator,
)
from .spectra import (
    SpectralReport,
    bipartite_norm,
    edge_expansion_exact,
    link_expansion,
    mixing_check,
    partite_mixing_check,
    sampler_check,
    square_spectrum,
    verify_colored_bound,
    verify_complement_bound,
    verify_fixed_union_bound,
    verify_trickling,
)
