"""testspaces: finite metric test spaces and their embedding invariants.

Exact constructions of binary trees, diamonds, Laakso graphs and Heisenberg
word-metric balls, together with the invariants that make them useful as
test spaces: bilipschitz distortion (exact and optimal-euclidean), Markov
p-convexity, summing-norm tree embeddings, delta-trees/bushes with the gauge
renorming, thick families of geodesics, and divergent vector-valued
martingales.
"""

__version__ = "0.1.0"
