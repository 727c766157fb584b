"""Independent reference values for the C++ tests.

Uses numpy / scikit-learn / networkx rather than the library itself; the
output is pasted into tests/oracle_values.hpp.
"""

import math

import networkx as nx
import numpy as np
from sklearn.metrics import f1_score, ndcg_score


def main():
    out = {}

    # nDCG: gold {a, b}, ranking [a, x, b], k = 3.
    out["kNdcgExample"] = ndcg_score([[1, 0, 1]], [[3, 2, 1]], k=3)

    # Macro-F: one label, precision 0.5, recall 1.
    y_true = [1, 0]
    y_pred = [1, 1]
    out["kMacroFHalfPrecision"] = f1_score(y_true, y_pred)

    # prf: two gold edges, one predicted.
    p, r = 1.0, 0.5
    out["kPrfHalfRecallF1"] = 2 * p * r / (p + r)

    # Facet similarity of disjoint 2-sets with smoothing 1.
    out["kDisjointSimilarity"] = (0 + 1) / (4 + 1)

    # Iteration bound ceil(log(eps (1 - lam)) / log(lam)).
    out["kBound07_1e4"] = math.ceil(math.log(1e-4 * 0.3) / math.log(0.7))
    out["kBound05_1e3"] = math.ceil(math.log(1e-3 * 0.5) / math.log(0.5))

    # Fixed point on root A {f, g} with children B {g} and C {} (brothers).
    lam = 0.7
    sets = {"A": {"f", "g"}, "B": {"g"}, "C": set()}
    sim = lambda x, y: (len(x & y) + 1) / (len(x | y) + 1)
    w = {("A", "B"): sim(sets["A"], sets["B"]), ("A", "C"): sim(sets["A"], sets["C"]),
         ("B", "C"): sim(sets["B"], sets["C"])}
    # Unknowns p_B, p_C for facet f; A is pinned at 1.
    sb = w[("A", "B")] + w[("B", "C")]
    sc = w[("A", "C")] + w[("B", "C")]
    m = np.array([[1.0, -lam * w[("B", "C")] / sb], [-lam * w[("B", "C")] / sc, 1.0]])
    rhs = np.array([lam * w[("A", "B")] / sb, lam * w[("A", "C")] / sc])
    pb, pc = np.linalg.solve(m, rhs)
    out["kFixedPointFB"] = pb
    out["kFixedPointFC"] = pc
    out["kFixedPointGC"] = lam

    # TF-IDF: "stack" 5x only in doc A of a 2-doc corpus.
    out["kStackTfidf"] = 5 * math.log(2)

    # Hierarchy distance between siblings and the locality feature.
    g = nx.Graph([("root", "a"), ("root", "b")])
    d = nx.shortest_path_length(g, "a", "b")
    out["kSiblingDistance"] = d
    out["kSiblingLocality"] = 1 / (1 + d)

    for k, v in out.items():
        if isinstance(v, int):
            print(f"inline constexpr int {k} = {v};")
        else:
            print(f"inline constexpr double {k} = {float(v)!r};")


if __name__ == "__main__":
    main()
