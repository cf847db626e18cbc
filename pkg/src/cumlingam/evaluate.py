"""Precision, recall and F1 over directed edges and non-adjacent pairs, and
the root-mean-square error of the observed coefficient matrix."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import LabelMismatchError
from .graph import CausalGraph
from .simulate import ModelSpec


@dataclass
class PRF:
    precision: float
    recall: float
    f1: float

    def as_tuple(self) -> tuple[float, float, float]:
        return self.precision, self.recall, self.f1


@dataclass
class MetricsReport:
    directed: PRF
    nonadjacent: PRF
    rmse: float | None = None
    counts: dict = field(default_factory=dict)
    latents: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def prf(found: int, correct: int, true: int) -> PRF:
    """Scores from tallies.

    Both sets empty counts as perfect agreement.  Otherwise an empty found
    set has precision 0 and an empty true set has recall 0.
    """
    if found == 0 and true == 0:
        return PRF(1.0, 1.0, 1.0)
    p = correct / found if found else 0.0
    r = correct / true if true else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return PRF(p, r, f)


def _check_labels(learned: CausalGraph, truth: CausalGraph) -> None:
    if sorted(learned.observed) != sorted(truth.observed):
        raise LabelMismatchError(
            f"observed labels differ: {sorted(learned.observed)} vs {sorted(truth.observed)}")


def _directed_counts(learned: CausalGraph, truth: CausalGraph) -> dict:
    true = set(truth.directed)
    found = len(learned.directed) + len(learned.undirected)
    correct = len(set(learned.directed) & true)
    return {"true": len(true), "found": found, "correct": correct}


def nonadjacent_pairs(g: CausalGraph) -> set[tuple[str, str]]:
    return {p for p in combinations(sorted(g.observed), 2) if not g.adjacent(*p)}


def _nonadj_counts(learned: CausalGraph, truth: CausalGraph) -> dict:
    lt, tt = nonadjacent_pairs(learned), nonadjacent_pairs(truth)
    return {"true": len(tt), "found": len(lt), "correct": len(lt & tt)}


def edge_metrics(learned: CausalGraph, truth: CausalGraph) -> tuple[float, float, float]:
    """Directed-edge scores; learned undirected edges count as found and wrong."""
    _check_labels(learned, truth)
    c = _directed_counts(learned, truth)
    return prf(c["found"], c["correct"], c["true"]).as_tuple()


def nonadjacency_metrics(learned: CausalGraph, truth: CausalGraph) -> tuple[float, float, float]:
    """Scores over unordered pairs joined by no directed or undirected edge."""
    _check_labels(learned, truth)
    c = _nonadj_counts(learned, truth)
    return prf(c["found"], c["correct"], c["true"]).as_tuple()


def rmse(learned: CausalGraph, truth: ModelSpec) -> float:
    """sqrt(sum_ij (b_ij - b^_ij)^2 / p^2); missing coefficients count as 0."""
    if sorted(learned.observed) != sorted(truth.observed):
        raise LabelMismatchError("observed labels differ")
    Bhat = learned.b_matrix(truth.observed)
    p = truth.p
    return float(np.sqrt(np.sum((Bhat - truth.B) ** 2) / p ** 2))


def _children(g: CausalGraph) -> dict[str, set[str]]:
    return {l: set(g.latent_children(l)) for l in g.latents}


def latent_match(learned: CausalGraph, truth: CausalGraph, threshold: float = 2 / 3) -> dict:
    """Match latents by child-set Jaccard under the optimal one-to-one assignment.

    A matched pair counts as recovered when its Jaccard index reaches
    ``threshold``.
    """
    lc, tc = _children(learned), _children(truth)
    ll, tl = sorted(lc), sorted(tc)
    pairs = []
    if ll and tl:
        J = np.zeros((len(ll), len(tl)))
        for a, l in enumerate(ll):
            for b, t in enumerate(tl):
                union = lc[l] | tc[t]
                J[a, b] = len(lc[l] & tc[t]) / len(union) if union else 0.0
        rows, cols = linear_sum_assignment(-J)
        pairs = [(ll[a], tl[b], float(J[a, b])) for a, b in zip(rows, cols)]
    recovered = [p for p in pairs if p[2] >= threshold]
    return {
        "learned": len(ll), "true": len(tl), "recovered": len(recovered),
        "pairs": [{"learned": a, "true": b, "jaccard": j} for a, b, j in pairs],
    }


def evaluate(learned: CausalGraph, truth: ModelSpec) -> MetricsReport:
    tg = truth.graph()
    _check_labels(learned, tg)
    dc, nc = _directed_counts(learned, tg), _nonadj_counts(learned, tg)
    return MetricsReport(
        directed=prf(dc["found"], dc["correct"], dc["true"]),
        nonadjacent=prf(nc["found"], nc["correct"], nc["true"]),
        rmse=rmse(learned, truth),
        counts={"directed": dc, "nonadjacent": nc},
        latents=latent_match(learned, tg),
    )
