"""Mixed graph over observed variables and latent confounders."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .errors import InputShapeError


def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass
class CausalGraph:
    """Directed, undirected and latent-to-observed edges.

    ``directed`` maps (parent, child) to a coefficient or None,
    ``undirected`` holds lexicographically sorted label pairs and ``latent``
    maps (latent id, child) to a loading or None.
    """

    observed: list[str]
    latents: list[str] = field(default_factory=list)
    directed: dict = field(default_factory=dict)
    undirected: set = field(default_factory=set)
    latent: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def complete_undirected(cls, labels) -> "CausalGraph":
        labels = list(labels)
        g = cls(observed=labels)
        for a in range(len(labels)):
            for b in range(a + 1, len(labels)):
                g.undirected.add(_pair(labels[a], labels[b]))
        return g

    def copy(self) -> "CausalGraph":
        return copy.deepcopy(self)

    # -- queries ----------------------------------------------------------
    def has_undirected(self, a: str, b: str) -> bool:
        return _pair(a, b) in self.undirected

    def has_directed(self, a: str, b: str) -> bool:
        return (a, b) in self.directed

    def adjacent(self, a: str, b: str) -> bool:
        return self.has_undirected(a, b) or self.has_directed(a, b) or self.has_directed(b, a)

    def children(self, a: str) -> list[str]:
        return sorted(c for (p, c) in self.directed if p == a)

    def parents(self, a: str) -> list[str]:
        return sorted(p for (p, c) in self.directed if c == a)

    def descendants(self, a: str) -> set[str]:
        out, stack = set(), [a]
        while stack:
            for c in self.children(stack.pop()):
                if c not in out:
                    out.add(c)
                    stack.append(c)
        return out

    def ancestors(self, a: str) -> set[str]:
        out, stack = set(), [a]
        while stack:
            for p in self.parents(stack.pop()):
                if p not in out:
                    out.add(p)
                    stack.append(p)
        return out

    def latent_children(self, lid: str) -> list[str]:
        return sorted(c for (l, c) in self.latent if l == lid)

    def unresolved_variables(self) -> set[str]:
        return {v for pair in self.undirected for v in pair}

    def is_dag(self) -> bool:
        return all(a not in self.descendants(a) for a in self.observed)

    # -- mutation ---------------------------------------------------------
    def remove_adjacency(self, a: str, b: str) -> None:
        self.undirected.discard(_pair(a, b))
        self.directed.pop((a, b), None)
        self.directed.pop((b, a), None)

    def orient(self, a: str, b: str, coef=None) -> bool:
        """Replace any edge between a and b by a -> b; False if that makes a cycle."""
        if a == b or a in self.descendants(b):
            return False
        self.undirected.discard(_pair(a, b))
        self.directed.pop((b, a), None)
        self.directed[(a, b)] = coef
        return True

    def add_latent(self, lid: str, children: dict) -> None:
        if lid not in self.latents:
            self.latents.append(lid)
        for c, coef in children.items():
            if c not in self.observed:
                raise InputShapeError(f"unknown child {c}")
            self.latent[(lid, c)] = coef

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "observed": list(self.observed),
            "latents": list(self.latents),
            "directed_edges": [{"from": a, "to": b, "coef": self.directed[(a, b)]}
                               for a, b in sorted(self.directed)],
            "undirected_edges": [list(p) for p in sorted(self.undirected)],
            "latent_edges": [{"latent": l, "child": c, "coef": self.latent[(l, c)]}
                             for l, c in sorted(self.latent, key=lambda t: (_latent_key(t[0]), t[1]))],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CausalGraph":
        try:
            g = cls(observed=list(d["observed"]), latents=list(d.get("latents", [])))
            for e in d.get("directed_edges", []):
                g.directed[(e["from"], e["to"])] = e.get("coef")
            for a, b in d.get("undirected_edges", []):
                g.undirected.add(_pair(a, b))
            for e in d.get("latent_edges", []):
                g.latent[(e["latent"], e["child"])] = e.get("coef")
            g.warnings = list(d.get("warnings", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputShapeError(f"malformed graph document: {exc}") from exc
        known = set(g.observed)
        for a, b in list(g.directed) + list(g.undirected):
            if a not in known or b not in known:
                raise InputShapeError(f"edge {a}-{b} uses an unknown label")
        for l, c in g.latent:
            if l not in g.latents or c not in known:
                raise InputShapeError(f"latent edge {l}->{c} uses an unknown label")
        return g

    def b_matrix(self, order=None):
        """Observed coefficient matrix with B[child, parent]; missing coefficients are 0."""
        import numpy as np
        order = list(order or self.observed)
        idx = {v: k for k, v in enumerate(order)}
        B = np.zeros((len(order), len(order)))
        for (a, b), coef in self.directed.items():
            if coef is not None:
                B[idx[b], idx[a]] = coef
        return B


def _latent_key(lid: str):
    # L2 before L10
    head = lid.rstrip("0123456789")
    tail = lid[len(head):]
    return (head, int(tail) if tail else -1, lid)
