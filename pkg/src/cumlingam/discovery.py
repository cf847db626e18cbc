"""Structure search: latent confounders, causal order, redundant edges, coefficients.

The search starts from a complete undirected graph and alternates two sweeps
until nothing changes: a confounder sweep over triples (X_k, {X_i, X_j}) and
an order sweep over the remaining undirected edges.  Every sweep evaluates its
hypotheses against the state frozen at the start of the sweep and applies the
accepted ones in lexicographic order, so results do not depend on evaluation
order.  Identified components (latents and the noise of oriented sources) are
cancelled by surrogate residuals in later sweeps, which exposes components that
were hidden behind them.
"""
from __future__ import annotations

import time
from itertools import combinations

import numpy as np

from scipy.stats import normaltest

from .config import Config
from .cumulants import Dataset, center
from .errors import InputShapeError, SampleSizeError
from .graph import CausalGraph
from .independence import test_independence
from .mixing import LatentConfounder, MixingMatrix, ObservedNoise
from .olc import (ResidualContext, dependent_pair, determine_order, identify_confounder,
                  residual_pair_independent, residualize)
from .seeding import derive_seed

MIN_SAMPLES = 200


def _check_data(data: Dataset) -> Dataset:
    if data.n_vars < 3:
        raise InputShapeError(f"discovery needs at least 3 columns, got {data.n_vars}")
    if data.n_samples < MIN_SAMPLES:
        raise SampleSizeError(f"discovery needs N >= {MIN_SAMPLES}, got {data.n_samples}")
    sd = data.values.std(axis=0)
    flat = [lab for lab, s in zip(data.labels, sd) if not s > 0]
    if flat:
        raise InputShapeError(f"constant columns: {', '.join(flat)}")
    return center(data)


def raw_dependent(data: Dataset, cfg: Config, a: str, b: str) -> bool:
    """Kernel test on the raw columns rejects independence."""
    key = (a, b) if a <= b else (b, a)
    res = test_independence(data.column(key[0]), data.column(key[1]), alpha=cfg.test_alpha,
                            n_permutations=cfg.n_permutations,
                            seed=derive_seed(cfg.seed, "raw", *key),
                            max_samples=cfg.max_samples)
    return not res.independent


def prescreen(data: Dataset, cfg: Config) -> set:
    """Pairs that look dependent; the rest are non-adjacent from the start.

    A pair is dependent when its covariance or a fourth-order cross
    cumulant is significant, or when the kernel test rejects independence.
    Moment statistics of heavy-tailed data have large standard errors, so
    the rank-based kernel test catches dependence they miss.
    """
    dep = set()
    for a, b in combinations(data.labels, 2):
        if dependent_pair(data.column(a), data.column(b), cfg.screen_multiplier,
                          cfg.jackknife_groups) or raw_dependent(data, cfg, a, b):
            dep.add((a, b))
    return dep


def _dep(dependent: set, a: str, b: str) -> bool:
    return ((a, b) if a <= b else (b, a)) in dependent


def looks_gaussian(data: Dataset, level: float = 0.01) -> bool:
    """No column rejects normality (skewness and kurtosis test, Bonferroni over columns)."""
    pvals = normaltest(data.values, axis=0).pvalue
    return bool(np.all(pvals > level / data.n_vars))


# ---------------------------------------------------------------------------
# latent bookkeeping


class _State:
    def __init__(self, data: Dataset, cfg: Config, dependent: set):
        self.data = data
        self.cfg = cfg
        self.dependent = dependent
        self._hsic: dict = {}
        self.evaluations = {"confounder": 0, "order": 0}

    def raw_dependent(self, a: str, b: str) -> bool:
        key = (a, b) if a <= b else (b, a)
        if key not in self._hsic:
            self._hsic[key] = raw_dependent(self.data, self.cfg, *key)
        return self._hsic[key]


def _se(x) -> float:
    x = float(x)
    return x if np.isfinite(x) else np.inf


def _merge_target(graph: CausalGraph, ctx: ResidualContext, column: dict, column_se: dict,
                  state: _State):
    """Existing latent the new column belongs to, with the sign to apply, or (None, 1)."""
    best = None
    for lid in graph.latents:
        comp = LatentConfounder(lid)
        old = ctx.components[comp]
        common = sorted(set(old.loadings) & set(column))
        if not common:
            continue
        dot = sum(column[c] * old.loadings[c] for c in common)
        sign = -1.0 if dot < 0 else 1.0
        agree = all(abs(sign * column[c] - old.loadings[c])
                    <= 2.0 * np.hypot(_se(column_se.get(c)), _se(old.loading_se.get(c)))
                    for c in common)
        if not agree:
            continue
        new_only = sorted(set(column) - set(old.loadings))
        old_only = sorted(set(old.loadings) - set(column))
        if not all(state.raw_dependent(a, b) for a in new_only for b in old_only):
            continue
        rank = (-len(common), _latent_index(lid))
        if best is None or rank < best[0]:
            best = (rank, lid, sign)
    if best is None:
        return None, 1.0
    return best[1], best[2]


def _latent_index(lid: str) -> int:
    digits = lid.lstrip("L")
    return int(digits) if digits.isdigit() else 0


def _next_latent_id(graph: CausalGraph) -> str:
    used = {_latent_index(l) for l in graph.latents}
    k = 1
    while k in used:
        k += 1
    return f"L{k}"


# ---------------------------------------------------------------------------
# sweeps


def confounder_sweep(graph: CausalGraph, ctx: ResidualContext, data: Dataset, cfg: Config,
                     state: _State | None = None):
    """Test every triple (X_k, {X_i, X_j}) that could still remove an edge.

    Returns (graph, ctx, changed).  A triple is tested only when all three
    pairs are dependent, neither X_k - X_i nor X_k - X_j is directed, and at
    least one of them is still undirected.
    """
    state = state or _State(data, cfg, prescreen(data, cfg))
    frozen_graph, frozen_ctx = graph.copy(), ctx.copy()
    labels = sorted(data.labels)
    cache: dict = {}
    accepted = []
    for xi, xj in combinations(labels, 2):
        if not _dep(state.dependent, xi, xj):
            continue
        for xk in labels:
            if xk in (xi, xj):
                continue
            if not (_dep(state.dependent, xi, xk) and _dep(state.dependent, xj, xk)):
                continue
            if any(frozen_graph.has_directed(a, b) or frozen_graph.has_directed(b, a)
                   for a, b in ((xk, xi), (xk, xj))):
                continue
            if not (frozen_graph.has_undirected(xk, xi) or frozen_graph.has_undirected(xk, xj)):
                continue
            state.evaluations["confounder"] += 1
            res = identify_confounder(xi, xj, xk, frozen_ctx, data, cfg, frozen_graph, cache)
            if res.accepted:
                accepted.append(((xi, xj, xk), res))

    changed = False
    for (xi, xj, xk), res in accepted:
        column = res.estimated_column
        column_se = res.diagnostics.get("column_se", {})
        lid, sign = _merge_target(graph, ctx, column, column_se, state)
        if lid is None:
            lid, sign = _next_latent_id(graph), 1.0
            graph.add_latent(lid, {})
            changed = True
        comp = LatentConfounder(lid)
        known = ctx.components.get(comp)
        for child in sorted(column):
            if known is not None and child in known.loadings:
                continue
            ctx.set_loading(comp, child, sign * column[child], column_se.get(child, np.nan))
            graph.latent[(lid, child)] = None
            changed = True
        for other in (xi, xj):
            if graph.has_undirected(xk, other):
                graph.remove_adjacency(xk, other)
                changed = True
    graph.diagnostics.setdefault("confounder_acceptances", []).extend(
        [list(t) for t, _ in accepted])
    return graph, ctx, changed


def order_sweep(graph: CausalGraph, ctx: ResidualContext, data: Dataset, cfg: Config,
                state: _State | None = None):
    """Orient or drop each undirected edge using the order test in both directions.

    Returns (graph, ctx, changed).  An orientation that would close a cycle
    is skipped; an edge whose residualized endpoints are independent of each
    other is removed.
    """
    state = state or _State(data, cfg, prescreen(data, cfg))
    frozen_graph, frozen_ctx = graph.copy(), ctx.copy()
    cache: dict = {}
    decisions = []
    for a, b in sorted(frozen_graph.undirected):
        state.evaluations["order"] += 2
        res = determine_order(a, b, frozen_ctx, data, cfg, frozen_graph, cache)
        rev = res.diagnostics["reverse"]
        if res.accepted:
            decisions.append(("orient", a, b, res))
        elif rev.accepted:
            decisions.append(("orient", b, a, rev))
        elif residual_pair_independent(a, b, frozen_ctx, data, cfg, frozen_graph):
            decisions.append(("drop", a, b, None))

    changed = False
    weak = graph.diagnostics.setdefault("weakly_oriented", [])
    for kind, a, b, res in decisions:
        if kind == "drop":
            graph.remove_adjacency(a, b)
            changed = True
            continue
        if not graph.orient(a, b):
            continue
        changed = True
        if res.diagnostics.get("weakly_oriented"):
            weak.append([a, b])
        col = res.estimated_column
        se = res.diagnostics.get("column_se", {})
        comp = ObservedNoise(a)
        if ctx.loading(comp, a) == 0.0:
            ctx.set_loading(comp, a, col[a], se.get(a, np.nan))
        ctx.set_loading(comp, b, col[b], se.get(b, np.nan))
    return graph, ctx, changed


def eliminate_redundant(graph: CausalGraph, ctx: ResidualContext, data: Dataset,
                        cfg: Config) -> CausalGraph:
    """Drop X_i -> X_j when surrogates explain all of X_i's influence on X_j.

    Surrogates are the mediators (descendants of X_i that are ancestors of
    X_j) followed by non-descendants of X_i.  The first residual cancels the
    identified components of X_j and its surrogates except the noises of X_i
    and X_j; the second may also use X_i and cancel its noise.  The edge is
    removed only if both residuals are independent of X_i.
    """
    frozen = graph.copy()
    drop = []
    for xi, xj in sorted(frozen.directed):
        desc_i = frozen.descendants(xi)
        mediators = sorted(desc_i & frozen.ancestors(xj))
        exclude = ({xi, xj} | desc_i) - set(mediators)
        s_i, s_j = ObservedNoise(xi), ObservedNoise(xj)
        remove = [c for c in ctx.components_on(xj) if c not in (s_i, s_j)]
        x_i = data.column(xi)
        ok = True
        try:
            r1, _ = residualize(xj, data, ctx, remove, exclude, preferred=mediators,
                                rtol=cfg.rank_tol, keep={s_i, s_j})
            r2, _ = residualize(xj, data, ctx, remove + [s_i], exclude - {xi},
                                preferred=mediators + [xi], rtol=cfg.rank_tol, keep={s_j})
        except Exception:  # no usable surrogates: keep the edge
            continue
        for tag, r in (("first", r1), ("second", r2)):
            ind = test_independence(r, x_i, alpha=cfg.test_alpha,
                                    n_permutations=cfg.n_permutations,
                                    seed=derive_seed(cfg.seed, "redundant", tag, xi, xj),
                                    max_samples=cfg.max_samples)
            if not ind.independent:
                ok = False
                break
        if ok:
            drop.append((xi, xj))
    for xi, xj in drop:
        graph.remove_adjacency(xi, xj)
    graph.diagnostics["redundant_removed"] = [list(e) for e in drop]
    return graph


# ---------------------------------------------------------------------------
# mixing matrix and coefficients


def assemble_mixing(graph: CausalGraph, ctx: ResidualContext) -> MixingMatrix:
    """Latent columns in graph order, then one noise column per observed variable.

    A noise column with no identified loadings defaults to the unit vector on
    its owner and is marked as not estimated.
    """
    rows = list(graph.observed)
    cols = [LatentConfounder(l) for l in graph.latents] + [ObservedNoise(o) for o in rows]
    E = np.zeros((len(rows), len(cols)))
    mask = np.zeros_like(E, dtype=bool)
    for c, comp in enumerate(cols):
        ic = ctx.components.get(comp)
        if ic is not None:
            for lab, val in ic.loadings.items():
                r = rows.index(lab)
                E[r, c] = val
                mask[r, c] = True
        if isinstance(comp, ObservedNoise) and E[rows.index(comp.owner), c] == 0.0:
            E[rows.index(comp.owner), c] = 1.0
    return MixingMatrix(rows, cols, E, mask)


def _strip_coefficients(graph: CausalGraph, why: str) -> CausalGraph:
    graph.directed = {e: None for e in graph.directed}
    graph.latent = {e: None for e in graph.latent}
    graph.warnings.append(why)
    return graph


def recover_coefficients(mixing: MixingMatrix, graph: CausalGraph) -> CausalGraph:
    """Read B and Lambda off the mixing matrix for the resolved part of the graph.

    The noise block is (I - B)^{-1} up to column scale, so each noise column
    is divided by its owner's entry before inversion.  Coefficients are
    written only on directed edges whose endpoints carry no undirected edge,
    and Lambda = (I - B) A_L is written on the latent edges.
    """
    out = graph.copy()
    rows = list(mixing.rows)
    p = len(rows)
    N = np.zeros((p, p))
    for k, lab in enumerate(rows):
        comp = ObservedNoise(lab)
        if comp in mixing.columns:
            N[:, k] = mixing.entries[:, mixing.col(comp)]
        else:
            N[k, k] = 1.0
    diag = np.diag(N).copy()
    if np.any(diag == 0) or not np.all(np.isfinite(N)):
        return _strip_coefficients(out, "noise block has a zero diagonal; coefficients not recovered")
    N = N / diag
    try:
        inv = np.linalg.inv(N)
        if not np.all(np.isfinite(inv)) or np.linalg.cond(N) > 1e12:
            raise np.linalg.LinAlgError("ill conditioned")
    except np.linalg.LinAlgError:
        return _strip_coefficients(out, "noise block is singular; coefficients not recovered")
    B_full = np.eye(p) - inv
    unresolved = out.unresolved_variables()
    idx = {lab: k for k, lab in enumerate(rows)}
    B = np.zeros((p, p))
    for (a, b) in sorted(out.directed):
        if a in unresolved or b in unresolved:
            out.directed[(a, b)] = None
            continue
        coef = float(B_full[idx[b], idx[a]])
        out.directed[(a, b)] = coef
        B[idx[b], idx[a]] = coef
    lat_cols = mixing.latent_columns()
    if lat_cols:
        A_L = mixing.entries[:, [mixing.col(c) for c in lat_cols]]
        Lam = (np.eye(p) - B) @ A_L
        for k, comp in enumerate(lat_cols):
            for (lid, child) in list(out.latent):
                if lid == comp.id:
                    out.latent[(lid, child)] = float(Lam[idx[child], k])
    return out


# ---------------------------------------------------------------------------
# driver


def discover(data: Dataset, cfg: Config | None = None):
    """Run the full search; returns (CausalGraph, MixingMatrix)."""
    cfg = cfg or Config()
    data = _check_data(data)
    t0 = time.perf_counter()
    graph = CausalGraph.complete_undirected(data.labels)
    ctx = ResidualContext()
    dependent = prescreen(data, cfg)
    for a, b in sorted(graph.undirected):
        if not _dep(dependent, a, b):
            graph.remove_adjacency(a, b)
    gaussian = looks_gaussian(data)
    if gaussian:
        graph.warnings.append("no column departs from normality; higher-order cumulants "
                              "vanish, so no latent or orientation can be identified")
    state = _State(data, cfg, dependent)
    rounds = 0
    for _ in range(0 if gaussian else cfg.rounds_for(data.n_vars)):
        rounds += 1
        graph, ctx, c1 = confounder_sweep(graph, ctx, data, cfg, state)
        graph, ctx, c2 = order_sweep(graph, ctx, data, cfg, state)
        assert graph.is_dag()
        if not (c1 or c2):
            break
    t1 = time.perf_counter()
    graph = eliminate_redundant(graph, ctx, data, cfg)
    mixing = assemble_mixing(graph, ctx)
    graph = recover_coefficients(mixing, graph)
    t2 = time.perf_counter()
    graph.diagnostics.update(rounds=rounds, evaluations=dict(state.evaluations),
                             sweep_seconds=t1 - t0, total_seconds=t2 - t0)
    return graph, mixing
