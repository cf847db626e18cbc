"""One-Latent-Component hypothesis tests.

A pair of observed sets (X_i, X_j) passes when the column of a single shared
component can be estimated in closed form, some omega annihilates that column
over X_j, and omega^T X_j is independent of X_i.  Two instantiations drive the
search: a latent confounder behind {X_k} and {X_i, X_j}, and the causal order
X_i -> X_j read as the noise of X_i being the only shared component of
{X_i} and {X_i, X_j} once identified components are removed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np
from scipy.stats import rankdata

from .config import Config
from .cumulants import Dataset, as_series, jackknife_se, pair_cumulants
from .errors import (DegenerateCumulantError, NoNullSpaceError, NonEstimableError,
                     SampleSizeError)
from .graph import CausalGraph
from .independence import IndependenceResult, test_independence, test_independence_best
from .mixing import (Component, LatentConfounder, ObservedNoise, WeightVector,
                     estimate_with_fallback, null_weight)
from .seeding import derive_seed


class Reason(str, Enum):
    ACCEPTED = "Accepted"
    CUMULANT_DEGENERATE = "CumulantDegenerate"
    DEPENDENT_RESIDUAL = "DependentResidual"
    NO_NULL_SPACE = "NoNullSpace"


@dataclass
class OLCHypothesis:
    """(X_i, X_j) with an optional residualized replacement for X_j members.

    The X_i block is always read raw from the data; its first member is the
    reference against which every X_j coefficient is estimated.
    """
    xi_set: list[str]
    xj_set: list[str]
    component_kind: Component
    residualized_inputs: Mapping[str, np.ndarray] | None = None

    def key(self) -> tuple:
        return (tuple(self.xi_set), tuple(self.xj_set), self.component_kind.key())


@dataclass
class HypothesisResult:
    accepted: bool
    reason: Reason
    omega: WeightVector | None = None
    estimated_column: dict | None = None
    independence: IndependenceResult | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def p_value(self) -> float:
        return self.independence.p_value if self.independence is not None else 0.0


# ---------------------------------------------------------------------------
# identified components and residualization


@dataclass
class IdentifiedComponent:
    component: Component
    loadings: dict = field(default_factory=dict)
    loading_se: dict = field(default_factory=dict)


class ResidualContext:
    """Components identified so far with their estimated loadings."""

    def __init__(self, components=None):
        self.components: dict = {}
        for ic in components or []:
            self.components[ic.component] = ic
        self._cache: dict = {}

    def copy(self) -> "ResidualContext":
        return ResidualContext(
            IdentifiedComponent(ic.component, dict(ic.loadings), dict(ic.loading_se))
            for ic in self.components.values())

    def ordered(self) -> list:
        return sorted(self.components, key=lambda c: c.key())

    def components_on(self, label: str) -> list:
        return [c for c in self.ordered() if self.components[c].loadings.get(label, 0.0) != 0.0]

    def loading(self, comp, label: str) -> float:
        ic = self.components.get(comp)
        return 0.0 if ic is None else float(ic.loadings.get(label, 0.0))

    def set_loading(self, comp, label: str, value: float, se: float = float("nan")) -> None:
        ic = self.components.setdefault(comp, IdentifiedComponent(comp))
        ic.loadings[label] = float(value)
        ic.loading_se[label] = float(se)
        self._cache.clear()

    def surrogate_assignment(self) -> dict:
        return {c: sorted(self.components[c].loadings) for c in self.ordered()}

    def matrix(self, rows, cols) -> np.ndarray:
        return np.array([[self.loading(c, r) for c in cols] for r in rows], dtype=np.float64)


def residualize(label: str, data: Dataset, ctx: ResidualContext, remove, exclude=(),
                preferred=(), rtol: float = 1e-8, keep=()):
    """Surrogate residual of ``label`` with the components ``remove`` cancelled.

    Surrogates are drawn greedily from variables outside ``exclude``: first
    ``preferred`` in the given order, then the others ordered by how few
    identified components they carry.  Every identified component loading on
    a chosen surrogate joins the cancelled set, except those in ``keep``,
    which are left in the residual.  Returns (series, info) where
    info lists the surrogates and the weights; raises NoNullSpaceError when no
    anchored solution exists.
    """
    keep = set(keep)
    cols = [c for c in remove if ctx.loading(c, label) != 0.0 and c not in keep]
    base = as_series(data.column(label))
    if not cols:
        return base, {"surrogates": (), "omega": None, "columns": ()}
    key = (label, tuple(c.key() for c in cols), tuple(sorted(exclude)), tuple(preferred),
           tuple(sorted(c.key() for c in keep)))
    if key in ctx._cache:
        return ctx._cache[key]
    excluded = set(exclude) | {label}
    pool = [v for v in preferred if v not in excluded]
    rest = sorted((v for v in data.labels if v not in excluded and v not in pool),
                  key=lambda v: (len(ctx.components_on(v)), v))
    candidates = pool + rest
    rows = [label]
    omega = None
    while True:
        M = ctx.matrix(rows, cols)
        try:
            w = null_weight(M, anchor="0", rtol=rtol)
            if w.normalization_anchor is not None:
                omega = w.entries
                break
        except NoNullSpaceError:
            pass
        nxt = None
        for v in candidates:
            if v not in rows and any(ctx.loading(c, v) != 0.0 for c in cols):
                nxt = v
                break
        if nxt is None:
            raise NoNullSpaceError(f"no surrogates can cancel {[c.key() for c in cols]} "
                                   f"from {label}")
        rows.append(nxt)
        for c in ctx.components_on(nxt):
            if c not in cols and c not in keep:
                cols.append(c)
    out = base.copy()
    for wgt, v in zip(omega[1:], rows[1:]):
        out += wgt * as_series(data.column(v))
    result = (out, {"surrogates": tuple(rows[1:]), "omega": omega,
                    "columns": tuple(c.key() for c in cols)})
    ctx._cache[key] = result
    return result


# ---------------------------------------------------------------------------
# the condition itself


def _estimate(ref_label, ref, v_label, v, cfg: Config, cache):
    key = (ref_label, v_label)
    if cache is not None and key in cache:
        return cache[key]
    pc = estimate_with_fallback(ref, v, cfg.degeneracy_multiplier, cfg.jackknife_groups)
    if cache is not None:
        cache[key] = pc
    return pc


def check_olc(hyp: OLCHypothesis, data: Dataset, cfg: Config, seed: int | None = None,
              cache: dict | None = None, input_keys: Mapping | None = None) -> HypothesisResult:
    """Estimate the shared column, annihilate it over X_j and test independence.

    ``cache`` memoizes pair estimates across hypotheses; ``input_keys`` names
    each residualized input so that cached estimates are only reused for the
    same series.
    """
    resid = dict(hyp.residualized_inputs or {})
    input_keys = dict(input_keys or {})
    ref_label = hyp.xi_set[0]
    ref = as_series(data.column(ref_label))
    xj_series = [resid[v] if v in resid else as_series(data.column(v)) for v in hyp.xj_set]
    xj_keys = [input_keys.get(v, ("raw", v) if v not in resid else None) for v in hyp.xj_set]
    diag: dict = {"reference": ref_label}

    # one reference loading for the whole column: every pair gives an
    # estimate of it, and the X_j loadings follow from covariances with the
    # reference, so the column carries a single latent normalization
    ref_alphas, ref_ses, orders, errors = [], [], [], []
    for v, s, k in zip(hyp.xj_set, xj_series, xj_keys):
        try:
            pc = _estimate(("raw", ref_label), ref, k, s, cfg, cache if k is not None else None)
        except (DegenerateCumulantError, NonEstimableError, SampleSizeError) as exc:
            errors.append(f"{v}: {exc}")
            continue
        ref_alphas.append(pc.alpha_i)
        ref_ses.append(pc.diagnostics.get("alpha_i_se", float("nan")))
        orders.append((v, pc.order_used))
    diag.update(orders=orders, estimation_errors=errors)
    if not ref_alphas:
        diag["error"] = "; ".join(errors)
        return HypothesisResult(False, Reason.CUMULANT_DEGENERATE, diagnostics=diag)
    a_ref = float(np.median(ref_alphas))
    a_ref_se = float(np.median(ref_ses))

    # direction of the column from a bounded instrument: under the
    # hypothesis E[f(ref) v] is proportional to the loading of v for any f,
    # and centred ranks avoid the fourth-moment variance of plain covariances
    f = rank_instrument(ref)
    g = np.array([float(np.mean(f * s)) for s in xj_series])
    cov = pair_cumulants_many(ref, xj_series, cfg.jackknife_groups)
    c11 = np.array([c for c, _ in cov])
    # overall scale from the closed-form reference loading, alpha_v = C11 / alpha_ref
    denom = float(g @ g)
    scale = float(c11 @ g) / (a_ref * denom) if denom > 0 else 0.0
    alphas = g * scale
    column = {ref_label: a_ref}
    column_se = {ref_label: a_ref_se}
    for extra in hyp.xi_set[1:]:
        c = pair_cumulants(data.column(extra), xj_series[0], [(1, 1)], with_se=False)[(1, 1)]
        column[extra] = float(c / alphas[0]) if alphas[0] else float("nan")
        column_se[extra] = float("nan")
    for v, a, (c, se11) in zip(hyp.xj_set, alphas, cov):
        column[v] = float(a)
        column_se[v] = float(abs(a) * np.hypot(se11 / abs(c) if c else np.inf,
                                               a_ref_se / a_ref))
    diag.update(column_se=column_se, reference_alpha=a_ref)

    try:
        omega = null_weight(np.array(alphas).reshape(-1, 1), anchor="0", rtol=cfg.rank_tol)
    except NoNullSpaceError as exc:
        diag["error"] = str(exc)
        return HypothesisResult(False, Reason.NO_NULL_SPACE, estimated_column=column,
                                diagnostics=diag)
    omega = WeightVector(tuple(hyp.xj_set), omega.entries,
                         hyp.xj_set[0] if omega.normalization_anchor is not None else None)
    residual = np.zeros_like(ref)
    for w, s in zip(omega.entries, xj_series):
        residual += w * s
    candidates, shifts = [residual], [0.0]
    if len(xj_series) == 2 and cfg.omega_band > 0 and omega.normalization_anchor is not None:
        # the condition asks for some omega annihilating the column; scan the
        # jackknife band of the estimated loading ratio around the estimate.
        # A latent acceptance removes edges, so there the minimum over the
        # band is calibrated as a minimum.  Order tests always compare both
        # directions, which share the same selection effect, so the chosen
        # candidate is calibrated on its own.
        ratio, ratio_se = _ratio_band(f, xj_series[0], xj_series[1], cfg.jackknife_groups)
        diag.update(loading_ratio=ratio, loading_ratio_se=ratio_se)
        if np.isfinite(ratio_se) and ratio_se > 0:
            for z in np.linspace(-cfg.omega_band, cfg.omega_band, cfg.omega_grid):
                if z == 0:
                    continue
                t = ratio + z * ratio_se
                candidates.append(xj_series[0] - t * xj_series[1])
                shifts.append(float(z))

    block = np.column_stack([as_series(data.column(v)) for v in hyp.xi_set])
    if seed is None:
        seed = derive_seed(cfg.seed, "olc", *hyp.key())
    best, ind = test_independence_best(candidates, block, alpha=cfg.test_alpha,
                                       n_permutations=cfg.n_permutations, seed=seed,
                                       max_samples=cfg.max_samples, copula=cfg.copula,
                                       calibrate_min=not isinstance(hyp.component_kind,
                                                                    ObservedNoise))
    if best:
        t = diag["loading_ratio"] + shifts[best] * diag["loading_ratio_se"]
        omega = WeightVector(tuple(hyp.xj_set), np.array([1.0, -t]), hyp.xj_set[0])
    diag["omega_shift"] = shifts[best]
    reason = Reason.ACCEPTED if ind.independent else Reason.DEPENDENT_RESIDUAL
    return HypothesisResult(ind.independent, reason, omega, column, ind, diag)


# ---------------------------------------------------------------------------
# instantiations


def _descendants(graph: CausalGraph | None, labels) -> set:
    out = set()
    if graph is not None:
        for v in labels:
            out |= graph.descendants(v)
    return out


def identify_confounder(xi: str, xj: str, xk: str, ctx: ResidualContext, data: Dataset,
                        cfg: Config, graph: CausalGraph | None = None,
                        cache: dict | None = None) -> HypothesisResult:
    """Test (X_k, {X~_i, X~_j}) for a latent confounder behind all three.

    X_i and X_j are residualized on the identified components that load on
    X_k, using surrogates outside {X_i, X_j, X_k} and their descendants.
    """
    names = (xi, xj, xk)
    exclude = set(names) | _descendants(graph, names)
    remove = ctx.components_on(xk)
    resid, keys, info = {}, {}, {}
    try:
        for v in (xi, xj):
            s, inf = residualize(v, data, ctx, remove, exclude, rtol=cfg.rank_tol)
            if inf["surrogates"]:
                resid[v] = s
                keys[v] = ("resid", v, inf["columns"], inf["surrogates"])
            info[v] = inf["surrogates"]
    except NoNullSpaceError as exc:
        return HypothesisResult(False, Reason.NO_NULL_SPACE, diagnostics={"error": str(exc)})
    hyp = OLCHypothesis([xk], [xi, xj], LatentConfounder("?"), resid)
    res = check_olc(hyp, data, cfg, derive_seed(cfg.seed, "confounder", xk, xi, xj),
                    cache, keys)
    res.diagnostics["surrogates"] = info
    return res


def _order_inputs(xi: str, xj: str, ctx: ResidualContext, data: Dataset, cfg: Config,
                  graph: CausalGraph | None):
    skip = {ObservedNoise(xi), ObservedNoise(xj)}
    remove = [c for c in ctx.components_on(xi) if c not in skip]
    exclude = {xi, xj} | _descendants(graph, (xi, xj))
    resid, keys, info = {}, {}, {}
    for v in (xi, xj):
        s, inf = residualize(v, data, ctx, remove, exclude, rtol=cfg.rank_tol, keep=skip)
        resid[v] = s
        keys[v] = ("resid", v, inf["columns"], inf["surrogates"]) if inf["surrogates"] else ("raw", v)
        info[v] = inf["surrogates"]
    return resid, keys, info


def test_order(xi: str, xj: str, ctx: ResidualContext, data: Dataset, cfg: Config,
               graph: CausalGraph | None = None, cache: dict | None = None) -> HypothesisResult:
    """One direction only: (X_i, {X~_i, X~_j}) with the noise of X_i as the shared component."""
    try:
        resid, keys, info = _order_inputs(xi, xj, ctx, data, cfg, graph)
    except NoNullSpaceError as exc:
        return HypothesisResult(False, Reason.NO_NULL_SPACE, diagnostics={"error": str(exc)})
    hyp = OLCHypothesis([xi], [xi, xj], ObservedNoise(xi), resid)
    res = check_olc(hyp, data, cfg, derive_seed(cfg.seed, "order", xi, xj), cache, keys)
    res.diagnostics["surrogates"] = info
    res.diagnostics["residuals"] = resid
    return res


test_order.__test__ = False


def residual_pair_independent(xi: str, xj: str, ctx: ResidualContext, data: Dataset,
                              cfg: Config, graph: CausalGraph | None = None) -> bool:
    """True when each residualized variable is independent of the other raw variable.

    Both variables are cleaned of the identified components on either of
    them; what remains of X_j must not depend on X_i and vice versa.
    """
    skip = {ObservedNoise(xi), ObservedNoise(xj)}
    remove = [c for c in ctx.ordered()
              if c not in skip and (ctx.loading(c, xi) or ctx.loading(c, xj))]
    exclude = {xi, xj} | _descendants(graph, (xi, xj))
    try:
        for a, b in ((xi, xj), (xj, xi)):
            s, _ = residualize(b, data, ctx, remove, exclude, rtol=cfg.rank_tol, keep=skip)
            ind = test_independence(s, data.column(a), alpha=cfg.test_alpha,
                                    n_permutations=cfg.n_permutations,
                                    seed=derive_seed(cfg.seed, "pair", a, b),
                                    max_samples=cfg.max_samples)
            if not ind.independent:
                return False
    except NoNullSpaceError:
        return False
    return True


def determine_order(xi: str, xj: str, ctx: ResidualContext, data: Dataset, cfg: Config,
                    graph: CausalGraph | None = None, cache: dict | None = None) -> HypothesisResult:
    """Accepted iff X_i is causally earlier than X_j.

    Both directions are tested.  When both pass, the direction with the larger
    independence p-value wins (ties go to the lexicographically smaller
    source) and the result is marked weakly oriented.
    """
    fwd = test_order(xi, xj, ctx, data, cfg, graph, cache)
    bwd = test_order(xj, xi, ctx, data, cfg, graph, cache)
    fwd.diagnostics.pop("residuals", None)
    bwd.diagnostics.pop("residuals", None)
    fwd.diagnostics["reverse"] = bwd
    if fwd.accepted and bwd.accepted:
        win_fwd = (fwd.p_value, xj) > (bwd.p_value, xi)
        fwd.diagnostics["weakly_oriented"] = True
        if not win_fwd:
            fwd.accepted = False
            fwd.reason = Reason.DEPENDENT_RESIDUAL
            fwd.diagnostics["lost_tie_break"] = True
    return fwd


def _ratio_band(f, s0, s1, n_groups: int):
    """E[f s0] / E[f s1] with its grouped jackknife standard error."""
    p0, p1 = f * s0, f * s1
    ratio = float(p0.sum() / p1.sum()) if p1.sum() != 0 else float("nan")
    groups = np.array_split(np.arange(len(f)), max(2, n_groups))
    t0, t1 = p0.sum(), p1.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        reps = np.array([(t0 - p0[g].sum()) / (t1 - p1[g].sum()) for g in groups])
    return ratio, jackknife_se(reps)


def rank_instrument(x: np.ndarray) -> np.ndarray:
    """Centred ranks scaled to [-1/2, 1/2]."""
    r = rankdata(x)
    return r / len(x) - (len(x) + 1) / (2 * len(x))


def pair_cumulants_many(ref, series, n_groups: int = 20) -> list:
    """(covariance, jackknife SE) of ``ref`` with each series."""
    return [pair_cumulants(ref, s, [(1, 1)], with_se=True, n_groups=n_groups)[(1, 1)]
            for s in series]


def dependent_pair(x, y, multiplier: float = 3.0, n_groups: int = 20) -> bool:
    """Cheap dependence screen: covariance or a fourth-order cross cumulant is significant."""
    cums = pair_cumulants(x, y, [(1, 1), (1, 3), (2, 2), (3, 1)], with_se=True,
                          n_groups=n_groups)
    return any(abs(v) > multiplier * se for v, se in cums.values())
