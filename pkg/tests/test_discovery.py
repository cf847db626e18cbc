import numpy as np
import pytest

from cumlingam.config import Config
from cumlingam.cumulants import Dataset, center
from cumlingam.discovery import (assemble_mixing, discover, eliminate_redundant, prescreen,
                                 recover_coefficients)
from cumlingam.errors import InputShapeError, SampleSizeError
from cumlingam.evaluate import latent_match
from cumlingam.formats import graph_dumps
from cumlingam.graph import CausalGraph
from cumlingam.mixing import ObservedNoise
from cumlingam.olc import ResidualContext
from cumlingam.simulate import build_case, ground_truth_mixing, sample, truth_graph

from models import five_variable_example, truth_context

SEEDS = range(10)


def run(case, n, seed, **kw):
    spec = build_case(case, seed)
    g, m = discover(sample(spec, n, seed + 1000), Config(seed=seed, **kw))
    return spec, g, m


def known_context(spec, graph):
    """True loadings of every latent and of the noise of each edge source."""
    m = ground_truth_mixing(spec)
    ctx = truth_context(spec, spec.latents)
    for src in sorted({a for a, _ in graph.directed}):
        comp = ObservedNoise(src)
        for lab, v in zip(m.rows, m.entries[:, m.col(comp)]):
            if v:
                ctx.set_loading(comp, lab, v, 0.01)
    return ctx


# -- input handling ----------------------------------------------------------

def test_independent_columns_give_empty_graph():
    rng = np.random.default_rng(0)
    d = Dataset(rng.standard_normal((2000, 3)) ** 3, ("A", "B", "C"))
    g, m = discover(d)
    assert not g.directed and not g.undirected and not g.latents


def test_input_errors():
    rng = np.random.default_rng(1)
    with pytest.raises(InputShapeError):
        discover(Dataset(rng.standard_normal((500, 2)), ("a", "b")))
    with pytest.raises(SampleSizeError):
        discover(Dataset(rng.standard_normal((100, 3)), ("a", "b", "c")))
    x = rng.standard_normal((500, 3))
    x[:, 1] = 2.0
    with pytest.raises(InputShapeError):
        discover(Dataset(x, ("a", "b", "c")))


def test_gaussian_data_terminates_with_warning():
    rng = np.random.default_rng(2)
    L = rng.standard_normal(2000)
    X = np.column_stack([a * L + rng.standard_normal(2000) for a in (0.6, 0.7, 0.8)])
    g, _ = discover(Dataset(X, ("X1", "X2", "X3")))
    assert g.warnings and not g.latents and not g.directed
    assert g.diagnostics["rounds"] == 0


# -- search behaviour --------------------------------------------------------

def test_case1_recovers_single_latent():
    ok = 0
    for seed in SEEDS:
        _, g, _ = run(1, 2000, seed)
        ok += (len(g.latents) == 1 and g.latent_children(g.latents[0]) == ["X1", "X2", "X3"]
               and not g.directed and not g.undirected)
    assert ok >= 7


def test_case5_recovers_both_latents():
    ok = 0
    for seed in SEEDS:
        spec, g, _ = run(5, 2000, seed)
        ok += len(g.latents) == 2 and latent_match(g, truth_graph(spec), 1.0)["recovered"] == 2
    assert ok >= 7


def test_case4_chain_oriented():
    ok = 0
    for seed in SEEDS:
        _, g, _ = run(4, 2000, seed)
        ok += g.has_directed("X2", "X3") and g.has_directed("X3", "X4")
    assert ok >= 6


def test_case2_coefficient_recovered():
    errs = []
    for seed in SEEDS:
        spec, g, _ = run(2, 2000, seed)
        if g.directed.get(("X2", "X3")) is not None:
            errs.append(abs(g.directed[("X2", "X3")] - spec.B[2, 1]))
    assert len(errs) >= 6 and np.median(errs) < 0.1


def test_prescreen_rates():
    # two tests at roughly five percent each, so some independent pairs survive
    found = spurious = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        L, a, b, c, e = rng.standard_normal((5, 3000)) ** 3
        d = center(Dataset(np.column_stack([L + a, L + b, c, e]), ("X1", "X2", "X3", "X4")))
        dep = prescreen(d, Config(seed=seed))
        found += ("X1", "X2") in dep
        spurious += len(dep - {("X1", "X2")})
    assert found == 20
    assert spurious / (20 * 5) <= 0.15


# -- redundant edges ---------------------------------------------------------

def test_redundant_edge_removed_in_five_variable_example():
    removed = 0
    for seed in SEEDS:
        spec = five_variable_example(seed)
        d = center(sample(spec, 2000, seed + 77))
        g = truth_graph(spec)
        g.directed[("X1", "X3")] = None
        out = eliminate_redundant(g, known_context(spec, g), d, Config(seed=seed))
        removed += ("X1", "X3") not in out.directed
    assert removed >= 8


def test_true_edge_retained_in_case2():
    kept = 0
    for seed in SEEDS:
        spec = build_case(2, seed)
        d = center(sample(spec, 2000, seed + 77))
        g = truth_graph(spec)
        out = eliminate_redundant(g, known_context(spec, g), d, Config(seed=seed))
        kept += ("X2", "X3") in out.directed
    assert kept >= 8


def test_no_directed_edges_is_unchanged():
    spec = build_case(1, 0)
    g = truth_graph(spec)
    out = eliminate_redundant(g, ResidualContext(), center(sample(spec, 500, 1)), Config())
    assert out.to_dict() == g.to_dict()


# -- coefficients ------------------------------------------------------------

def test_recover_without_edges_returns_lambda():
    spec = build_case(5, 2)
    g = recover_coefficients(ground_truth_mixing(spec), truth_graph(spec))
    assert np.allclose(g.b_matrix(spec.observed), 0)
    for k, lid in enumerate(spec.latents):
        for child in g.latent_children(lid):
            assert g.latent[(lid, child)] == pytest.approx(spec.Lambda[spec.observed.index(child), k])


def test_recover_chain_removes_path_product():
    spec = build_case(4, 3)
    m = ground_truth_mixing(spec)
    b32, b43 = spec.B[2, 1], spec.B[3, 2]
    # the total effect X2 -> X4 is the path product
    assert m.entries[3, m.col(ObservedNoise("X2"))] == pytest.approx(b43 * b32)
    g = recover_coefficients(m, truth_graph(spec))
    assert np.allclose(g.b_matrix(spec.observed), spec.B, atol=1e-12)


def test_singular_noise_block_is_flagged():
    spec = build_case(2, 0)
    m = ground_truth_mixing(spec)
    m.entries[:, m.col(ObservedNoise("X3"))] = m.entries[:, m.col(ObservedNoise("X2"))]
    g = recover_coefficients(m, truth_graph(spec))
    assert g.warnings and all(v is None for v in g.directed.values())
    assert all(v is None for v in g.latent.values())


# -- invariants --------------------------------------------------------------

def test_discover_is_deterministic():
    spec = build_case(6, 1)
    d = sample(spec, 1000, 3)
    a, _ = discover(d, Config(seed=4))
    b, _ = discover(d, Config(seed=4))
    assert graph_dumps(a) == graph_dumps(b)


@pytest.mark.parametrize("case", [2, 4, 6, 10])
def test_output_is_a_dag_with_consistent_mixing(case):
    compared = 0
    for seed in range(3):
        spec, g, m = run(case, 1000, seed)
        assert g.is_dag()
        resolved = [v for v in g.observed if v not in g.unresolved_variables()]
        if any(c is None for c in g.directed.values()):
            continue
        M = np.linalg.inv(np.eye(len(g.observed)) - g.b_matrix(g.observed))
        for comp in m.latent_columns():
            Lam = np.array([g.latent.get((comp.id, v)) or 0.0 for v in g.observed])
            rebuilt = M @ Lam
            c = m.col(comp)
            for v in resolved:
                r = m.row(v)
                if m.estimated_mask[r, c]:
                    assert rebuilt[r] == pytest.approx(m.entries[r, c], abs=1e-6)
                    compared += 1
    assert compared > 0


def test_assemble_mixing_defaults_noise_to_unit():
    g = CausalGraph.complete_undirected(["X1", "X2", "X3"])
    m = assemble_mixing(g, ResidualContext())
    assert np.array_equal(m.entries, np.eye(3)) and not m.estimated_mask.any()


def test_case10_leaves_undirected_edges():
    hits = sum(bool(run(10, 2000, seed)[1].undirected) for seed in range(3))
    assert hits >= 2
