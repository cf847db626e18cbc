# What the output looks like when the model assumptions break.
#
# Case 1 satisfies every assumption and comes back fully resolved.  Case 10
# leaves one latent with only two children and no pure child, so some pairs
# cannot be explained by any accepted hypothesis.  Those pairs stay
# undirected, which is the signal that the data violate an assumption.  The
# signal is statistical: on some draws spurious latents absorb the leftover
# dependence instead, so the seed below is one where the signal shows.

from cumlingam import Config, build_case, discover, sample
from cumlingam.simulate import check_pure_children, check_three_children

for case, seed in ((1, 0), (10, 6)):
    spec = build_case(case, seed=seed)
    print(f"case {case}: pure children {check_pure_children(spec)}, "
          f"three children {check_three_children(spec)}")
    graph, _ = discover(sample(spec, 2000, seed=1000 + seed), Config(seed=seed))
    print("  latents:", {lid: graph.latent_children(lid) for lid in graph.latents})
    print("  directed:", sorted(graph.directed))
    print("  undirected:", sorted(graph.undirected))
    print("  seconds:", round(graph.diagnostics["total_seconds"], 1))
