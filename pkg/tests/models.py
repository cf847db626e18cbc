"""Small hand-built models shared by the hypothesis and search tests."""
import numpy as np

from cumlingam.mixing import LatentConfounder
from cumlingam.olc import ResidualContext
from cumlingam.simulate import ModelSpec, ground_truth_mixing


def two_latent_star(seed):
    """X1, X4 pure children of L1; X2, X3 children of both L1 and L2."""
    rng = np.random.default_rng(seed)
    u = lambda: rng.uniform(0.5, 0.8)
    Lam = np.array([[u(), 0], [u(), u()], [u(), u()], [u(), 0]])
    return ModelSpec(["X1", "X2", "X3", "X4"], ["L1", "L2"], np.zeros((4, 4)), Lam)


def five_variable_example(seed):
    """L1 -> X1..X5, L2 -> {X1, X2, X3, X5}, X1 -> X2 -> X3."""
    rng = np.random.default_rng(seed)
    u = lambda: rng.uniform(0.2, 0.8)
    Lam = np.array([[u(), u()], [u(), u()], [u(), u()], [u(), 0], [u(), u()]])
    B = np.zeros((5, 5))
    B[1, 0] = u()
    B[2, 1] = u()
    return ModelSpec([f"X{k}" for k in range(1, 6)], ["L1", "L2"], B, Lam)


def truth_context(spec, latents):
    """ResidualContext holding the true loadings of the named latents."""
    m = ground_truth_mixing(spec)
    ctx = ResidualContext()
    for lid in latents:
        comp = LatentConfounder(lid)
        for lab, v in zip(m.rows, m.entries[:, m.col(comp)]):
            if v:
                ctx.set_loading(comp, lab, v, 0.01)
    return ctx


def population_confounder(A, i, j, k):
    """Whether (X_k, {X_i, X_j}) holds for the mixing matrix A.

    X_k must share exactly one component with {X_i, X_j}, and that component
    must load on both X_i and X_j.
    """
    shared = [c for c in range(A.shape[1]) if A[k, c] and (A[i, c] or A[j, c])]
    return len(shared) == 1 and A[i, shared[0]] != 0 and A[j, shared[0]] != 0


def population_dependent(A, a, b):
    return bool(np.any(A[a] * A[b]))
