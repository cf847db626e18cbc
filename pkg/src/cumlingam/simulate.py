"""Ground-truth canonical models, benchmark cases and sampling.

X = B X + Lambda L + S_X with independent non-Gaussian L and S_X, hence
X = (I - B)^{-1} (Lambda L + S_X) and the mixing matrix
A = [(I - B)^{-1} Lambda | (I - B)^{-1}].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cumulants import Dataset
from .errors import ConstraintError, InputShapeError
from .graph import CausalGraph
from .mixing import LatentConfounder, MixingMatrix, ObservedNoise

NOISE_KINDS = ("cubed_gaussian", "uniform", "gaussian")
COEF_RANGE = (0.2, 0.8)
N_CASES = 10


@dataclass
class ModelSpec:
    observed: list[str]
    latents: list[str]
    B: np.ndarray          # B[child, parent]
    Lambda: np.ndarray     # Lambda[child, latent]
    noise_kind: str = "cubed_gaussian"
    standardize_noise: bool = True
    # per-observed noise standard deviation (applied after standardization)
    noise_scale: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=np.float64).reshape(len(self.observed), len(self.observed))
        self.Lambda = np.asarray(self.Lambda, dtype=np.float64).reshape(
            len(self.observed), len(self.latents))
        if self.noise_scale is None:
            self.noise_scale = np.ones(len(self.observed))
        self.noise_scale = np.asarray(self.noise_scale, dtype=np.float64)
        self.validate()

    @property
    def p(self) -> int:
        return len(self.observed)

    def validate(self) -> None:
        if self.noise_kind not in NOISE_KINDS:
            raise InputShapeError(f"unknown noise kind {self.noise_kind!r}")
        if np.any(np.diag(self.B) != 0):
            raise ConstraintError("B has a self loop")
        if causal_order(self.B) is None:
            raise ConstraintError("B is not acyclic")
        if self.latents and np.linalg.matrix_rank(self.Lambda) < len(self.latents):
            raise ConstraintError("Lambda must have full column rank")
        if self.noise_scale.shape != (self.p,) or np.any(self.noise_scale < 0):
            raise InputShapeError("noise_scale must be p nonnegative values")

    def graph(self) -> CausalGraph:
        return truth_graph(self)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "observed": list(self.observed),
            "latents": list(self.latents),
            "B": self.B.tolist(),
            "Lambda": self.Lambda.tolist(),
            "noise_kind": self.noise_kind,
            "standardize_noise": self.standardize_noise,
            "noise_scale": self.noise_scale.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        try:
            return cls(observed=list(d["observed"]), latents=list(d["latents"]),
                       B=np.array(d["B"], dtype=float), Lambda=np.array(d["Lambda"], dtype=float),
                       noise_kind=d.get("noise_kind", "cubed_gaussian"),
                       standardize_noise=bool(d.get("standardize_noise", True)),
                       noise_scale=d.get("noise_scale"), name=d.get("name", ""))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputShapeError(f"malformed model document: {exc}") from exc


def causal_order(B: np.ndarray):
    """Topological order of the DAG encoded by B[child, parent], or None if cyclic."""
    p = B.shape[0]
    remaining = set(range(p))
    order = []
    while remaining:
        roots = sorted(v for v in remaining if not any(B[v, u] != 0 for u in remaining))
        if not roots:
            return None
        order.extend(roots)
        remaining -= set(roots)
    return order


# ---------------------------------------------------------------------------
# benchmark cases

def _case_structure(case_id: int):
    """(p, latent children, observed edges) for the ten benchmark cases."""
    if case_id == 1:
        return 3, {"L1": [1, 2, 3]}, []
    if case_id == 2:
        return 3, {"L1": [1, 2, 3]}, [(2, 3)]
    if case_id == 3:
        return 4, {"L1": [1, 2, 3, 4]}, [(1, 2), (3, 4)]
    if case_id == 4:
        return 4, {"L1": [1, 2, 3, 4]}, [(2, 3), (3, 4)]
    if case_id == 5:
        return 4, {"L1": [1, 2, 3], "L2": [2, 3, 4]}, []
    if case_id == 6:
        return 4, {"L1": [1, 2, 3, 4], "L2": [2, 3, 4]}, [(2, 3)]
    lat = {"L1": [1, 2, 3, 4, 5, 6], "L2": [4, 5, 6]}
    edges = [(2, 3), (2, 4), (3, 4), (3, 5), (4, 5)]
    if case_id == 7:
        return 6, lat, edges
    # the violation cases are cumulative edits of case 7
    lat = {"L1": [1, 2, 3, 4, 5, 6], "L2": [5, 6]}
    if case_id == 8:
        return 6, lat, edges
    edges = [e for e in edges if e != (3, 5)] + [(5, 6)]
    if case_id == 9:
        return 6, lat, edges
    if case_id == 10:
        return 6, lat, [e for e in edges if e != (2, 4)] + [(1, 2)]
    raise InputShapeError(f"case id must be in 1..{N_CASES}, got {case_id}")


def build_case(case_id: int, seed: int = 0, noise_kind: str = "cubed_gaussian") -> ModelSpec:
    """Benchmark structure with coefficients drawn from U[0.2, 0.8]."""
    if not isinstance(case_id, (int, np.integer)) or not 1 <= case_id <= N_CASES:
        raise InputShapeError(f"case id must be in 1..{N_CASES}, got {case_id}")
    p, lat, edges = _case_structure(int(case_id))
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(case_id)]))
    labels = [f"X{k}" for k in range(1, p + 1)]
    latents = sorted(lat)
    B = np.zeros((p, p))
    for a, b in edges:
        B[b - 1, a - 1] = rng.uniform(*COEF_RANGE)
    Lam = np.zeros((p, len(latents)))
    for c, lid in enumerate(latents):
        for child in lat[lid]:
            Lam[child - 1, c] = rng.uniform(*COEF_RANGE)
    return ModelSpec(labels, latents, B, Lam, noise_kind=noise_kind, name=f"case{case_id}")


def random_model(p: int, n_latents: int, edge_density: float, seed=0,
                 noise_kind: str = "cubed_gaussian") -> ModelSpec:
    """Random one-or-more-latent model satisfying the pure-child and three-children rules.

    Every latent owns one dedicated child with no observed edges (its pure
    set) and at least two further children from a shared pool.  Observed edges
    are drawn among pool variables only, each candidate pair with probability
    ``edge_density`` under a random causal order.
    """
    if p < 3 or n_latents < 1:
        raise ConstraintError("need p >= 3 and at least one latent")
    if not 0 <= edge_density <= 1:
        raise ConstraintError("edge_density must be in [0, 1]")
    if p < n_latents + 2:
        raise ConstraintError(
            f"p={p} cannot give {n_latents} latents a pure child and three children each")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), p, n_latents]))
    labels = [f"X{k}" for k in range(1, p + 1)]
    latents = [f"L{k}" for k in range(1, n_latents + 1)]
    perm = rng.permutation(p)
    pure, pool = perm[:n_latents], np.sort(perm[n_latents:])
    Lam = np.zeros((p, n_latents))
    for c in range(n_latents):
        Lam[pure[c], c] = rng.uniform(*COEF_RANGE)
        take = rng.random(len(pool)) < 0.5
        while take.sum() < 2:
            take[rng.integers(len(pool))] = True
        for v in pool[take]:
            Lam[v, c] = rng.uniform(*COEF_RANGE)
    B = np.zeros((p, p))
    order = rng.permutation(pool)
    for a in range(len(order)):
        for b in range(a + 1, len(order)):
            if rng.random() < edge_density:
                B[order[b], order[a]] = rng.uniform(*COEF_RANGE)
    spec = ModelSpec(labels, latents, B, Lam, noise_kind=noise_kind,
                     name=f"random_p{p}_l{n_latents}_d{edge_density}_s{seed}")
    return spec


# ---------------------------------------------------------------------------
# sampling

def draw_noise(kind: str, size, rng: np.random.Generator, standardize: bool = True) -> np.ndarray:
    if kind == "cubed_gaussian":
        z = rng.standard_normal(size) ** 3
        return z / np.sqrt(15.0) if standardize else z
    if kind == "uniform":
        u = rng.uniform(-1.0, 1.0, size)
        return u * np.sqrt(3.0) if standardize else u
    if kind == "gaussian":
        return rng.standard_normal(size)
    raise InputShapeError(f"unknown noise kind {kind!r}")


def sample(spec: ModelSpec, n: int, seed=0, return_latents: bool = False):
    """Draw n samples; latents always have unit variance."""
    if n < 1:
        raise InputShapeError("n must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5A]))
    m = len(spec.latents)
    L = draw_noise(spec.noise_kind, (n, m), rng, standardize=True)
    S = draw_noise(spec.noise_kind, (n, spec.p), rng, standardize=spec.standardize_noise)
    S = S * spec.noise_scale
    M = np.linalg.inv(np.eye(spec.p) - spec.B)
    X = (L @ spec.Lambda.T + S) @ M.T
    data = Dataset(X, tuple(spec.observed))
    if return_latents:
        return data, L, S
    return data


def ground_truth_mixing(spec: ModelSpec) -> MixingMatrix:
    """[(I - B)^{-1} Lambda | (I - B)^{-1}] with noise columns scaled to unit-variance sources."""
    M = np.linalg.inv(np.eye(spec.p) - spec.B)
    sd = spec.noise_scale * (1.0 if spec.standardize_noise or spec.noise_kind == "gaussian"
                             else _raw_sd(spec.noise_kind))
    entries = np.hstack([M @ spec.Lambda, M * sd])
    cols = [LatentConfounder(l) for l in spec.latents] + [ObservedNoise(o) for o in spec.observed]
    return MixingMatrix(spec.observed, cols, entries)


def _raw_sd(kind: str) -> float:
    return {"cubed_gaussian": np.sqrt(15.0), "uniform": 1 / np.sqrt(3.0)}[kind]


def truth_graph(spec: ModelSpec) -> CausalGraph:
    g = CausalGraph(observed=list(spec.observed), latents=list(spec.latents))
    for c in range(spec.p):
        for a in range(spec.p):
            if spec.B[c, a] != 0:
                g.directed[(spec.observed[a], spec.observed[c])] = float(spec.B[c, a])
    for k, lid in enumerate(spec.latents):
        for c in range(spec.p):
            if spec.Lambda[c, k] != 0:
                g.latent[(lid, spec.observed[c])] = float(spec.Lambda[c, k])
    return g


# ---------------------------------------------------------------------------
# assumption validators

def _observed_neighbors(spec: ModelSpec, v: int) -> set[int]:
    return {u for u in range(spec.p) if u != v and (spec.B[v, u] != 0 or spec.B[u, v] != 0)}


def pure_set(spec: ModelSpec, k: int) -> set[int]:
    """Largest subset of latent k's children with no observed edges leaving it."""
    members = set(np.flatnonzero(spec.Lambda[:, k]).tolist())
    changed = True
    while changed:
        changed = False
        for v in sorted(members):
            if _observed_neighbors(spec, v) - members:
                members.discard(v)
                changed = True
    return members


def check_pure_children(spec: ModelSpec) -> bool:
    """Every latent has a nonempty pure set of children."""
    return all(pure_set(spec, k) for k in range(len(spec.latents)))


def check_three_children(spec: ModelSpec) -> bool:
    """Every latent has at least three observed children."""
    return all(np.count_nonzero(spec.Lambda[:, k]) >= 3 for k in range(len(spec.latents)))
