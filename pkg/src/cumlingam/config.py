"""Run configuration shared by the hypothesis tests and the search."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class Config:
    alpha: float = 0.05
    n_permutations: int = 199
    # cumulants must exceed this many jackknife standard errors to be used
    degeneracy_multiplier: float = 1.0
    # a pair counts as dependent when its covariance or a fourth-order cross
    # cumulant exceeds this many jackknife standard errors
    screen_multiplier: float = 3.0
    seed: int = 0
    # None means "number of observed variables"
    max_rounds: int | None = None
    # divide alpha by this number when set
    bonferroni: int | None = None
    rank_tol: float = 1e-8
    max_samples: int = 2000
    jackknife_groups: int = 20
    # half-width, in jackknife standard errors, of the loading-ratio band
    # scanned for an annihilating weight; 0 tests the point estimate only
    omega_band: float = 2.0
    omega_grid: int = 9
    # rank-transform margins inside the kernel test
    copula: bool = True

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if self.n_permutations < 99:
            raise ValueError("n_permutations must be >= 99")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.bonferroni is not None and self.bonferroni < 1:
            raise ValueError("bonferroni divisor must be >= 1")
        if self.omega_band < 0 or self.omega_grid < 1:
            raise ValueError("omega_band must be >= 0 and omega_grid >= 1")
        if self.degeneracy_multiplier < 0 or self.screen_multiplier < 0:
            raise ValueError("degeneracy_multiplier and screen_multiplier must be >= 0")

    @property
    def test_alpha(self) -> float:
        return self.alpha / self.bonferroni if self.bonferroni else self.alpha

    def rounds_for(self, p: int) -> int:
        return self.max_rounds if self.max_rounds is not None else p

    def as_dict(self) -> dict:
        return asdict(self)

    def updated(self, **kw) -> "Config":
        return replace(self, **kw)

    @classmethod
    def field_types(cls) -> dict:
        return {f.name: f.type for f in fields(cls)}
