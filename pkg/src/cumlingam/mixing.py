"""Closed-form mixing coefficients, null-space weights and surrogate residuals.

For two variables that share exactly one unit-variance component S,

    C_{a,b}(X_i, X_j) = alpha_i^a alpha_j^b kappa_{a+b}(S),

so the ratio C_{n+1,m} / C_{n,m+1} equals alpha_i / alpha_j and multiplying
by the covariance C_{1,1} = alpha_i alpha_j leaves alpha_i^2.  Here the first
subscript always counts copies of X_i.  With (n, m) = (1, 2) this is the
fourth-order estimator cum(i,i,j,j) / cum(i,j,j,j) * cum(i,j).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .cumulants import as_series, jackknife_se, pair_cumulants
from .errors import (DegenerateCumulantError, InputShapeError, NoNullSpaceError,
                     NonEstimableError, SampleSizeError, UnsupportedOrderError)

# total order 4 first, then 5, then 6
ORDER_SCAN = ((1, 2), (2, 1), (1, 3), (3, 1), (2, 2), (1, 4), (4, 1), (2, 3), (3, 2))
MIN_PAIR_SAMPLES = 100


@dataclass(frozen=True, order=True)
class LatentConfounder:
    id: str

    def key(self) -> str:
        return f"latent:{self.id}"


@dataclass(frozen=True, order=True)
class ObservedNoise:
    owner: str

    def key(self) -> str:
        return f"noise:{self.owner}"


Component = Union[LatentConfounder, ObservedNoise]


@dataclass
class PairCoefficients:
    alpha_i: float
    alpha_j: float
    order_used: tuple[int, int]
    cum11: float
    diagnostics: dict = field(default_factory=dict)


@dataclass
class WeightVector:
    labels: tuple[str, ...]
    entries: np.ndarray
    normalization_anchor: str | None = None

    def as_dict(self) -> dict:
        return dict(zip(self.labels, (float(v) for v in self.entries)))


class MixingMatrix:
    """Observed-by-component coefficient table with per-entry estimation mask."""

    def __init__(self, rows: Sequence[str], columns: Sequence[Component],
                 entries=None, estimated_mask=None):
        self.rows = tuple(rows)
        self.columns = tuple(columns)
        shape = (len(self.rows), len(self.columns))
        self.entries = (np.zeros(shape) if entries is None
                        else np.array(entries, dtype=np.float64).reshape(shape))
        self.estimated_mask = (np.ones(shape, dtype=bool) if estimated_mask is None
                               else np.array(estimated_mask, dtype=bool).reshape(shape))
        owners = [c.owner for c in self.columns if isinstance(c, ObservedNoise)]
        if len(owners) != len(set(owners)):
            raise InputShapeError("an observed noise column appears twice")
        if len(set(self.columns)) != len(self.columns):
            raise InputShapeError("duplicate component column")

    @property
    def shape(self):
        return self.entries.shape

    def row(self, label: str) -> int:
        return self.rows.index(label)

    def col(self, comp: Component) -> int:
        return self.columns.index(comp)

    def get(self, label: str, comp: Component) -> float:
        return float(self.entries[self.row(label), self.col(comp)])

    def submatrix(self, rows: Sequence[str], columns: Sequence[Component]) -> "MixingMatrix":
        ri = [self.row(r) for r in rows]
        ci = [self.col(c) for c in columns]
        return MixingMatrix(rows, columns, self.entries[np.ix_(ri, ci)],
                            self.estimated_mask[np.ix_(ri, ci)])

    def latent_columns(self) -> list[LatentConfounder]:
        return [c for c in self.columns if isinstance(c, LatentConfounder)]

    def check(self) -> None:
        """Raise if an estimated column is entirely zero."""
        for c, comp in enumerate(self.columns):
            m = self.estimated_mask[:, c]
            if m.any() and np.all(self.entries[m, c] == 0):
                raise InputShapeError(f"estimated column {comp.key()} is all zero")

    def __repr__(self):
        return f"MixingMatrix(rows={self.rows}, columns={[c.key() for c in self.columns]})"


# ---------------------------------------------------------------------------
# pair estimators


def _check_pair(xi, xj):
    xi = as_series(xi)
    xj = as_series(xj)
    if len(xi) != len(xj):
        raise InputShapeError("series have different lengths")
    if len(xi) < MIN_PAIR_SAMPLES:
        raise SampleSizeError(f"pair estimation needs N >= {MIN_PAIR_SAMPLES}")
    return xi, xj


def alpha_from_cumulants(c11: float, c_num: float, c_den: float) -> tuple[float, float]:
    """(alpha_i, alpha_j) from C_{1,1}, C_{n+1,m} and C_{n,m+1}.

    alpha_i^2 = C_{n+1,m} / C_{n,m+1} * C_{1,1} and alpha_j = C_{1,1} / alpha_i.
    """
    if c_den == 0:
        raise DegenerateCumulantError("zero denominator cumulant")
    arg = c_num / c_den * c11
    if arg <= 0:
        raise NonEstimableError(f"square-root argument {arg:.3g} is not positive")
    a_i = float(np.sqrt(arg))
    return a_i, float(c11 / a_i)


def _closed_form(xi, xj, n: int, m: int, multiplier: float, gate_numerator: bool,
                 n_groups: int) -> PairCoefficients:
    num_key, den_key = (n + 1, m), (n, m + 1)
    cums = pair_cumulants(xi, xj, [(1, 1), num_key, den_key], with_se=True,
                          n_groups=n_groups, replicates=True)
    c11, se11, r11 = cums[(1, 1)]
    num, se_num, r_num = cums[num_key]
    den, se_den, r_den = cums[den_key]
    diag = {"C11": c11, "C11_se": se11, f"C{num_key}": num, f"C{num_key}_se": se_num,
            f"C{den_key}": den, f"C{den_key}_se": se_den}
    if abs(den) <= multiplier * se_den or den == 0:
        raise DegenerateCumulantError(
            f"|C{den_key}|={abs(den):.3g} within {multiplier} standard errors of 0")
    if gate_numerator and abs(num) <= multiplier * se_num:
        raise DegenerateCumulantError(
            f"|C{num_key}|={abs(num):.3g} within {multiplier} standard errors of 0")
    arg = num / den * c11
    # jackknife over the same groups keeps the strong correlation between
    # numerator and denominator
    with np.errstate(divide="ignore", invalid="ignore"):
        r_arg = r_num / r_den * r11
    arg_se = jackknife_se(r_arg) if r_arg.size > 1 else float("nan")
    diag.update(arg=arg, arg_se=arg_se)
    if arg <= 0:
        clamped = bool(np.isfinite(arg_se) and -arg <= 2 * arg_se)
        raise NonEstimableError(
            f"square-root argument {arg:.3g} is not positive", clamped=clamped)
    a_i, a_j = alpha_from_cumulants(c11, num, den)
    if r_arg.size > 1:
        ri = np.sqrt(np.clip(r_arg, 0.0, None))
        with np.errstate(divide="ignore", invalid="ignore"):
            rj = np.where(ri > 0, r11 / ri, 0.0)
        diag["alpha_i_se"] = jackknife_se(ri)
        diag["alpha_j_se"] = jackknife_se(rj)
    else:
        diag["alpha_i_se"] = diag["alpha_j_se"] = float("nan")
    return PairCoefficients(a_i, a_j, (n, m), float(c11), diag)


def estimate_pair(xi, xj, degeneracy_multiplier: float = 3.0,
                  n_groups: int = 20) -> PairCoefficients:
    """Fourth-order closed form for two variables sharing one component.

    alpha_i = sqrt(cum(i,i,j,j) / cum(i,j,j,j) * cum(i,j)),
    alpha_j = cum(i,j) / alpha_i.
    """
    xi, xj = _check_pair(xi, xj)
    return _closed_form(xi, xj, 1, 2, degeneracy_multiplier, False, n_groups)


def estimate_pair_general(xi, xj, n: int, m: int, degeneracy_multiplier: float = 3.0,
                          n_groups: int = 20) -> PairCoefficients:
    """Closed form from C_{n+1,m} / C_{n,m+1}; (1, 2) is the fourth-order case."""
    if n < 1 or m < 1:
        raise UnsupportedOrderError(f"n and m must be >= 1, got ({n}, {m})")
    if n + m + 1 > 6:
        raise UnsupportedOrderError(f"total order n+m+1 must be <= 6, got {n + m + 1}")
    xi, xj = _check_pair(xi, xj)
    # the (1, 2) case keeps the single denominator gate of estimate_pair
    gate_num = (n, m) != (1, 2)
    return _closed_form(xi, xj, n, m, degeneracy_multiplier, gate_num, n_groups)


def select_order(xi, xj, degeneracy_multiplier: float = 3.0,
                 n_groups: int = 20) -> tuple[int, int]:
    """Smallest usable (n, m) in ORDER_SCAN; both ratio cumulants must clear the gate."""
    xi, xj = _check_pair(xi, xj)
    keys = sorted({k for n, m in ORDER_SCAN for k in ((n + 1, m), (n, m + 1))})
    cums = pair_cumulants(xi, xj, keys, with_se=True, n_groups=n_groups)
    for n, m in ORDER_SCAN:
        ok = True
        for key in ((n + 1, m), (n, m + 1)):
            val, se = cums[key]
            if abs(val) <= degeneracy_multiplier * se:
                ok = False
                break
        if ok:
            return n, m
    raise NonEstimableError("no cumulant order clears the degeneracy gate")


def estimate_with_fallback(xi, xj, degeneracy_multiplier: float = 3.0,
                           n_groups: int = 20) -> PairCoefficients:
    """estimate_pair, falling back to the selected higher order when degenerate."""
    try:
        return estimate_pair(xi, xj, degeneracy_multiplier, n_groups)
    except DegenerateCumulantError:
        n, m = select_order(xi, xj, degeneracy_multiplier, n_groups)
        return estimate_pair_general(xi, xj, n, m, degeneracy_multiplier, n_groups)


# ---------------------------------------------------------------------------
# null space and residuals


def _entries(A) -> tuple[tuple[str, ...], np.ndarray]:
    if isinstance(A, MixingMatrix):
        return A.rows, A.entries
    arr = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if arr.shape[0] == 1 and np.asarray(A).ndim == 1:
        arr = arr.T
    return tuple(str(i) for i in range(arr.shape[0])), arr


def null_weight(A_sub, anchor: str | None = None, rtol: float = 1e-8) -> WeightVector:
    """Nonzero omega with omega^T A_sub = 0.

    Uses a full SVD (a complete orthogonal decomposition) with rank tolerance
    ``rtol`` relative to the largest singular value.  With an anchor the
    minimum-norm solution having omega[anchor] = 1 is returned; if the null
    space has no weight on the anchor the unit-norm basis vector is returned
    and the anchor is left unset.
    """
    labels, M = _entries(A_sub)
    r = M.shape[0]
    if r == 0:
        raise NoNullSpaceError("no rows")
    if M.size == 0:
        basis = np.eye(r)
    else:
        U, s, _ = np.linalg.svd(M, full_matrices=True)
        smax = s[0] if s.size else 0.0
        rank = int(np.sum(s > rtol * smax)) if smax > 0 else 0
        if rank >= r:
            raise NoNullSpaceError(f"{r} rows have full row rank")
        basis = U[:, rank:]
    if anchor is not None:
        a = labels.index(anchor)
        coef = basis[a, :]
        norm2 = float(coef @ coef)
        if norm2 > rtol ** 2:
            omega = basis @ (coef / norm2)
            omega[a] = 1.0
            return WeightVector(labels, omega, anchor)
    omega = basis[:, 0].copy()
    omega /= np.linalg.norm(omega)
    nz = np.flatnonzero(np.abs(omega) > rtol)
    if nz.size and omega[nz[0]] < 0:
        omega = -omega
    return WeightVector(labels, omega, None)


def surrogate_residual(xj, Xk: Sequence, A_sub, rtol: float = 1e-8) -> np.ndarray:
    """omega^T [xj, Xk] with omega anchored at the first row of A_sub."""
    labels, M = _entries(A_sub)
    if M.shape[0] != 1 + len(Xk):
        raise InputShapeError("A_sub rows must be xj followed by the surrogates")
    w = null_weight(A_sub, anchor=labels[0], rtol=rtol)
    if w.normalization_anchor is None:
        raise NoNullSpaceError("no solution with unit weight on the target")
    out = as_series(xj).copy()
    for c, series in zip(w.entries[1:], Xk):
        s = as_series(series)
        if len(s) != len(out):
            raise InputShapeError("series have different lengths")
        out += c * s
    return out
