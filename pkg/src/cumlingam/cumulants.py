"""Unbiased estimation of joint cumulants from samples.

Joint cumulants are estimated with multivariate k-statistics.  A k-statistic
is written as a polynomial in sample power sums

    s_B = sum_n prod_{r in B} x[n, r]

over blocks B of the index positions.  The coefficients follow from two nested
partition sums: the moment-to-cumulant formula over partitions pi of the
positions, and for every pi the unbiased estimate of a product of moments,
obtained by Moebius inversion of the distinct-index sums over partitions of
the blocks of pi.  The coefficient tables are computed once per order and
cached, so orders up to 6 are cheap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial
from typing import Sequence

import numpy as np

from .errors import InputShapeError, SampleSizeError, UnsupportedOrderError

MAX_JOINT_ORDER = 4
MAX_AB_ORDER = 6


@dataclass(frozen=True)
class Dataset:
    """Column-labelled sample matrix of shape (N, p)."""

    values: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise InputShapeError(f"dataset must be 2-d, got shape {vals.shape}")
        labels = tuple(str(s) for s in self.labels)
        if len(labels) != vals.shape[1]:
            raise InputShapeError(
                f"{len(labels)} labels for {vals.shape[1]} columns")
        if len(set(labels)) != len(labels):
            raise InputShapeError("duplicate column labels")
        if vals.shape[0] == 0:
            raise InputShapeError("dataset has no rows")
        if not np.all(np.isfinite(vals)):
            raise InputShapeError("dataset contains non-finite values")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_columns(cls, columns: dict) -> "Dataset":
        labels = list(columns)
        lengths = {len(np.asarray(columns[k])) for k in labels}
        if len(lengths) > 1:
            raise InputShapeError("columns have different lengths")
        return cls(np.column_stack([np.asarray(columns[k], float) for k in labels]),
                   tuple(labels))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown column {label!r}") from None

    def column(self, label: str) -> np.ndarray:
        return self.values[:, self.index(label)]


@dataclass(frozen=True)
class CumulantIndex:
    """Ordered tuple of column labels; the order is the tuple length."""

    variables: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        if not 2 <= len(self.variables) <= 8:
            raise UnsupportedOrderError(
                f"cumulant index length must be in [2, 8], got {len(self.variables)}")

    @property
    def order(self) -> int:
        return len(self.variables)


@dataclass
class CumulantEstimate:
    value: float
    order: int
    sample_size: int
    variance_estimate: float | None = None
    # jackknife standard error, filled only when requested
    standard_error: float | None = None
    extra: dict = field(default_factory=dict)


def as_series(x, min_length: int = 1) -> np.ndarray:
    """Validate a 1-d finite sample vector."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size < min_length:
        raise SampleSizeError(f"need at least {min_length} samples, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InputShapeError("series contains non-finite values")
    return arr


def center(data):
    """Subtract column means with two passes; variances are left unchanged.

    Accepts a ``Dataset`` or an array (1-d or 2-d) and returns the same kind.
    """
    if isinstance(data, Dataset):
        if data.n_samples == 0:
            raise InputShapeError("empty column")
        return Dataset(_center_array(data.values), data.labels)
    arr = np.asarray(data, dtype=np.float64)
    if arr.shape[0] == 0:
        raise InputShapeError("empty column")
    return _center_array(arr)


def _center_array(arr: np.ndarray) -> np.ndarray:
    out = arr - arr.mean(axis=0)
    # second pass removes the rounding drift of the first
    out -= out.mean(axis=0)
    return out


# ---------------------------------------------------------------------------
# partition machinery


def set_partitions(elems: Sequence):
    """Yield every set partition of ``elems`` as a list of lists."""
    elems = list(elems)
    if not elems:
        yield []
        return
    first, rest = elems[0], elems[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


@lru_cache(maxsize=None)
def _kstat_terms(k: int):
    """Coefficient table of the order-k k-statistic.

    Returns a tuple of (rho, weights) where rho is a tuple of position
    bitmasks (a partition of the k positions) and weights is a tuple of
    (h, w) pairs; the coefficient of prod_{B in rho} s_B is sum w / n_(h)
    with n_(h) the falling factorial.
    """
    acc: dict[tuple, dict[int, int]] = {}
    for pi in set_partitions(range(k)):
        h = len(pi)
        w_pi = (-1) ** (h - 1) * factorial(h - 1)
        masks = [sum(1 << r for r in b) for b in pi]
        for sigma in set_partitions(range(h)):
            c = w_pi
            rho = []
            for grp in sigma:
                c *= (-1) ** (len(grp) - 1) * factorial(len(grp) - 1)
                m = 0
                for g in grp:
                    m |= masks[g]
                rho.append(m)
            d = acc.setdefault(tuple(sorted(rho)), {})
            d[h] = d.get(h, 0) + c
    out = []
    for rho, d in sorted(acc.items()):
        weights = tuple(sorted((h, w) for h, w in d.items() if w != 0))
        if weights:
            out.append((rho, weights))
    return tuple(out)


def _falling(n, h: int):
    out = np.ones_like(n, dtype=np.float64)
    for t in range(h):
        out = out * (n - t)
    return out


class _PowerSums:
    """Cache of power sums sum_n prod x for multisets of columns.

    When ``n_groups`` > 0 every sum is also returned with each of the
    contiguous groups removed, which gives the delete-d jackknife replicates
    for free.
    """

    def __init__(self, columns: Sequence[np.ndarray], n_groups: int = 0):
        self.columns = [np.asarray(c, dtype=np.float64) for c in columns]
        n = len(self.columns[0])
        for c in self.columns:
            if len(c) != n:
                raise InputShapeError("series have different lengths")
        self.n = n
        self.n_groups = int(n_groups)
        if self.n_groups:
            bounds = np.linspace(0, n, self.n_groups + 1).round().astype(int)
            self.starts = bounds[:-1]
            sizes = np.diff(bounds)
            self.sizes = np.concatenate([[n], n - sizes]).astype(np.float64)
        else:
            self.sizes = np.array([float(n)])
        self._prod: dict[tuple, np.ndarray] = {(): np.ones(n)}
        self._sums: dict[tuple, np.ndarray] = {}

    def _product(self, key: tuple) -> np.ndarray:
        if key not in self._prod:
            self._prod[key] = self._product(key[:-1]) * self.columns[key[-1]]
        return self._prod[key]

    def get(self, key: tuple) -> np.ndarray:
        if key not in self._sums:
            prod = self._product(key)
            total = prod.sum()
            if self.n_groups:
                grp = np.add.reduceat(prod, self.starts)
                self._sums[key] = np.concatenate([[total], total - grp])
            else:
                self._sums[key] = np.array([total])
        return self._sums[key]

    def kstat(self, ids: Sequence[int]) -> np.ndarray:
        """k-statistic for the positions referencing columns ``ids``.

        Returns an array: the full-sample value followed by the
        leave-one-group-out replicates when grouping is enabled.
        """
        k = len(ids)
        ns = self.sizes
        total = np.zeros_like(ns)
        for rho, weights in _kstat_terms(k):
            coef = np.zeros_like(ns)
            for h, w in weights:
                coef = coef + w / _falling(ns, h)
            term = coef
            for mask in rho:
                key = tuple(sorted(ids[r] for r in range(k) if mask >> r & 1))
                term = term * self.get(key)
            total = total + term
        return total


def jackknife_se(replicates: np.ndarray) -> float:
    """Grouped (delete-d) jackknife standard error from the replicates."""
    g = len(replicates)
    if g < 2:
        return float("nan")
    dev = replicates - replicates.mean()
    return float(np.sqrt((g - 1) / g * np.sum(dev * dev)))


def _default_groups(n: int, order: int, requested: int) -> int:
    # each leave-out sample must still support the statistic
    g = min(requested, n)
    while g > 1 and n - int(np.ceil(n / g)) <= order:
        g -= 1
    return g if g > 1 else 0


def kstat(columns: Sequence[np.ndarray], with_se: bool = False,
          n_groups: int = 20) -> tuple[float, float | None]:
    """Joint k-statistic of the given columns (one per index position).

    Identical arrays (by identity) share power sums.  Returns the estimate and
    the jackknife standard error (None unless ``with_se``).
    """
    cols = list(columns)
    uniq: list[np.ndarray] = []
    ids = []
    for c in cols:
        for u, arr in enumerate(uniq):
            if arr is c:
                ids.append(u)
                break
        else:
            uniq.append(c)
            ids.append(len(uniq) - 1)
    n = len(cols[0])
    groups = _default_groups(n, len(cols), n_groups) if with_se else 0
    ps = _PowerSums(uniq, groups)
    vals = ps.kstat(ids)
    se = jackknife_se(vals[1:]) if groups else None
    return float(vals[0]), se


def joint_cumulant(data: Dataset, idx, with_se: bool = False,
                   n_groups: int = 20) -> CumulantEstimate:
    """Unbiased estimate of cum(X_{i1}, ..., X_{ik}) for k in 2..4.

    ``idx`` is a ``CumulantIndex`` or a sequence of column labels (or
    integer column positions).
    """
    variables = idx.variables if isinstance(idx, CumulantIndex) else tuple(idx)
    k = len(variables)
    if not 2 <= k <= MAX_JOINT_ORDER:
        raise UnsupportedOrderError(
            f"joint_cumulant supports orders 2..{MAX_JOINT_ORDER}, got {k}")
    n = data.n_samples
    if n <= k:
        raise SampleSizeError(f"order {k} needs more than {k} samples, got {n}")
    cols = []
    cache: dict = {}
    for v in variables:
        j = v if isinstance(v, (int, np.integer)) else data.index(v)
        if j not in cache:
            cache[j] = data.values[:, j]
        cols.append(cache[j])
    value, se = kstat(cols, with_se=with_se, n_groups=n_groups)
    return CumulantEstimate(value=value, order=k, sample_size=n, standard_error=se)


def pair_cumulants(xi, xj, orders: Sequence[tuple[int, int]], with_se: bool = True,
                   n_groups: int = 20, replicates: bool = False) -> dict:
    """C_{a,b}(xi, xj) for several (a, b) sharing one power-sum cache.

    Returns {(a, b): (value, se)}; se is None unless ``with_se``.  With
    ``replicates`` the tuples gain a third item, the array of jackknife
    leave-one-group-out values.
    """
    xi = as_series(xi)
    xj = as_series(xj)
    if len(xi) != len(xj):
        raise InputShapeError("series have different lengths")
    top = max(a + b for a, b in orders)
    groups = _default_groups(len(xi), top, n_groups) if with_se else 0
    ps = _PowerSums([xi, xj], groups)
    out = {}
    for a, b in orders:
        vals = ps.kstat([0] * a + [1] * b)
        item = (float(vals[0]), jackknife_se(vals[1:]) if groups else None)
        out[(a, b)] = item + (vals[1:],) if replicates else item
    return out


def cum_ab(xi, xj, a: int, b: int, with_se: bool = False,
           n_groups: int = 20) -> CumulantEstimate:
    """C_{a,b}: joint cumulant with xi repeated a times and xj b times."""
    if a < 1 or b < 1:
        raise UnsupportedOrderError(f"a and b must be >= 1, got ({a}, {b})")
    if a + b > MAX_AB_ORDER:
        raise UnsupportedOrderError(
            f"cum_ab supports a+b <= {MAX_AB_ORDER}, got {a + b}")
    xi = as_series(xi)
    xj = as_series(xj)
    if len(xi) <= a + b:
        raise SampleSizeError(f"order {a + b} needs more than {a + b} samples")
    (value, se), = pair_cumulants(xi, xj, [(a, b)], with_se, n_groups).values()
    return CumulantEstimate(value=value, order=a + b, sample_size=len(xi),
                            standard_error=se)


def central_moments(x, max_order: int = 8) -> np.ndarray:
    """Sample central moments mu_0..mu_max_order (divisor N)."""
    x = as_series(x)
    d = x - x.mean()
    out = np.empty(max_order + 1)
    p = np.ones_like(d)
    for r in range(max_order + 1):
        out[r] = p.mean()
        p = p * d
    return out


def cumulant4_variance_from_moments(mu, n: int) -> float:
    """Fourth-cumulant variance diagnostic from central moments mu[0..8].

    The expression is used exactly as printed in the source derivation,
    including its bare -mu2 term; for Gaussian moments it gives 23/n rather
    than the textbook 24/n.
    """
    m2, m3, m4, m5, m6, m8 = mu[2], mu[3], mu[4], mu[5], mu[6], mu[8]
    v = (m8 - 12 * m6 * m2 - 8 * m5 * m3 - m4 ** 2 + 48 * m4 * m2 ** 2
         + 64 * m3 ** 2 - m2 - 36 * m2 ** 4)
    return float(v / n)


def cumulant4_variance(x) -> float:
    """Variance diagnostic of the fourth cumulant estimate of ``x``."""
    x = as_series(x)
    if len(x) <= 8:
        raise SampleSizeError(f"need more than 8 samples, got {len(x)}")
    return cumulant4_variance_from_moments(central_moments(x, 8), len(x))
