"""Brute-force sufficiency checks for IID samples from finite-support families.

Every function enumerates ``support ** n`` outright, so the sample space is
bounded by :data:`MAX_TUPLES`.  A family is only known on a finite grid of
parameter values; "sufficient" and "minimal" are relative to that grid.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable, Hashable, Optional, Sequence

import numpy as np

from . import expfam, kernels
from .errors import SizeError, UnderflowError

MAX_TUPLES = 10**6
_LOG_UNDERFLOW = math.log(1e-300)


@dataclass(frozen=True, eq=False)
class DiscreteFamily:
    support: tuple
    theta_grid: tuple
    prob_table: np.ndarray

    def __post_init__(self):
        support = tuple(self.support)
        table = np.array(self.prob_table, dtype=np.float64)
        grid = tuple(tuple(np.atleast_1d(np.asarray(t, dtype=float)).tolist()) for t in self.theta_grid)
        if table.shape != (len(grid), len(support)):
            raise ValueError(f"prob_table must be {len(grid)} x {len(support)}, got {table.shape}")
        if len(set(grid)) < 2:
            raise ValueError("theta_grid needs at least 2 distinct points")
        if len(set(support)) != len(support):
            raise ValueError("support elements must be distinct")
        if np.any(table <= 0.0):
            raise ValueError("all probabilities must be positive (constant support)")
        if np.max(np.abs(table.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("each row of prob_table must sum to 1")
        table.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "theta_grid", grid)
        object.__setattr__(self, "prob_table", table)

    @property
    def m(self) -> int:
        return len(self.support)

    @property
    def log_table(self) -> np.ndarray:
        return np.log(self.prob_table)

    @classmethod
    def from_expfam(cls, model: expfam.ExponentialFamilyModel, theta_grid) -> "DiscreteFamily":
        if not model.is_discrete:
            raise ValueError("only discrete exponential families can be enumerated")
        rows = [[expfam.density(model, th, x) for x in model.support] for th in theta_grid]
        rows = np.array(rows)
        rows /= rows.sum(axis=1, keepdims=True)
        return cls(model.support, theta_grid, rows)

    @classmethod
    def bernoulli(cls, ps: Sequence[float] = (0.2, 0.5, 0.8)) -> "DiscreteFamily":
        """Bernoulli family indexed directly by success probability."""
        return cls((0, 1), [[p] for p in ps], [[1.0 - p, p] for p in ps])

    @classmethod
    def mixture(cls, u, v, thetas) -> "DiscreteFamily":
        """``p_theta = (1 - theta) u + theta v``: not exponential in general."""
        u, v = np.asarray(u, float), np.asarray(v, float)
        return cls(tuple(range(len(u))), [[t] for t in thetas], [(1 - t) * u + t * v for t in thetas])


def family_from_dict(doc: dict) -> DiscreteFamily:
    """Load a family from JSON.

    Either an explicit ``support`` / ``theta_grid`` / ``prob_table`` triple,
    or an exponential-family model document plus ``theta_grid``.
    """
    grid = doc["theta_grid"]
    if "prob_table" in doc:
        return DiscreteFamily(doc["support"], grid, doc["prob_table"])
    return DiscreteFamily.from_expfam(expfam.model_from_dict(doc), grid)


def load_family(path) -> DiscreteFamily:
    with open(path, encoding="utf-8") as fh:
        return family_from_dict(json.load(fh))


@dataclass(frozen=True)
class Statistic:
    arity: int
    map: Callable[[tuple], Hashable]
    dim: int


def sum_statistic(n: int, values: Optional[dict] = None) -> Statistic:
    """``sum_i T(x_i)``; ``values`` maps outcomes to ``T`` (identity by default)."""
    f = (lambda x: x) if values is None else values.__getitem__
    return Statistic(n, lambda xs: (sum(f(x) for x in xs),), 1)


def coordinate_statistic(n: int, index: int) -> Statistic:
    return Statistic(n, lambda xs: (xs[index],), 1)


def identity_statistic(n: int) -> Statistic:
    return Statistic(n, tuple, n)


def count_statistic(support: Sequence, n: int) -> Statistic:
    """Empirical count vector over ``support``."""
    support = tuple(support)
    return Statistic(n, lambda xs: tuple(xs.count(s) for s in support), len(support))


@dataclass(frozen=True)
class PartitionReport:
    n: int
    class_count: int
    classes: list

    def labelling(self) -> dict:
        return {u: i for i, cls in enumerate(self.classes) for u in cls}

    def as_statistic(self) -> Statistic:
        lab = self.labelling()
        return Statistic(self.n, lambda xs: (lab[tuple(xs)],), 1)


def _enumerate(family: DiscreteFamily, n: int):
    if n < 1:
        raise ValueError("sample size must be >= 1")
    if family.m**n > MAX_TUPLES:
        raise SizeError(f"{family.m}^{n} tuples exceeds the enumeration bound {MAX_TUPLES}")
    idx = np.array(list(itertools.product(range(family.m), repeat=n)), dtype=np.int64).reshape(-1, n)
    counts = np.zeros((idx.shape[0], family.m))
    for s in range(family.m):
        counts[:, s] = np.count_nonzero(idx == s, axis=1)
    # IID: the log-likelihood of a tuple depends on its counts only
    loglik = counts @ family.log_table.T
    tuples = [tuple(family.support[i] for i in row) for row in idx]
    return tuples, loglik


def is_sufficient(family: DiscreteFamily, stat: Statistic, tol: float = 1e-9) -> tuple[bool, float]:
    """Factorization check by enumeration.

    Within each level set of ``stat`` the conditional law of the sample is
    computed for every grid point; the defect is the largest total-variation
    distance between two grid points' conditionals over all level sets.
    """
    tuples, loglik = _enumerate(family, stat.arity)
    keys: dict = {}
    labels = np.fromiter((keys.setdefault(stat.map(u), len(keys)) for u in tuples), dtype=np.int64, count=len(tuples))
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    ll = loglik[order]
    starts = np.flatnonzero(np.r_[True, sorted_labels[1:] != sorted_labels[:-1]])

    group_max = np.maximum.reduceat(ll, starts, axis=0)
    shifted = np.exp(ll - np.repeat(group_max, np.diff(np.r_[starts, len(ll)]), axis=0))
    group_sum = np.add.reduceat(shifted, starts, axis=0)
    log_group = group_max + np.log(group_sum)
    if np.any(log_group < _LOG_UNDERFLOW):
        raise UnderflowError("a statistic level set has probability below 1e-300")
    cond = shifted / np.repeat(group_sum, np.diff(np.r_[starts, len(ll)]), axis=0)

    defect = 0.0
    n_theta = cond.shape[1]
    for a in range(n_theta):
        for b in range(a + 1, n_theta):
            tv = 0.5 * np.add.reduceat(np.abs(cond[:, a] - cond[:, b]), starts)
            defect = max(defect, float(tv.max()))
    return defect <= tol, defect


def minimal_sufficient_partition(family: DiscreteFamily, n: int, ratio_tol: float = 1e-9) -> PartitionReport:
    """Group sample tuples whose likelihood ratio is constant over the grid.

    Comparison is on log-likelihood profiles relative to the first grid
    point; two tuples match when every log-ratio agrees within
    ``log1p(ratio_tol)``.
    """
    tuples, loglik = _enumerate(family, n)
    profiles = np.ascontiguousarray(loglik[:, 1:] - loglik[:, :1])
    labels = kernels.assign_classes(profiles, math.log1p(ratio_tol))
    classes: list = [[] for _ in range(int(labels.max()) + 1)]
    for u, lab in zip(tuples, labels.tolist()):
        classes[lab].append(u)
    return PartitionReport(n, len(classes), classes)


def pkd_growth_probe(family: DiscreteFamily, n_max: int, ratio_tol: float = 1e-9) -> list[tuple[int, int]]:
    """Minimal-partition sizes for ``n = 1 .. n_max``.

    A one-parameter exponential family with integer statistic on ``{0,1,2}``
    grows like ``2n + 1``; a generic 3-point family like ``(n+1)(n+2)/2``.
    """
    if family.m**n_max > MAX_TUPLES:
        raise SizeError(f"{family.m}^{n_max} tuples exceeds the enumeration bound {MAX_TUPLES}")
    return [(n, minimal_sufficient_partition(family, n, ratio_tol).class_count) for n in range(1, n_max + 1)]


def growth_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "class_count"])
    w.writerows(rows)
    return buf.getvalue()
