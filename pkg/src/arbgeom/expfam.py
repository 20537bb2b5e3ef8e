"""Exponential-family geometry: log-partition, mean map, Fisher metric, duality.

A model is ``p(x | theta) = h(x) exp(<theta, T(x)> - psi(theta))``.  Discrete
kinds carry their support, statistic table ``T`` and log base measure
``log h`` explicitly, so every sum over the support is an exact finite sum.
The unit-variance Gaussian is continuous; its density is taken relative to
the standard normal base measure.

Name clash: ``psi`` here is the log-partition function.  The wealth 1-form
of the same name lives in :mod:`arbgeom.forms`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.special import expit, gammaln, logit

from .errors import ConvergenceError, DegenerateMetricError, DomainError

KINDS = ("bernoulli", "poisson_truncated", "gaussian_unit_variance", "categorical", "custom_finite")

NEWTON_MAX_ITER = 100
NEWTON_DAMPING_FLOOR = 2.0**-20
NEWTON_MAX_STEP = 4.0


@dataclass(frozen=True, eq=False)
class ExponentialFamilyModel:
    kind: str
    param_dim: int
    support: Optional[tuple] = None
    T_table: Optional[np.ndarray] = field(default=None, repr=False)
    log_base: Optional[np.ndarray] = field(default=None, repr=False)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.support is not None:
            T = np.array(self.T_table, dtype=np.float64)
            if T.ndim != 2 or T.shape != (len(self.support), self.param_dim):
                raise ValueError("T_table must have one row of length param_dim per support element")
            T.setflags(write=False)
            object.__setattr__(self, "T_table", T)
            lb = np.zeros(len(self.support)) if self.log_base is None else np.array(self.log_base, dtype=np.float64)
            lb.setflags(write=False)
            object.__setattr__(self, "log_base", lb)

    @property
    def is_discrete(self) -> bool:
        return self.support is not None

    def __repr__(self):
        return f"ExponentialFamilyModel({self.kind}, {self.params})"


def bernoulli() -> ExponentialFamilyModel:
    return ExponentialFamilyModel("bernoulli", 1, (0, 1), [[0.0], [1.0]])


def poisson_truncated(max_count: int = 60) -> ExponentialFamilyModel:
    """Poisson restricted to ``0..max_count`` and renormalised.

    At ``theta = 0`` the dropped tail mass is ``P(N > max_count)`` for
    ``N ~ Poisson(1)``, below 1e-80 at the default cut of 60.
    """
    if max_count < 1:
        raise ValueError("max_count must be >= 1")
    ks = np.arange(max_count + 1)
    return ExponentialFamilyModel(
        "poisson_truncated", 1, tuple(range(max_count + 1)), ks[:, None].astype(float),
        log_base=-gammaln(ks + 1.0), params={"max_count": max_count},
    )


def gaussian_unit_variance() -> ExponentialFamilyModel:
    return ExponentialFamilyModel("gaussian_unit_variance", 1)


def categorical(k: int) -> ExponentialFamilyModel:
    """Minimal (k-1)-parameter categorical; outcome 0 is the reference."""
    if k < 2:
        raise ValueError("categorical needs k >= 2")
    T = np.zeros((k, k - 1))
    T[1:] = np.eye(k - 1)
    return ExponentialFamilyModel("categorical", k - 1, tuple(range(k)), T, params={"k": k})


def custom_finite(support: Sequence, T_table, log_base=None) -> ExponentialFamilyModel:
    """Arbitrary finite-support family.

    Rows of ``T_table`` should be affinely independent enough to make the
    representation minimal; otherwise :func:`fisher_metric` raises.
    """
    T = np.atleast_2d(np.asarray(T_table, dtype=np.float64))
    if T.shape[0] != len(support) and T.shape[0] == 1:
        T = T.T
    return ExponentialFamilyModel("custom_finite", T.shape[1], tuple(support), T, log_base=log_base)


def model_from_dict(doc: dict) -> ExponentialFamilyModel:
    """Build a model from ``{"kind": ..., "params": {...}}``.

    ``custom_finite`` takes ``support`` and ``T_table`` either inside
    ``params`` or at the top level.
    """
    kind = doc.get("kind")
    params = dict(doc.get("params") or {})
    if kind == "bernoulli":
        return bernoulli()
    if kind in ("poisson_truncated", "poisson"):
        return poisson_truncated(int(params.get("max_count", 60)))
    if kind in ("gaussian_unit_variance", "gaussian"):
        return gaussian_unit_variance()
    if kind == "categorical":
        return categorical(int(params["k"]))
    if kind == "custom_finite":
        support = params.get("support", doc.get("support"))
        table = params.get("T_table", doc.get("T_table"))
        if support is None or table is None:
            raise ValueError("custom_finite needs 'support' and 'T_table'")
        return custom_finite(support, table, params.get("log_base", doc.get("log_base")))
    raise ValueError(f"unknown model kind {kind!r}")


def model_to_dict(model: ExponentialFamilyModel) -> dict:
    if model.kind == "custom_finite":
        params: dict[str, Any] = {"support": list(model.support), "T_table": model.T_table.tolist()}
        if np.any(model.log_base != 0):
            params["log_base"] = model.log_base.tolist()
        return {"kind": model.kind, "params": params}
    return {"kind": model.kind, "params": dict(model.params)}


def load_model(path) -> ExponentialFamilyModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


# -- helpers -----------------------------------------------------------------


def _theta(model, theta) -> np.ndarray:
    th = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    if th.shape != (model.param_dim,):
        raise DomainError(f"theta must have length {model.param_dim}")
    if not np.all(np.isfinite(th)):
        raise DomainError("theta must be finite")
    return th


def _eta(model, eta) -> np.ndarray:
    e = np.atleast_1d(np.asarray(eta, dtype=np.float64))
    if e.shape != (model.param_dim,):
        raise DomainError(f"eta must have length {model.param_dim}")
    return e


def logsumexp(a: np.ndarray) -> float:
    """Shift-by-max log-sum-exp of a 1-D array."""
    top = a.max()
    return float(top + np.log(np.sum(np.exp(a - top))))


def _log_weights(model, th):
    return model.T_table @ th + model.log_base


def _probabilities(model, th):
    lw = _log_weights(model, th)
    return np.exp(lw - logsumexp(lw))


# -- core geometry -----------------------------------------------------------


def log_partition(model: ExponentialFamilyModel, theta) -> float:
    th = _theta(model, theta)
    if model.kind == "bernoulli":
        return float(np.logaddexp(0.0, th[0]))
    if model.kind == "gaussian_unit_variance":
        return float(0.5 * th[0] ** 2)
    if model.kind == "categorical":
        return float(logsumexp(np.concatenate([[0.0], th])))
    return float(logsumexp(_log_weights(model, th)))


def density(model: ExponentialFamilyModel, theta, x) -> float:
    """``h(x) exp(<theta, T(x)> - psi(theta))`` for an outcome ``x``."""
    th = _theta(model, theta)
    if model.kind == "gaussian_unit_variance":
        x = float(x)
        if not math.isfinite(x):
            raise DomainError("outcome must be finite")
        return math.exp(th[0] * x - log_partition(model, th))
    try:
        i = model.support.index(x)
    except ValueError:
        raise DomainError(f"outcome {x!r} is not in the support") from None
    return math.exp(float(model.T_table[i] @ th + model.log_base[i]) - log_partition(model, th))


def mean_params(model: ExponentialFamilyModel, theta) -> np.ndarray:
    """Expectation coordinates ``eta = grad psi(theta) = E[T]``."""
    th = _theta(model, theta)
    if model.kind == "bernoulli":
        return np.array([expit(th[0])])
    if model.kind == "gaussian_unit_variance":
        return th.copy()
    return _probabilities(model, th) @ model.T_table


def _raw_hessian(model, th) -> np.ndarray:
    if model.kind == "bernoulli":
        p = expit(th[0])
        return np.array([[p * (1.0 - p)]])
    if model.kind == "gaussian_unit_variance":
        return np.eye(1)
    p = _probabilities(model, th)
    mean = p @ model.T_table
    centred = model.T_table - mean
    return (centred * p[:, None]).T @ centred


@dataclass(frozen=True, eq=False)
class FisherMetric:
    g: np.ndarray

    def __post_init__(self):
        g = np.array(self.g, dtype=np.float64)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DegenerateMetricError("metric must be square")
        if np.max(np.abs(g - g.T), initial=0.0) > 1e-12:
            raise DegenerateMetricError("metric is not symmetric")
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise DegenerateMetricError("metric is not positive-definite (non-minimal family?)") from None
        g.setflags(write=False)
        object.__setattr__(self, "g", g)


def fisher_metric(model: ExponentialFamilyModel, theta) -> FisherMetric:
    """Hessian of the log-partition, i.e. the covariance of ``T``."""
    h = _raw_hessian(model, _theta(model, theta))
    return FisherMetric(0.5 * (h + h.T))


# -- Legendre duality --------------------------------------------------------


def in_mean_domain(model: ExponentialFamilyModel, eta) -> bool:
    """Whether ``eta`` lies strictly inside the mean-parameter domain."""
    e = _eta(model, eta)
    if not np.all(np.isfinite(e)):
        return False
    if model.kind == "gaussian_unit_variance":
        return True
    if model.kind == "bernoulli":
        return 0.0 < e[0] < 1.0
    if model.kind == "poisson_truncated":
        return 0.0 < e[0] < model.params["max_count"]
    if model.kind == "categorical":
        return bool(np.all(e > 0.0) and e.sum() < 1.0)
    if model.param_dim == 1:
        return bool(model.T_table.min() < e[0] < model.T_table.max())
    return _interior_of_hull(model.T_table, e)


def _interior_of_hull(T, e) -> bool:
    # maximise eps subject to sum_x w_x T_x = e, sum w = 1, w_x >= eps
    m, d = T.shape
    c = np.zeros(m + 1)
    c[-1] = -1.0
    a_eq = np.zeros((d + 1, m + 1))
    a_eq[:d, :m] = T.T
    a_eq[d, :m] = 1.0
    b_eq = np.concatenate([e, [1.0]])
    a_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(m), A_eq=a_eq, b_eq=b_eq,
                  bounds=[(0, None)] * m + [(None, 1.0)], method="highs")
    return bool(res.status == 0 and -res.fun > 1e-12)


def natural_from_mean(model: ExponentialFamilyModel, eta, tol: float = 1e-12, theta0=None) -> np.ndarray:
    """Invert the mean map: solve ``grad psi(theta) = eta``.

    Closed forms for Bernoulli and Gaussian.  Otherwise damped Newton on the
    convex objective ``psi(theta) - <theta, eta>`` with the Fisher metric as
    Jacobian; ``theta0`` is an optional warm start.
    """
    e = _eta(model, eta)
    if not in_mean_domain(model, e):
        raise DomainError(f"eta={e.tolist()} is not strictly inside the mean domain of {model.kind}")
    if model.kind == "bernoulli":
        return np.array([logit(e[0])])
    if model.kind == "gaussian_unit_variance":
        return e.copy()

    th = np.zeros(model.param_dim) if theta0 is None else _theta(model, theta0).copy()

    def objective(t):
        return log_partition(model, t) - float(t @ e)

    f = objective(th)
    for _ in range(NEWTON_MAX_ITER):
        grad = mean_params(model, th) - e
        if np.max(np.abs(grad)) <= tol:
            return th
        try:
            direction = np.linalg.solve(_raw_hessian(model, th), grad)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular Fisher metric during Newton inversion") from None
        # near-saturated families have tiny curvature and huge raw steps
        longest = np.max(np.abs(direction))
        if longest > NEWTON_MAX_STEP:
            direction *= NEWTON_MAX_STEP / longest
        slack = 4.0 * np.finfo(float).eps * max(1.0, abs(f))
        alpha = 1.0
        while True:
            cand = th - alpha * direction
            fc = objective(cand)
            if fc <= f + slack:
                break
            alpha *= 0.5
            if alpha < NEWTON_DAMPING_FLOOR:
                raise ConvergenceError("damped Newton step underflowed")
        th, f = cand, fc
    if np.max(np.abs(mean_params(model, th) - e)) <= tol:
        return th
    raise ConvergenceError(f"no convergence in {NEWTON_MAX_ITER} Newton iterations")


def dual_potential(model: ExponentialFamilyModel, eta, theta=None) -> float:
    """Legendre dual ``phi(eta) = <theta(eta), eta> - psi(theta(eta))``."""
    e = _eta(model, eta)
    th = natural_from_mean(model, e) if theta is None else _theta(model, theta)
    return float(th @ e) - log_partition(model, th)


def bregman_divergence(model: ExponentialFamilyModel, eta, eta_prime) -> float:
    """``D(eta || eta') = psi(theta) + phi(eta') - <theta, eta'>`` with ``theta = theta(eta)``.

    For discrete kinds this is ``KL(p(.|theta(eta')) || p(.|theta(eta)))``.
    """
    e, ep = _eta(model, eta), _eta(model, eta_prime)
    th = natural_from_mean(model, e)
    d = log_partition(model, th) + dual_potential(model, ep) - float(th @ ep)
    # psi is convex, so a negative value is cancellation noise
    return max(d, 0.0)
