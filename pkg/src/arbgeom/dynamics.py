"""Onsager linear response on the exponential-family manifold.

Fluxes respond linearly to forces, ``d eta / dt = L X``.  With the force taken
as ``X = theta* - theta(eta)`` and ``L`` the Fisher metric, the flow is the
natural-gradient relaxation toward ``eta* = grad psi(theta*)`` and the
Bregman divergence to ``eta*`` decreases along it.  An antisymmetric part of
``L`` shows up as nonzero work around closed loops in force space.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import expfam
from .errors import DomainError, PreconditionError, SingularityError, StiffnessError
from .forms import ParametricPath, constant_matrix_form, line_integral

MAX_HALVINGS = 40


@dataclass(frozen=True, eq=False)
class TransportMatrix:
    L: np.ndarray

    def __post_init__(self):
        L = np.array(self.L, dtype=np.float64)
        if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] < 1:
            raise ValueError("transport matrix must be square with d >= 1")
        if not np.all(np.isfinite(L)):
            raise ValueError("transport matrix entries must be finite")
        L.setflags(write=False)
        object.__setattr__(self, "L", L)

    @property
    def d(self) -> int:
        return self.L.shape[0]


def _mat(L) -> np.ndarray:
    return L.L if isinstance(L, TransportMatrix) else TransportMatrix(L).L


def load_transport(path) -> TransportMatrix:
    with open(path, encoding="utf-8") as fh:
        return TransportMatrix(json.load(fh)["L"])


def symmetry_defect(L) -> float:
    """``|L - L^T|_F / |L|_F``; zero exactly for symmetric ``L``."""
    L = _mat(L)
    return float(np.linalg.norm(L - L.T) / max(np.linalg.norm(L), 1e-300))


def decompose(L) -> tuple[TransportMatrix, TransportMatrix]:
    """Split ``L`` into symmetric and antisymmetric parts.

    Symmetry of ``S`` and antisymmetry of ``A`` are exact.  ``S + A``
    reproduces ``L`` up to one rounding per entry, and exactly whenever the
    half-sums are representable (e.g. no entry pair spans ~53 binades).
    """
    L = _mat(L)
    return TransportMatrix((L + L.T) / 2.0), TransportMatrix((L - L.T) / 2.0)


def price_impact(L) -> TransportMatrix:
    """The inverse ``M = L^{-1}`` mapping fluxes back to forces."""
    L = _mat(L)
    if np.linalg.cond(L) >= 1e12:
        raise SingularityError("transport matrix is singular or ill-conditioned")
    M = np.linalg.inv(L)
    if np.array_equal(L, L.T):
        M = 0.5 * (M + M.T)
    return TransportMatrix(M)


def round_trip_work(L, loop: ParametricPath, refine: int = 1) -> float:
    """Work ``oint (L x) . dx`` around a closed loop in force space.

    Zero for symmetric ``L`` (the integrand is ``d(x^T L x / 2)``).  In 2D an
    antisymmetric part with upper entry ``a`` contributes ``-2 a`` times the
    signed area.  The integrand is linear, so Simpson is exact on each
    straight segment and only the polygonal approximation of the loop enters.
    """
    L = _mat(L)
    if not loop.closed:
        raise PreconditionError("round-trip work needs a closed loop")
    if loop.dim != L.shape[0]:
        raise DomainError("loop dimension does not match the transport matrix")
    return line_integral(constant_matrix_form(L), loop, refine)


@dataclass(frozen=True, eq=False)
class FlowState:
    eta: np.ndarray
    t: float
    divergence: float


def gradient_flow(
    model: expfam.ExponentialFamilyModel,
    eta0,
    theta_star,
    L=None,
    dt: float = 1e-2,
    steps: int = 1000,
    on_transport: Optional[Callable[[np.ndarray], None]] = None,
) -> list[FlowState]:
    """Integrate ``d eta / dt = L (theta* - theta(eta))`` with classical RK4.

    Without ``L`` the transport matrix is the Fisher metric at the current
    state.  A step whose stages leave the mean domain is halved (up to
    :data:`MAX_HALVINGS` times) and the interval ``dt`` is covered by the
    shorter sub-steps.  Returns ``steps + 1`` states, the initial one first.
    ``on_transport`` sees every transport matrix actually used.
    """
    if dt <= 0:
        raise PreconditionError("dt must be positive")
    if steps < 1:
        raise PreconditionError("steps must be >= 1")
    eta = np.atleast_1d(np.asarray(eta0, dtype=np.float64)).copy()
    if not expfam.in_mean_domain(model, eta):
        raise DomainError("eta0 is not inside the mean domain")
    th_star = np.atleast_1d(np.asarray(theta_star, dtype=np.float64))
    eta_star = expfam.mean_params(model, th_star)
    fixed = None if L is None else _mat(L)
    if fixed is not None and fixed.shape[0] != model.param_dim:
        raise DomainError("transport matrix dimension does not match the model")

    warm = {"theta": None}

    def rhs(e):
        if not expfam.in_mean_domain(model, e):
            return None
        th = expfam.natural_from_mean(model, e, theta0=warm["theta"])
        warm["theta"] = th
        if fixed is None:
            Lm = expfam.fisher_metric(model, th).g
        else:
            Lm = fixed
        if on_transport is not None:
            on_transport(Lm)
        return Lm @ (th_star - th)

    # phi(eta*) is known in closed form from theta*, saving one inversion per state
    phi_star = float(th_star @ eta_star) - expfam.log_partition(model, th_star)

    def divergence(e):
        th = expfam.natural_from_mean(model, e, theta0=warm["theta"])
        d = expfam.log_partition(model, th) + phi_star - float(th @ eta_star)
        return max(d, 0.0)

    states = [FlowState(eta.copy(), 0.0, divergence(eta))]
    t = 0.0
    for k in range(steps):
        target = (k + 1) * dt
        h = dt
        halvings = 0
        while t < target - 1e-12 * dt:
            h = min(h, target - t)
            nxt = _rk4(rhs, eta, h)
            if nxt is None:
                halvings += 1
                if halvings > MAX_HALVINGS:
                    raise StiffnessError("step size underflow while staying in the mean domain")
                h *= 0.5
                continue
            eta, t = nxt, t + h
        t = target
        states.append(FlowState(eta.copy(), t, divergence(eta)))
    return states


def _rk4(rhs, y, h):
    k1 = rhs(y)
    if k1 is None:
        return None
    k2 = rhs(y + 0.5 * h * k1)
    if k2 is None:
        return None
    k3 = rhs(y + 0.5 * h * k2)
    if k3 is None:
        return None
    k4 = rhs(y + h * k3)
    if k4 is None:
        return None
    out = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out if np.all(np.isfinite(out)) else None


def trajectory_to_csv(states: list[FlowState]) -> str:
    d = len(states[0].eta)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"eta_{i + 1}" for i in range(d)] + ["divergence"])
    for s in states:
        w.writerow([format(v, ".9g") for v in [s.t, *s.eta.tolist(), s.divergence]])
    return buf.getvalue()
