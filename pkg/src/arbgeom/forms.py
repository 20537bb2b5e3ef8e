"""Numerical differential 1-forms and the Boyling wealth form.

The Boyling form

    psi = y^3 (1 - y)^2 dx + [y^3 - 2 (1 - y)^2] dy

is locally integrable everywhere on the plane (every 1-form in 2D is), yet on
the strip 0 < y < 1 its leaves are the level sets of

    t(x, y) = x + 1/y^2 + 1/(1 - y)

and no integrating factor bounded away from 0 and infinity exists: the
required decay of h'(t) is t^(-3/2) near y = 0 and t^(-2) near y = 1.
Everything here is numerical evidence for that statement, not a proof.
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import (
    DegenerateDirectionError,
    DomainError,
    PreconditionError,
    UnsupportedDimensionError,
)

Covector = np.ndarray


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; each bound is open or closed independently."""

    lower: tuple
    upper: tuple
    lower_closed: tuple = None
    upper_closed: tuple = None

    def __post_init__(self):
        n = len(self.lower)
        if len(self.upper) != n:
            raise ValueError("lower and upper bounds differ in length")
        if self.lower_closed is None:
            object.__setattr__(self, "lower_closed", (True,) * n)
        if self.upper_closed is None:
            object.__setattr__(self, "upper_closed", (True,) * n)

    @classmethod
    def unbounded(cls, dim: int) -> "Box":
        return cls((-math.inf,) * dim, (math.inf,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, p) -> bool:
        for v, lo, hi, lc, uc in zip(p, self.lower, self.upper, self.lower_closed, self.upper_closed):
            if not math.isfinite(v):
                return False
            if v < lo or (v == lo and not lc):
                return False
            if v > hi or (v == hi and not uc):
                return False
        return True


@dataclass(frozen=True)
class OneForm:
    """A 1-form ``sum_i coeffs(p)[i] dx_i`` on a box.

    ``jacobian``, when given, returns the matrix ``J[i, j] = d coeff_i / d x_j``
    and is used only as an oracle for the finite-difference routines.
    ``kernel`` names a compiled fast path (only ``"boyling"`` exists).
    ``vectorized`` forms accept a ``(k, dim)`` stack of points and return a
    ``(k, dim)`` stack of covectors, which lets quadrature batch its nodes.
    """

    dim: int
    coeffs: Callable[[np.ndarray], Sequence[float]]
    domain: Box = None
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    kernel: Optional[str] = None
    vectorized: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.domain is None:
            object.__setattr__(self, "domain", Box.unbounded(self.dim))
        if self.domain.dim != self.dim:
            raise ValueError("domain dimension does not match form dimension")

    def __call__(self, p) -> Covector:
        return eval_form(self, p)


@dataclass(frozen=True)
class ParametricPath:
    """Polygonal path through ``samples`` (shape ``(k, dim)``)."""

    samples: np.ndarray
    closed: bool = False

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] < 2:
            raise ValueError("a path needs at least 2 samples")
        if self.closed and np.max(np.abs(s[0] - s[-1])) > 1e-12:
            raise ValueError("closed path must end where it starts")
        if np.any(np.all(s[1:] == s[:-1], axis=1)):
            raise ValueError("consecutive samples must be distinct")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def reversed(self) -> "ParametricPath":
        return ParametricPath(self.samples[::-1].copy(), self.closed)

    @classmethod
    def polyline(cls, points, closed: bool = False) -> "ParametricPath":
        pts = [tuple(map(float, p)) for p in points]
        if closed and pts[0] != pts[-1]:
            pts.append(pts[0])
        return cls(np.array(pts), closed)

    @classmethod
    def rectangle(cls, x0, x1, y0, y1, clockwise: bool = False) -> "ParametricPath":
        corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        if clockwise:
            corners = corners[::-1]
        return cls.polyline(corners, closed=True)

    @classmethod
    def from_function(cls, fn: Callable[[float], Sequence[float]], n: int, closed: bool = True) -> "ParametricPath":
        """Sample ``fn`` on ``[0, 1]`` at ``n`` intervals.

        For closed paths the last sample is set to the first exactly.
        """
        pts = np.array([fn(k / n) for k in range(n + 1)], dtype=np.float64)
        if closed:
            pts[-1] = pts[0]
        return cls(pts, closed)

    @classmethod
    def circle(cls, n: int = 20000, radius: float = 1.0, center=(0.0, 0.0), clockwise: bool = False):
        sign = -1.0 if clockwise else 1.0
        cx, cy = center
        return cls.from_function(
            lambda s: (cx + radius * math.cos(2 * math.pi * s), cy + sign * radius * math.sin(2 * math.pi * s)),
            n,
        )

    def signed_area(self) -> float:
        """Shoelace area of a closed planar path (positive counterclockwise)."""
        if self.dim != 2:
            raise UnsupportedDimensionError("signed area needs a planar path")
        x, y = self.samples[:, 0], self.samples[:, 1]
        return 0.5 * math.fsum(x[:-1] * y[1:] - x[1:] * y[:-1])


class Boundary(str, enum.Enum):
    LOWER = "lower"
    UPPER = "upper"


@dataclass(frozen=True)
class LeafCoordinate:
    value: float
    valid: bool


@dataclass(frozen=True)
class DecayProbeResult:
    boundary: Boundary
    fitted_slope: float
    residual: float
    samples_used: int
    log_t: np.ndarray = field(repr=False, compare=False, default=None)
    log_w: np.ndarray = field(repr=False, compare=False, default=None)

    def to_csv(self) -> str:
        return _csv_text(["log_t", "log_w"], zip(self.log_t, self.log_w))


# -- constructors ------------------------------------------------------------


def _boyling_coeffs(p):
    y = p[..., 1]
    return np.stack([y**3 * (1.0 - y) ** 2, y**3 - 2.0 * (1.0 - y) ** 2], axis=-1)


def _boyling_jacobian(p):
    y = p[1]
    dp_dy = 3.0 * y**2 * (1.0 - y) ** 2 - 2.0 * y**3 * (1.0 - y)
    dq_dy = 3.0 * y**2 + 4.0 * (1.0 - y)
    return np.array([[0.0, dp_dy], [0.0, dq_dy]])


def boyling_form() -> OneForm:
    """The Boyling wealth form on the whole plane."""
    return OneForm(2, _boyling_coeffs, Box.unbounded(2), jacobian=_boyling_jacobian, kernel="boyling", vectorized=True)


def exact_form(grad: Callable, dim: int, domain: Box = None, vectorized: bool = False) -> OneForm:
    """The differential ``dg`` of a potential, given the gradient of ``g``."""
    return OneForm(dim, grad, domain, vectorized=vectorized)


def zero_form(dim: int) -> OneForm:
    return OneForm(dim, lambda p: np.zeros(dim))


def constant_matrix_form(L) -> OneForm:
    """The linear form ``x -> (L x) . dx``."""
    L = np.asarray(L, dtype=np.float64)
    return OneForm(L.shape[0], lambda p: p @ L.T, vectorized=True)


# -- pointwise operations ----------------------------------------------------


def _as_point(form: OneForm, p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (form.dim,):
        raise DomainError(f"point has shape {p.shape}, form has dim {form.dim}")
    if not form.domain.contains(p):
        raise DomainError(f"point {tuple(p)} is outside the form's domain")
    return p


def eval_form(form: OneForm, p) -> Covector:
    p = _as_point(form, p)
    return np.asarray(form.coeffs(p), dtype=np.float64)


def _partials(form: OneForm, p: np.ndarray, h: float) -> np.ndarray:
    """Central-difference matrix ``D[i, j] = d coeff_i / d x_j``."""
    d = np.empty((form.dim, form.dim))
    for j in range(form.dim):
        e = np.zeros(form.dim)
        e[j] = h
        d[:, j] = (eval_form(form, p + e) - eval_form(form, p - e)) / (2.0 * h)
    return d


def exterior_derivative_coeff(form: OneForm, p, h: float = 1e-5) -> float:
    """The single coefficient of ``d psi = (dQ/dx - dP/dy) dx^dy`` in 2D."""
    if form.dim != 2:
        raise UnsupportedDimensionError(f"exterior derivative coefficient needs dim 2, got {form.dim}")
    if h <= 0:
        raise PreconditionError("step h must be positive")
    p = _as_point(form, p)
    d = _partials(form, p, h)
    return float(d[1, 0] - d[0, 1])


def frobenius_defect(form: OneForm, p, h: float = 1e-5) -> float:
    """Euclidean norm of the 3-form ``psi ^ d psi`` at ``p``.

    Identically zero in two dimensions, where there are no 3-forms.
    """
    if form.dim < 2:
        raise UnsupportedDimensionError("Frobenius defect needs dim >= 2")
    p = _as_point(form, p)
    if form.dim == 2:
        return 0.0
    psi = eval_form(form, p)
    d = _partials(form, p, h)
    dpsi = d.T - d  # dpsi[j, k] = d_j psi_k - d_k psi_j
    total = 0.0
    for i, j, k in itertools.combinations(range(form.dim), 3):
        c = psi[i] * dpsi[j, k] + psi[j] * dpsi[k, i] + psi[k] * dpsi[i, j]
        total += c * c
    return math.sqrt(total)


# -- integrals ---------------------------------------------------------------


def _check_path(form: OneForm, path: ParametricPath):
    if path.dim != form.dim:
        raise DomainError("path dimension does not match form")
    for s in path.samples:
        if not form.domain.contains(s):
            raise DomainError(f"path sample {tuple(s)} lies outside the form's domain")


def line_integral(form: OneForm, path: ParametricPath, refine: int = 8) -> float:
    """Composite Simpson quadrature of ``psi`` along a polygonal path.

    Nodes are placed symmetrically in each segment and the terms summed with
    ``math.fsum``, so reversing the path negates the result exactly.
    """
    if refine < 1:
        raise PreconditionError("refine must be >= 1")
    _check_path(form, path)
    n = 2 * refine
    weights = np.array([1.0] + [4.0 if k % 2 else 2.0 for k in range(1, n)] + [1.0]) / (3.0 * n)
    pts = path.samples
    a, b = pts[:-1], pts[1:]
    delta = b - a
    if form.vectorized:
        # nodes of every segment at once: shape (segments, n + 1, dim)
        k = np.arange(n + 1, dtype=np.float64)[None, :, None]
        nodes = ((n - k) * a[:, None, :] + k * b[:, None, :]) / n
        cov = np.asarray(form.coeffs(nodes.reshape(-1, form.dim)), dtype=np.float64).reshape(nodes.shape)
        terms = weights[None, :, None] * (cov * delta[:, None, :])
        return math.fsum(terms.ravel())
    terms = []
    for ai, bi, di in zip(a, b, delta):
        for k, w in enumerate(weights):
            node = ((n - k) * ai + k * bi) / n
            terms.extend(w * (eval_form(form, node) * di))
    return math.fsum(terms)


def loop_gain(form: OneForm, loop: ParametricPath, refine: int = 8) -> float:
    """Net wealth collected around a closed strategy."""
    if not loop.closed:
        raise PreconditionError("loop_gain requires a closed path")
    return line_integral(form, loop, refine)


def green_oracle(form: OneForm, x0, x1, y0, y1, n: int = 64) -> float:
    """Gauss-Legendre double integral of ``dQ/dx - dP/dy`` over a rectangle.

    Uses the form's analytic Jacobian when present, else central differences.
    Independent of the path quadrature in :func:`line_integral`.
    """
    if form.dim != 2:
        raise UnsupportedDimensionError("Green's theorem oracle is planar")
    nodes, weights = np.polynomial.legendre.leggauss(n)
    xs = 0.5 * (x1 - x0) * nodes + 0.5 * (x1 + x0)
    ys = 0.5 * (y1 - y0) * nodes + 0.5 * (y1 + y0)
    total = 0.0
    for xi, wx in zip(xs, weights):
        for yj, wy in zip(ys, weights):
            if form.jacobian is not None:
                j = form.jacobian(np.array([xi, yj]))
                curl = j[1, 0] - j[0, 1]
            else:
                curl = exterior_derivative_coeff(form, (xi, yj))
            total += wx * wy * curl
    return total * 0.25 * (x1 - x0) * (y1 - y0)


# -- foliation ---------------------------------------------------------------


def leaf_invariant(p) -> LeafCoordinate:
    """Leaf label ``t = x + 1/y^2 + 1/(1-y)``, valid only on ``0 < y < 1``."""
    if len(p) != 2:
        raise UnsupportedDimensionError("leaf invariant is defined for planar points")
    x, y = float(p[0]), float(p[1])
    if not (0.0 < y < 1.0):
        return LeafCoordinate(math.nan, False)
    return LeafCoordinate(x + 1.0 / (y * y) + 1.0 / (1.0 - y), True)


def _annihilator(form: OneForm, p):
    c = eval_form(form, p)
    v = np.array([c[1], -c[0]])
    norm = math.hypot(v[0], v[1])
    if norm < 1e-12:
        return None
    return v / norm


def _rk4_step(form: OneForm, p, h):
    try:
        k1 = _annihilator(form, p)
        if k1 is None:
            return None
        k2 = _annihilator(form, p + 0.5 * h * k1)
        if k2 is None:
            return None
        k3 = _annihilator(form, p + 0.5 * h * k2)
        if k3 is None:
            return None
        k4 = _annihilator(form, p + h * k3)
        if k4 is None:
            return None
    except DomainError:
        return None
    return p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def characteristic_curve(form: OneForm, start, arclength: float, step: float = 1e-3) -> ParametricPath:
    """Trace the leaf of ``psi = 0`` through ``start`` by arclength RK4.

    The direction field is ``(Q, -P) / |(Q, -P)|``, which is annihilated by
    ``psi``.  Tracing stops early at the domain boundary or where the field
    vanishes.
    """
    if form.dim != 2:
        raise UnsupportedDimensionError("characteristic curves are computed in 2D only")
    if step <= 0:
        raise PreconditionError("step must be positive")
    start = _as_point(form, start)
    if _annihilator(form, start) is None:
        raise DegenerateDirectionError(f"form vanishes at {tuple(start)}")

    if form.kernel == "boyling":
        b = form.domain
        pts = kernels.boyling_characteristic(
            float(start[0]), float(start[1]), float(arclength), float(step),
            b.lower[0], b.upper[0], b.lower[1], b.upper[1],
        )
        return ParametricPath(pts, closed=False)

    out = [start]
    p = start
    travelled = 0.0
    while travelled < arclength * (1.0 - 1e-15):
        h = min(step, arclength - travelled)
        nxt = _rk4_step(form, p, h)
        if nxt is None or not form.domain.contains(nxt):
            break
        out.append(nxt)
        p = nxt
        travelled += h
    if len(out) < 2:
        raise DegenerateDirectionError("characteristic curve could not leave its start point")
    return ParametricPath(np.array(out), closed=False)


def curve_to_csv(path: ParametricPath) -> str:
    """CSV with header ``s,x,y,t``; ``s`` is cumulative polygonal arclength."""
    pts = path.samples
    seg = np.hypot(*(pts[1:] - pts[:-1]).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    rows = []
    for si, (x, y) in zip(s, pts):
        lc = leaf_invariant((x, y))
        rows.append((si, x, y, lc.value if lc.valid else math.nan))
    return _csv_text(["s", "x", "y", "t"], rows)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(float(v), ".9g") for v in row])
    return buf.getvalue()


# -- decay probe -------------------------------------------------------------


def boyling_weight(y: np.ndarray) -> np.ndarray:
    """``w(y) = y^3 (1-y)^2``: the magnitude ``f h'(t)`` must match with ``f`` fixed."""
    return y**3 * (1.0 - y) ** 2


def decay_exponent_probe(boundary, x0: float = 0.0, y_min_gap: float = 1e-3, n_samples: int = 20) -> DecayProbeResult:
    """Fit the log-log slope of ``w`` against ``t`` approaching one strip edge.

    The distance to the edge runs geometrically over the decade
    ``[y_min_gap, 10 * y_min_gap]`` (capped at 0.5).  With the integrating
    factor held at 1, the fitted slope is the decay exponent that ``h'(t)``
    would need: -3/2 near ``y = 0`` and -2 near ``y = 1``.
    """
    boundary = Boundary(boundary)
    if not (0.0 < y_min_gap <= 0.1):
        raise PreconditionError("y_min_gap must lie in (0, 0.1]")
    if n_samples < 3:
        raise PreconditionError("need at least 3 samples")
    gaps = np.geomspace(min(10.0 * y_min_gap, 0.5), y_min_gap, n_samples)
    ys = gaps if boundary is Boundary.LOWER else 1.0 - gaps
    t = np.array([leaf_invariant((x0, y)).value for y in ys])
    if np.any(t <= 0):
        raise DomainError("leaf coordinate must be positive to take logs; increase x0")
    log_t = np.log(t)
    log_w = np.log(boyling_weight(ys))
    coef, *_ = np.linalg.lstsq(np.column_stack([log_t, np.ones_like(log_t)]), log_w, rcond=None)
    resid = log_w - (coef[0] * log_t + coef[1])
    return DecayProbeResult(
        boundary=boundary,
        fitted_slope=float(coef[0]),
        residual=float(np.sqrt(np.mean(resid**2))),
        samples_used=n_samples,
        log_t=log_t,
        log_w=log_w,
    )
