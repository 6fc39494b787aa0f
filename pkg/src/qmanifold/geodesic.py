"""Geodesics on a metric source: Cauchy integration, path lengths, shooting."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import RK45
from scipy.optimize import brentq, minimize_scalar

from .errors import DegenerateGroundStateError, MetricDegenerateError
from .geometry import (
    DEFAULT_DET_THRESHOLD,
    DEFAULT_FD_STEP,
    as_metric_source,
    christoffel_from_derivatives,
    fd_steps,
    metric_derivatives,
)
from .model import as_point

TERMINATIONS = ("max_tau", "domain_exit", "dp_capture", "metric_degenerate", "step_failure")


@dataclass(frozen=True)
class GeodesicControls:
    """Integrator and termination settings.

    ``domain`` is a box ``((lo_1, hi_1), (lo_2, hi_2), ...)``; ``dps`` are the
    known degeneracy locations used for the capture rule. A trace is captured
    once it is closer than ``capture_radius`` to a known DP. Sources with exact
    metric gradients give exact Christoffel symbols; otherwise they come from
    finite differences, and since near a conical crossing the metric varies on
    a scale much smaller than the distance ``d`` to it, the step is capped at
    ``dp_step_fraction * d`` there. An adaptive step falling below
    ``min_step`` ends the trace with ``step_failure``; this happens when a
    trace runs into a degeneracy that is not listed in ``dps``.
    """

    rtol: float = 1e-9
    atol: float = 1e-9
    fd_step: float = DEFAULT_FD_STEP
    richardson: bool = True
    det_threshold: float = DEFAULT_DET_THRESHOLD
    domain: tuple[tuple[float, float], ...] | None = None
    dps: tuple[tuple[float, ...], ...] = ()
    capture_radius: float = 1e-3
    dp_step_fraction: float = 1e-5
    max_steps: int = 200_000
    min_step: float = 1e-6
    first_step: float | None = None
    max_step: float = math.inf
    cache_size: int = 256


@dataclass
class GeodesicTrace:
    """Sampled geodesic.

    ``lam`` and ``dlam`` have shape (n, D); ``speed`` is the geometric speed
    ``v``, ``ordinary_speed`` the Euclidean speed ``u``; ``length`` and
    ``arc`` accumulate ``v`` and ``u`` over ``tau``.
    """

    tau: NDArray[np.float64]
    lam: NDArray[np.float64]
    dlam: NDArray[np.float64]
    speed: NDArray[np.float64]
    ordinary_speed: NDArray[np.float64]
    length: NDArray[np.float64]
    arc: NDArray[np.float64]
    termination: str
    message: str = ""
    det: NDArray[np.float64] | None = None
    captured_by: int | None = None

    @property
    def speed_drift(self) -> float:
        v0 = self.speed[0]
        return float(np.max(np.abs(self.speed - v0)) / v0)

    @property
    def end(self) -> NDArray[np.float64]:
        return self.lam[-1]

    def to_dict(self) -> dict:
        return {
            "termination": self.termination,
            "message": self.message,
            "captured_by": self.captured_by,
            "speed_drift": self.speed_drift,
            "tau": self.tau.tolist(),
            "lam": self.lam.tolist(),
            "dlam": self.dlam.tolist(),
            "speed": self.speed.tolist(),
            "ordinary_speed": self.ordinary_speed.tolist(),
            "length": self.length.tolist(),
            "arc": self.arc.tolist(),
            "det": None if self.det is None else self.det.tolist(),
        }


class ConnectionEvaluator:
    """Metric and Christoffel symbols on demand, memoized on exact coordinates.

    The cache key is the raw bytes of the point, so repeated requests (the
    first-same-as-last stage of the Runge-Kutta pair, speed bookkeeping) hit
    without perturbing the values that are returned.
    """

    def __init__(self, source, controls: GeodesicControls):
        self.source = as_metric_source(source)
        self.controls = controls
        self.dps = np.array(controls.dps, dtype=float).reshape(-1, self.source.n_params) if controls.dps else None
        self._cache: OrderedDict[bytes, tuple[NDArray, NDArray]] = OrderedDict()

    def nearest_dp(self, lam: NDArray) -> tuple[int | None, float]:
        if self.dps is None or len(self.dps) == 0:
            return None, math.inf
        d = np.linalg.norm(self.dps - lam, axis=1)
        i = int(np.argmin(d))
        return i, float(d[i])

    def nearest_dp_on_segment(self, a: NDArray, b: NDArray) -> tuple[int | None, float]:
        """Closest known DP to the straight segment ``a -> b`` (one accepted step)."""
        if self.dps is None or len(self.dps) == 0:
            return None, math.inf
        ab = b - a
        L2 = float(ab @ ab)
        t = np.zeros(len(self.dps)) if L2 == 0 else np.clip((self.dps - a) @ ab / L2, 0.0, 1.0)
        d = np.linalg.norm(a + t[:, None] * ab - self.dps, axis=1)
        i = int(np.argmin(d))
        return i, float(d[i])

    def _steps(self, lam: NDArray) -> NDArray:
        h = fd_steps(lam, self.controls.fd_step)
        _, dist = self.nearest_dp(lam)
        if math.isfinite(dist):
            h = np.minimum(h, self.controls.dp_step_fraction * dist)
        return h

    def __call__(self, lam: NDArray) -> tuple[NDArray, NDArray]:
        key = lam.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        md = metric_derivatives(self.source, lam, self._steps(lam), second=False, richardson=self.controls.richardson)
        det = float(np.linalg.det(md.metric))
        if det < self.controls.det_threshold or md.stencil_min_det < self.controls.det_threshold:
            raise MetricDegenerateError(f"metric near-degenerate at {tuple(lam)} (det {det:.3g})")
        out = (md.metric, christoffel_from_derivatives(md.metric, md.first))
        self._cache[key] = out
        if len(self._cache) > self.controls.cache_size:
            self._cache.popitem(last=False)
        return out


def _capture_point(dense, t0: float, t1: float, dp: NDArray, radius: float, D: int):
    """First state of the step ``[t0, t1]`` within ``radius`` of ``dp``, or None.

    The closest approach on the dense output is located first; the entry
    into the capture disc is then bracketed between ``t0`` and that point.
    """

    def dist(t):
        return float(np.linalg.norm(np.asarray(dense(t))[:D] - dp))

    ts = np.linspace(t0, t1, 65)
    d = np.linalg.norm(dense(ts)[:D].T - dp, axis=1)
    k = int(np.argmin(d))
    res = minimize_scalar(dist, bounds=(ts[max(k - 1, 0)], ts[min(k + 1, 64)]), method="bounded",
                          options={"xatol": 1e-14})
    t_min, d_min = (float(res.x), float(res.fun)) if res.fun < d[k] else (float(ts[k]), float(d[k]))
    if d_min > radius:
        return None
    if dist(t0) <= radius:
        t = t0
    else:
        t = brentq(lambda x: dist(x) - radius, t0, t_min, xtol=1e-14)
        if dist(t) > radius:
            t = t_min
    return float(t), np.asarray(dense(t), dtype=float)


def integrate_cauchy(
    source,
    lam0: ArrayLike,
    dlam0: ArrayLike,
    tau_max: float,
    controls: GeodesicControls | None = None,
) -> GeodesicTrace:
    """Integrate ``lam'' + Gamma(lam') (lam') = 0`` from ``lam0`` with velocity ``dlam0``.

    Uses the Dormand-Prince 5(4) embedded pair with adaptive steps. The trace
    always contains every accepted step; the ``termination`` field says why
    integration stopped.
    """
    controls = controls or GeodesicControls()
    lam0 = as_point(lam0)
    dlam0 = np.asarray(dlam0, dtype=float)
    D = len(lam0)
    if not np.any(dlam0):
        raise ValueError("initial velocity must be non-zero")
    conn = ConnectionEvaluator(source, controls)
    g0, _ = conn(lam0)  # raises when the start point is degenerate

    def rhs(_t, y):
        lam, vel = y[:D], y[D:]
        _, gam = conn(lam)
        return np.concatenate([vel, -np.einsum("abc,b,c->a", gam, vel, vel)])

    solver = RK45(
        rhs,
        0.0,
        np.concatenate([lam0, dlam0]),
        tau_max,
        rtol=controls.rtol,
        atol=controls.atol,
        first_step=controls.first_step,
        max_step=controls.max_step,
    )
    taus, ys, gs = [0.0], [solver.y.copy()], [g0]
    termination, message, captured = "max_tau", "", None

    def outside(lam):
        if controls.domain is None:
            return False
        return any(not (lo <= x <= hi) for x, (lo, hi) in zip(lam, controls.domain))

    for _ in range(controls.max_steps):
        if solver.status != "running":
            break
        try:
            msg = solver.step()
        except (MetricDegenerateError, DegenerateGroundStateError) as exc:
            termination, message = "metric_degenerate", str(exc)
            break
        if solver.status == "failed":
            termination, message = "step_failure", str(msg)
            break
        if solver.status == "running" and solver.step_size < controls.min_step:
            termination, message = "step_failure", f"step size {solver.step_size:.3g} below {controls.min_step:.3g}"
            break
        lam = solver.y[:D]
        t_new, y_new = solver.t, solver.y.copy()
        idx, dist = conn.nearest_dp_on_segment(ys[-1][:D], lam)
        hit = None
        if dist < controls.capture_radius:
            hit = _capture_point(solver.dense_output(), taus[-1], solver.t, conn.dps[idx], controls.capture_radius, D)
            if hit is not None:
                t_new, y_new = hit
        try:
            g, _ = conn(y_new[:D].copy())
        except (MetricDegenerateError, DegenerateGroundStateError) as exc:
            termination, message = "metric_degenerate", str(exc)
            break
        taus.append(t_new)
        ys.append(y_new)
        gs.append(g)
        if hit is not None:
            dist = float(np.linalg.norm(y_new[:D] - conn.dps[idx]))
            termination, captured = "dp_capture", idx
            message = f"within {dist:.3g} of DP {idx}"
            break
        if outside(lam):
            termination = "domain_exit"
            break
        if solver.status == "finished":
            termination = "max_tau"
            break
    else:
        termination, message = "step_failure", f"exceeded {controls.max_steps} steps"

    tau = np.array(taus)
    y = np.array(ys)
    g = np.array(gs)
    lam, dlam = y[:, :D], y[:, D:]
    v = np.sqrt(np.einsum("na,nab,nb->n", dlam, g, dlam))
    u = np.linalg.norm(dlam, axis=1)
    dt = np.diff(tau)
    length = np.concatenate([[0.0], np.cumsum(0.5 * dt * (v[1:] + v[:-1]))])
    arc = np.concatenate([[0.0], np.cumsum(0.5 * dt * (u[1:] + u[:-1]))])
    det = np.linalg.det(g) if D > 1 else g[:, 0, 0]
    return GeodesicTrace(tau, lam, dlam, v, u, length, arc, termination, message, det, captured)


# --------------------------------------------------------------------------
# path lengths
# --------------------------------------------------------------------------


def _gauss_nodes(a: float, b: float, segments: int, order: int) -> tuple[NDArray, NDArray]:
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, segments + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def path_length(
    source,
    path: Callable[[float], ArrayLike] | ArrayLike,
    tau_range: tuple[float, float] | None = None,
    velocity: Callable[[float], ArrayLike] | None = None,
    segments: int = 64,
    order: int = 8,
    tau: ArrayLike | None = None,
) -> tuple[float, float]:
    """Geometric length and Euclidean length of a path.

    ``path`` is either a callable ``tau -> lambda`` on ``tau_range`` or an
    array of sampled points (optionally with their ``tau`` values), which is
    interpolated by a cubic spline. Both integrals use composite
    Gauss-Legendre quadrature.
    """
    src = as_metric_source(source)
    if callable(path):
        if tau_range is None:
            raise ValueError("tau_range is required for a callable path")
        a, b = tau_range
        pos = path
        if velocity is None:
            def velocity(t, _h=1e-6 * max(1.0, abs(b - a))):
                return (np.asarray(pos(t + _h), float) - np.asarray(pos(t - _h), float)) / (2 * _h)
    else:
        from scipy.interpolate import CubicSpline

        pts = np.asarray(path, dtype=float)
        if len(pts) < 2 or np.allclose(pts, pts[0]):
            return 0.0, 0.0
        t = np.arange(len(pts), dtype=float) if tau is None else np.asarray(tau, dtype=float)
        spline = CubicSpline(t, pts, axis=0)
        a, b = float(t[0]), float(t[-1])
        pos, velocity = spline, spline.derivative()
    if b == a:
        return 0.0, 0.0
    nodes, weights = _gauss_nodes(a, b, segments, order)
    lam = np.array([np.asarray(pos(t), float) for t in nodes])
    vel = np.array([np.asarray(velocity(t), float) for t in nodes])
    moving = np.linalg.norm(vel, axis=1) > 0
    v = np.zeros(len(nodes))
    if np.any(moving):
        g = src.metrics(lam[moving])
        v[moving] = np.sqrt(np.maximum(np.einsum("na,nab,nb->n", vel[moving], g, vel[moving]), 0.0))
    u = np.linalg.norm(vel, axis=1)
    return float(weights @ v), float(weights @ u)


# --------------------------------------------------------------------------
# two-point problems by shooting
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ShootingControls:
    """Shooting settings: ``angles`` initial directions over [0, 2 pi).

    ``angle_range`` restricts the scan to a closed sector ``[a, b]`` (no
    wrap-around), which allows a fine scan where solutions are expected.
    """

    angles: int = 720
    angle_range: tuple[float, float] | None = None
    max_length: float = 10.0
    miss_tol: float = 1e-6
    angle_tol: float = 1e-12
    distinct_angle: float = 1e-6
    geodesic: GeodesicControls = field(default_factory=GeodesicControls)


@dataclass
class DirichletSolution:
    angle: float
    miss: float
    length: float
    trace: GeodesicTrace


@dataclass
class DirichletResult:
    """All converged shots sorted by geometric length, plus the scan profile."""

    solutions: list[DirichletSolution]
    scan_angles: NDArray[np.float64]
    scan_miss: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def __getitem__(self, i):
        return self.solutions[i]


def _hermite(trace: GeodesicTrace, i: int, s: float) -> tuple[NDArray, NDArray]:
    """Position and tau-velocity on the cubic Hermite interpolant of step ``i``."""
    lam, dlam, tau = trace.lam, trace.dlam, trace.tau
    dt = tau[i + 1] - tau[i]
    h = (2 * s**3 - 3 * s**2 + 1, s**3 - 2 * s**2 + s, -2 * s**3 + 3 * s**2, s**3 - s**2)
    d = (6 * s**2 - 6 * s, 3 * s**2 - 4 * s + 1, -6 * s**2 + 6 * s, 3 * s**2 - 2 * s)
    pos = h[0] * lam[i] + h[1] * dt * dlam[i] + h[2] * lam[i + 1] + h[3] * dt * dlam[i + 1]
    vel = d[0] * lam[i] + d[1] * dt * dlam[i] + d[2] * lam[i + 1] + d[3] * dt * dlam[i + 1]
    return pos, vel


def _closest_approach(trace: GeodesicTrace, target: NDArray) -> tuple[float, int, float]:
    """Signed miss distance and the sample segment and fraction where it occurs.

    Each step is interpolated with a cubic Hermite segment, sampled coarsely
    and then refined by a root of the squared-distance slope around the best
    sample.
    The sign is that of ``cross(direction of travel, target - closest point)``.
    """
    lam, dlam, tau = trace.lam, trace.dlam, trace.tau
    if len(tau) < 2:
        off = target - lam[0]
        sign = 1.0 if dlam[0][0] * off[1] - dlam[0][1] * off[0] >= 0 else -1.0
        return sign * float(np.linalg.norm(off)), 0, 0.0
    s = np.linspace(0.0, 1.0, 33)
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    dt = np.diff(tau)[:, None, None]
    p = (h00[None, :, None] * lam[:-1, None] + h10[None, :, None] * dt * dlam[:-1, None]
         + h01[None, :, None] * lam[1:, None] + h11[None, :, None] * dt * dlam[1:, None])
    d = np.linalg.norm(p - target, axis=2)
    i, k = np.unravel_index(int(np.argmin(d)), d.shape)
    i, k = int(i), int(k)
    # candidate intervals around the best sample, spilling into neighbouring steps at the ends
    cands = [(i, s[max(k - 1, 0)], s[min(k + 1, 32)])]
    if k == 0 and i > 0:
        cands.append((i - 1, s[31], 1.0))
    if k == 32 and i + 1 < len(tau) - 1:
        cands.append((i + 1, 0.0, s[1]))
    best = (float(d[i, k]), i, float(s[k]))
    for j, lo, hi in cands:

        def slope(x, j=j):
            pos, vel = _hermite(trace, j, x)
            return float((pos - target) @ vel)

        if slope(lo) < 0 < slope(hi):
            x = brentq(slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            dist = float(np.linalg.norm(_hermite(trace, j, x)[0] - target))
            if dist < best[0]:
                best = (dist, j, float(x))
    dist, i, frac = best
    point, vel = _hermite(trace, i, frac)
    off = target - point
    sign = 1.0 if vel[0] * off[1] - vel[1] * off[0] >= 0 else -1.0
    return sign * dist, i, frac


def _truncate(trace: GeodesicTrace, i: int, frac: float) -> GeodesicTrace:
    n = i + 2 if frac > 0 else i + 1
    return replace(
        trace,
        tau=trace.tau[:n], lam=trace.lam[:n], dlam=trace.dlam[:n], speed=trace.speed[:n],
        ordinary_speed=trace.ordinary_speed[:n], length=trace.length[:n], arc=trace.arc[:n],
        det=None if trace.det is None else trace.det[:n],
    )


def _refine_root(f, a0: float, a1: float, m0: float, m1: float, tol: float) -> float | None:
    """Root of the miss function in ``[a0, a1]``, or None for a jump.

    The closest approach can switch between branches of a trace, giving a
    sign change without a zero. A coarse solve first narrows the bracket to
    1e-3 of its width; a genuine root leaves a miss far below the end values
    there, while at a jump it stays comparable to them.
    """
    coarse = 1e-3 * (a1 - a0)
    r = brentq(f, a0, a1, xtol=coarse, maxiter=200)
    if abs(f(r)) > 0.1 * max(abs(m0), abs(m1)):
        return None
    lo, hi = max(a0, r - coarse), min(a1, r + coarse)
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if flo * fhi < 0:
        return brentq(f, lo, hi, xtol=tol, maxiter=200)
    return brentq(f, a0, a1, xtol=tol, maxiter=200)


def solve_dirichlet(
    source,
    lam_i: ArrayLike,
    lam_f: ArrayLike,
    controls: ShootingControls | None = None,
) -> DirichletResult:
    """Find geodesics joining ``lam_i`` and ``lam_f`` by shooting on the launch angle.

    Each shot leaves ``lam_i`` with unit geometric speed, so ``tau`` is the
    arc length and ``max_length`` bounds the search. Sign changes of the miss
    distance between neighbouring scan angles are refined with Brent's method;
    closely spaced solutions below the scan resolution can be missed.
    """
    controls = controls or ShootingControls()
    src = as_metric_source(source)
    lam_i, lam_f = as_point(lam_i), as_point(lam_f)
    g_i = src.metrics(lam_i[None])[0]
    gc = controls.geodesic

    def shoot(angle: float) -> tuple[float, GeodesicTrace, int, float]:
        e = np.array([math.cos(angle), math.sin(angle)])
        e = e / math.sqrt(e @ g_i @ e)
        trace = integrate_cauchy(src, lam_i, e, controls.max_length, gc)
        miss, i, frac = _closest_approach(trace, lam_f)
        return miss, trace, i, frac

    if controls.angle_range is None:
        angles = np.linspace(0.0, 2 * math.pi, controls.angles, endpoint=False)
        pairs = [(k, (k + 1) % len(angles)) for k in range(len(angles))]
        upper = np.append(angles[1:], 2 * math.pi)
    else:
        lo, hi = controls.angle_range
        if not lo < hi:
            raise ValueError("angle_range must satisfy a < b")
        angles = np.linspace(lo, hi, controls.angles)
        pairs = [(k, k + 1) for k in range(len(angles) - 1)] + [(len(angles) - 1, None)]
        upper = np.append(angles[1:], hi)
    misses = np.array([shoot(a)[0] for a in angles])
    found: list[DirichletSolution] = []
    for k, k1 in pairs:
        a0, a1 = angles[k], upper[k]
        m0, m1 = misses[k], (misses[k1] if k1 is not None else misses[k])
        if m0 == 0.0:
            root = a0
        elif m0 * m1 < 0:
            root = _refine_root(lambda a: shoot(a)[0], a0, a1, m0, m1, controls.angle_tol)
            if root is None:
                continue
        else:
            continue
        miss, trace, i, frac = shoot(root)
        if abs(miss) > controls.miss_tol:
            continue
        root = root % (2 * math.pi)
        if any(abs(math.remainder(root - s.angle, 2 * math.pi)) < controls.distinct_angle for s in found):
            continue
        cut = _truncate(trace, i, frac)
        length = float(trace.length[i] + frac * (trace.length[min(i + 1, len(trace.length) - 1)] - trace.length[i]))
        found.append(DirichletSolution(root, miss, length, cut))
    found.sort(key=lambda s: s.length)
    return DirichletResult(found, angles, misses)
