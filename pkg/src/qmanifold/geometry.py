"""Ground-state geometry: geometric tensor, metric, connection and curvature.

Everything downstream of the metric works on a *metric source*: any object
with ``n_params`` and a batched ``metrics(points) -> (n, D, D)`` method.
Hamiltonian families are turned into metric sources through the
perturbation sum over excited states; closed-form metrics and pullbacks
through coordinate maps are sources too, so the same Christoffel/Ricci
code serves the quantum model, the two-level sphere and condensate charts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateGroundStateError, MetricDegenerateError
from .model import HamiltonianFamily, as_point
from .spectrum import diagonalize_batch

DEFAULT_FD_STEP = 1e-4
DEFAULT_OVERLAP_STEP = 1e-5
DEFAULT_DET_THRESHOLD = 1e-10
GAP_FLOOR = 1e-12


# --------------------------------------------------------------------------
# geometric tensor
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GeometricTensor:
    """``G`` with metric ``g = Re G`` and Berry curvature ``F = -2 Im G``."""

    G: NDArray
    metric: NDArray[np.float64]
    berry: NDArray[np.float64]
    gap: float

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.metric))


def geometric_tensor_batch(family: HamiltonianFamily, lams: ArrayLike, gap_floor: float = GAP_FLOOR) -> NDArray:
    """Perturbation-sum geometric tensor at many points; returns (n, D, D).

    ``G_mn = sum_{k>0} <0|d_m H|k><k|d_n H|0> / (E_k - E_0)^2``. Complex output
    only for complex families.
    """
    lams = np.atleast_2d(np.asarray(lams, dtype=float))
    e, v = diagonalize_batch(family.matrices(lams))
    gaps = e[:, 1] - e[:, 0]
    if np.any(gaps < gap_floor):
        bad = lams[int(np.argmin(gaps))]
        raise DegenerateGroundStateError(
            f"degenerate ground state at {tuple(bad)} (gap {gaps.min():.3g})"
        )
    dh = family.derivatives_batch(lams)
    v0 = v[:, :, 0]
    # a[n, mu, k] = <0| dH_mu |k>
    a = np.einsum("ni,nmik->nmk", v0.conj(), dh @ v[:, None])[:, :, 1:]
    w = 1.0 / (e[:, 1:] - e[:, :1]) ** 2
    return (a * w[:, None, :]) @ np.swapaxes(a.conj(), 1, 2)


def metric_gradient_batch(
    family: HamiltonianFamily, lams: ArrayLike, gap_floor: float = GAP_FLOOR
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Metric and its exact first partials at many points.

    With the reduced resolvent ``R = Q (H - E_0)^-1 Q`` and
    ``|phi_m> = R dH_m |0>`` the metric is ``g_mn = Re <phi_m|phi_n>``.
    Differentiating needs only ``d|0> = -R dH |0>`` and
    ``dR = -R dH R + dE_0 R^2 + P dH R^2 + R^2 dH P`` (``P = |0><0|``), so
    crossings among excited levels do no harm. Requires the family's second
    parameter derivatives. Returns ``g`` (n, D, D) and ``dg[n, s, m, v] =
    d_s g_mv``.
    """
    lams = np.atleast_2d(np.asarray(lams, dtype=float))
    e, v = diagonalize_batch(family.matrices(lams))
    gaps = e[:, 1] - e[:, 0]
    if np.any(gaps < gap_floor):
        bad = lams[int(np.argmin(gaps))]
        raise DegenerateGroundStateError(f"degenerate ground state at {tuple(bad)} (gap {gaps.min():.3g})")
    dh = family.derivatives_batch(lams)
    ddh = np.stack([family.second_derivatives(p) for p in lams])
    inv = 1.0 / (e[:, 1:] - e[:, :1])
    vk = v[:, :, 1:]
    R = np.einsum("nik,nk,njk->nij", vk, inv, vk.conj(), optimize=True)
    R2 = np.einsum("nik,nk,njk->nij", vk, inv**2, vk.conj(), optimize=True)
    psi = v[:, :, 0]
    P = np.einsum("ni,nj->nij", psi, psi.conj())
    a = np.einsum("nmij,nj->nmi", dh, psi)  # dH_m |0>
    phi = np.einsum("nij,nmj->nmi", R, a)
    g = np.real(np.einsum("nmi,nvi->nmv", phi.conj(), phi))
    dE = np.real(np.einsum("ni,nsi->ns", psi.conj(), a))
    RdhR = np.einsum("nij,nsjk,nkl->nsil", R, dh, R, optimize=True)
    dR = (
        -RdhR
        + dE[:, :, None, None] * R2[:, None]
        + np.einsum("nij,nsjk,nkl->nsil", P, dh, R2, optimize=True)
        + np.einsum("nij,nsjk,nkl->nsil", R2, dh, P, optimize=True)
    )
    dphi = (
        np.einsum("nsij,nmj->nsmi", dR, a)
        + np.einsum("nij,nsmjk,nk->nsmi", R, ddh, psi, optimize=True)
        - np.einsum("nmij,nsj->nsmi", RdhR, a)
    )
    M = np.einsum("nsmi,nvi->nsmv", dphi.conj(), phi)
    dg = np.real(M + np.swapaxes(M, 2, 3))
    return g, dg


def geometric_tensor(family: HamiltonianFamily, lam: ArrayLike, gap_floor: float = GAP_FLOOR) -> GeometricTensor:
    """Geometric tensor, metric and Berry curvature at a single point."""
    lam = as_point(lam)
    G = geometric_tensor_batch(family, lam[None, :], gap_floor)[0]
    e = np.linalg.eigvalsh(family.matrix(lam))
    metric = np.real(G).copy()
    berry = -2.0 * np.imag(G) if np.iscomplexobj(G) else np.zeros_like(metric)
    return GeometricTensor(G, metric, berry, float(e[1] - e[0]))


def fidelity_distance(psi_a: NDArray, psi_b: NDArray) -> float:
    """``1 - |<a|b>|^2`` for unit vectors, evaluated as the squared norm of the
    part of ``b`` orthogonal to ``a`` (no cancellation for nearby states)."""
    overlap = np.vdot(psi_a, psi_b)
    perp = psi_b - overlap * psi_a
    return float(np.real(np.vdot(perp, perp)))


def metric_from_overlaps(family: HamiltonianFamily, lam: ArrayLike, h: float = DEFAULT_OVERLAP_STEP) -> NDArray[np.float64]:
    """Metric estimated from ground-state infidelities at displaced points.

    Diagonal entries use the symmetric axis displacements ``+/-h``;
    the off-diagonal entries use the diagonal displacements ``+/-(h, h)``
    after subtracting the diagonal contributions.
    """
    lam = as_point(lam)
    D = len(lam)
    offsets = [np.zeros(D)]
    for mu in range(D):
        for s in (1.0, -1.0):
            e = np.zeros(D)
            e[mu] = s * h
            offsets.append(e)
    pairs = [(mu, nu) for mu in range(D) for nu in range(mu + 1, D)]
    for mu, nu in pairs:
        for s in (1.0, -1.0):
            e = np.zeros(D)
            e[mu] = e[nu] = s * h
            offsets.append(e)
    pts = lam + np.array(offsets)
    e, v = diagonalize_batch(family.matrices(pts))
    if np.min(e[:, 1] - e[:, 0]) < GAP_FLOOR:
        raise DegenerateGroundStateError(f"degenerate ground state near {tuple(lam)}")
    psi0 = v[0, :, 0]
    dl2 = []
    for k in range(1, len(pts)):
        psi = v[k, :, 0]
        if abs(np.vdot(psi0, psi)) < 0.5:
            warnings.warn(f"overlap stencil around {tuple(lam)} crosses a level crossing", RuntimeWarning)
        dl2.append(fidelity_distance(psi0, psi))
    g = np.zeros((D, D))
    for mu in range(D):
        g[mu, mu] = (dl2[2 * mu] + dl2[2 * mu + 1]) / (2 * h * h)
    base = 2 * D
    for i, (mu, nu) in enumerate(pairs):
        d = 0.5 * (dl2[base + 2 * i] + dl2[base + 2 * i + 1])
        g[mu, nu] = g[nu, mu] = (d - g[mu, mu] * h * h - g[nu, nu] * h * h) / (2 * h * h)
    return g


# --------------------------------------------------------------------------
# metric sources
# --------------------------------------------------------------------------


class MetricSource(Protocol):
    n_params: int

    def metrics(self, points: NDArray[np.float64]) -> NDArray[np.float64]: ...


class FamilyMetric:
    """Exact ground-state metric of a Hamiltonian family."""

    def __init__(self, family: HamiltonianFamily, gap_floor: float = GAP_FLOOR):
        self.family = family
        self.n_params = family.n_params
        self.gap_floor = gap_floor

    def metrics(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.real(geometric_tensor_batch(self.family, points, self.gap_floor))

    @property
    def has_gradients(self) -> bool:
        """True when the family supplies second derivatives (needed for exact ``dg``)."""
        probe = np.zeros(self.n_params)
        try:
            return self.family.second_derivatives(probe) is not None
        except Exception:  # pragma: no cover - family-specific domain errors
            return False

    def gradients(self, points: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        return metric_gradient_batch(self.family, points, self.gap_floor)


class FunctionMetric:
    """Wrap ``fn(point) -> (D, D)`` as a metric source."""

    def __init__(self, fn: Callable[[NDArray[np.float64]], ArrayLike], n_params: int = 2):
        self.fn = fn
        self.n_params = n_params

    def metrics(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.stack([np.asarray(self.fn(p), dtype=float) for p in np.atleast_2d(points)])


def as_metric_source(source) -> MetricSource:
    if isinstance(source, HamiltonianFamily):
        return FamilyMetric(source)
    if hasattr(source, "metrics") and hasattr(source, "n_params"):
        return source
    if callable(source):
        return FunctionMetric(source)
    raise TypeError(f"cannot build a metric source from {type(source).__name__}")


# --------------------------------------------------------------------------
# coordinate maps and pullbacks
# --------------------------------------------------------------------------


class CoordinateMap(Protocol):
    def __call__(self, xi: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Return ``(lambda(xi), d lambda / d xi)``."""

    # optional: hessian(xi) -> (D_lambda, D_xi, D_xi) second partials of lambda(xi)


class LinearMap:
    """``lambda = A xi + b``."""

    def __init__(self, A: ArrayLike, b: ArrayLike | None = None):
        self.A = np.asarray(A, dtype=float)
        self.b = np.zeros(self.A.shape[0]) if b is None else np.asarray(b, dtype=float)

    def __call__(self, xi):
        return self.A @ xi + self.b, self.A

    def hessian(self, xi):
        n, m = self.A.shape
        return np.zeros((n, m, m))


class PolarMap:
    """``lambda = center + (rho - shift) (cos Theta, sin Theta)`` for ``xi = (rho, Theta)``.

    With ``shift = 0`` this is the plain polar chart about ``center``; a
    positive shift moves the center onto the circle ``rho = shift``.
    """

    def __init__(self, center: ArrayLike, shift: float = 0.0):
        self.center = as_point(center)
        self.shift = float(shift)

    def __call__(self, xi):
        rho, th = xi
        r = rho - self.shift
        c, s = math.cos(th), math.sin(th)
        lam = self.center + np.array([r * c, r * s])
        jac = np.array([[c, -r * s], [s, r * c]])
        return lam, jac

    def hessian(self, xi):
        rho, th = xi
        r = rho - self.shift
        c, s = math.cos(th), math.sin(th)
        hess = np.zeros((2, 2, 2))
        hess[:, 0, 1] = hess[:, 1, 0] = (-s, c)
        hess[:, 1, 1] = (-r * c, -r * s)
        return hess

    def inverse(self, lam: ArrayLike) -> NDArray[np.float64]:
        d = as_point(lam) - self.center
        return np.array([math.hypot(*d) + self.shift, math.atan2(d[1], d[0])])


class SmoothingMap:
    """``lambda_axis = center + xi exp(-(a/xi)^2)``; other coordinates pass through.

    Smooth but non-analytic at ``xi = 0`` where every derivative vanishes.
    """

    def __init__(self, center: float, a: float, axis: int = 0, n_params: int = 2):
        self.center = float(center)
        self.a = float(a)
        self.axis = axis
        self.n_params = n_params

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        t = xi[self.axis]
        lam = xi.copy()
        jac = np.eye(self.n_params)
        if t == 0.0:
            lam[self.axis] = self.center
            jac[self.axis, self.axis] = 0.0
        else:
            e = math.exp(-((self.a / t) ** 2))
            lam[self.axis] = self.center + t * e
            jac[self.axis, self.axis] = e * (1.0 + 2.0 * self.a**2 / t**2)
        return lam, jac

    def hessian(self, xi):
        t = float(np.asarray(xi, dtype=float)[self.axis])
        hess = np.zeros((self.n_params,) * 3)
        if t != 0.0:
            e = math.exp(-((self.a / t) ** 2))
            u = self.a**2 / t**2
            hess[self.axis, self.axis, self.axis] = e * (2.0 * u / t) * (2.0 * u - 1.0)
        return hess


class PullbackMetric:
    """Metric source in ``xi`` coordinates: ``g'(xi) = J^T g(lambda(xi)) J``."""

    def __init__(self, source, coordinate_map: CoordinateMap, n_params: int | None = None):
        self.base = as_metric_source(source)
        self.map = coordinate_map
        self.n_params = n_params or self.base.n_params

    def metrics(self, points):
        points = np.atleast_2d(points)
        mapped = [self.map(p) for p in points]
        lams = np.array([m[0] for m in mapped])
        jacs = np.array([m[1] for m in mapped])
        g = self.base.metrics(lams)
        return np.einsum("nam,nab,nbv->nmv", jacs, g, jacs)

    @property
    def has_gradients(self) -> bool:
        return bool(getattr(self.base, "has_gradients", False)) and hasattr(self.map, "hessian")

    def gradients(self, points):
        points = np.atleast_2d(points)
        mapped = [self.map(p) for p in points]
        lams = np.array([m[0] for m in mapped])
        J = np.array([m[1] for m in mapped])
        Hs = np.array([self.map.hessian(p) for p in points])  # (n, a, m, s)
        g, dg = self.base.gradients(lams)
        gp = np.einsum("nam,nab,nbv->nmv", J, g, J)
        # d_s g'_mv = H_ams g_ab J_bv + J_am g_ab H_bvs + J_am (d_c g_ab J_cs) J_bv
        t1 = np.einsum("nams,nab,nbv->nsmv", Hs, g, J)
        t3 = np.einsum("nam,ncab,ncs,nbv->nsmv", J, dg, J, J, optimize=True)
        dgp = t1 + np.swapaxes(t1, 2, 3) + t3
        return gp, dgp


@dataclass(frozen=True)
class Pullback:
    metric: NDArray[np.float64]
    jacobian: NDArray[np.float64]
    singular_jacobian: bool


def pullback_metric(source, coordinate_map: CoordinateMap, xi: ArrayLike) -> Pullback:
    """Metric in the chart ``xi`` at a single point, with a singular-Jacobian flag."""
    xi = np.asarray(xi, dtype=float)
    lam, jac = coordinate_map(xi)
    g = as_metric_source(source).metrics(np.atleast_2d(lam))[0]
    gp = jac.T @ g @ jac
    singular = abs(np.linalg.det(jac)) < 1e-300 if jac.shape[0] == jac.shape[1] else False
    return Pullback(gp, jac, bool(singular))


# --------------------------------------------------------------------------
# finite-difference derivatives of the metric
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricDerivatives:
    """``metric[m, n]``, ``first[s, m, n] = d_s g_mn``, ``second[s, t, m, n] = d_s d_t g_mn``."""

    metric: NDArray[np.float64]
    first: NDArray[np.float64]
    second: NDArray[np.float64] | None
    steps: NDArray[np.float64]
    stencil_min_det: float


def fd_steps(lam: NDArray[np.float64], step: float | ArrayLike) -> NDArray[np.float64]:
    """Per-coordinate steps: ``step * max(1, |lambda_mu|)`` for a scalar ``step``."""
    if np.ndim(step) == 0:
        return float(step) * np.maximum(1.0, np.abs(lam))
    return np.asarray(step, dtype=float)


def _stencil(D: int, second: bool) -> list[tuple[int, ...]]:
    pts: list[tuple[int, ...]] = [(0,) * D]
    for mu in range(D):
        for s in (1, -1):
            e = [0] * D
            e[mu] = s
            pts.append(tuple(e))
    if second:
        for mu in range(D):
            for nu in range(mu + 1, D):
                for s1 in (1, -1):
                    for s2 in (1, -1):
                        e = [0] * D
                        e[mu], e[nu] = s1, s2
                        pts.append(tuple(e))
    return pts


def _central(gmap: dict, h: NDArray, D: int, second: bool, scale: int = 1):
    g0 = gmap[(0,) * D]
    first = np.zeros((D,) + g0.shape)
    sec = np.zeros((D, D) + g0.shape) if second else None

    def at(*pairs):
        e = [0] * D
        for mu, s in pairs:
            e[mu] = s * scale
        return gmap[tuple(e)]

    for mu in range(D):
        hm = h[mu] * scale
        gp, gm = at((mu, 1)), at((mu, -1))
        first[mu] = (gp - gm) / (2 * hm)
        if second:
            sec[mu, mu] = (gp - 2 * g0 + gm) / (hm * hm)
    if second:
        for mu in range(D):
            for nu in range(mu + 1, D):
                val = (at((mu, 1), (nu, 1)) - at((mu, 1), (nu, -1)) - at((mu, -1), (nu, 1)) + at((mu, -1), (nu, -1)))
                val = val / (4 * h[mu] * h[nu] * scale * scale)
                sec[mu, nu] = sec[nu, mu] = val
    return first, sec


def metric_derivatives(
    source,
    lam: ArrayLike,
    step: float | ArrayLike = DEFAULT_FD_STEP,
    second: bool = True,
    richardson: bool = False,
    analytic: bool | None = None,
) -> MetricDerivatives:
    """Partials of the metric.

    Finite-difference mode uses ``1 + 2D`` points for first derivatives and
    adds the ``(+/-, +/-)`` corners for mixed second derivatives (the 3x3
    stencil in 2D). Analytic mode (the default whenever the source provides
    ``gradients``) takes the first partials exactly and obtains the second
    ones as central differences of the exact first partials, symmetrized.
    With ``richardson`` the differences are repeated at twice the step and
    combined to cancel the leading ``O(h^2)`` error.
    """
    src = as_metric_source(source)
    lam = as_point(lam)
    D = len(lam)
    h = fd_steps(lam, step)
    if analytic is None:
        analytic = bool(getattr(src, "has_gradients", False))
    scales = (1, 2) if richardson else (1,)
    if analytic:
        keys = [(0,) * D]
        if second:
            for sc in scales:
                for mu in range(D):
                    for sg in (1, -1):
                        e = [0] * D
                        e[mu] = sg * sc
                        keys.append(tuple(e))
        pts = lam + np.array(keys, dtype=float) * h
        g, dg = src.gradients(pts)
        gmap = dict(zip(keys, zip(g, dg)))
        dets = np.linalg.det(g) if D > 1 else g[:, 0, 0]
        g0, first = gmap[(0,) * D]
        sec = None
        if second:
            def central(sc):
                out = np.zeros((D, D, D, D))
                for t in range(D):
                    ep = [0] * D
                    ep[t] = sc
                    em = [0] * D
                    em[t] = -sc
                    out[t] = (gmap[tuple(ep)][1] - gmap[tuple(em)][1]) / (2 * sc * h[t])
                return 0.5 * (out + np.swapaxes(out, 0, 1))
            sec = central(1)
            if richardson:
                sec = (4 * sec - central(2)) / 3
        return MetricDerivatives(g0, first, sec, h, float(np.min(dets)))
    offs = _stencil(D, second)
    keys = sorted({tuple(s * o for o in off) for s in scales for off in offs})
    pts = lam + np.array(keys, dtype=float) * h
    g = src.metrics(pts)
    gmap = dict(zip(keys, g))
    dets = np.linalg.det(g) if D > 1 else g[:, 0, 0]
    first, sec = _central(gmap, h, D, second, 1)
    if richardson:
        f2, s2 = _central(gmap, h, D, second, 2)
        first = (4 * first - f2) / 3
        if second:
            sec = (4 * sec - s2) / 3
    return MetricDerivatives(gmap[(0,) * D], first, sec, h, float(np.min(dets)))


# --------------------------------------------------------------------------
# connection and curvature
# --------------------------------------------------------------------------


def christoffel_from_derivatives(g: NDArray, dg: NDArray) -> NDArray[np.float64]:
    """``Gamma[a, b, c] = 1/2 ginv[a, m] (d_c g_mb + d_b g_cm - d_m g_bc)``."""
    ginv = np.linalg.inv(g)
    # dg[s, m, n] = d_s g_mn
    term = np.einsum("cmb->mbc", dg) + np.einsum("bcm->mbc", dg) - dg
    return 0.5 * np.einsum("am,mbc->abc", ginv, term)


def ricci_from_derivatives(g: NDArray, dg: NDArray, ddg: NDArray) -> float:
    """Scalar curvature from the metric and its first and second partials.

    ``R = ginv[s, n] (d_m Gamma[m, n, s] - d_n Gamma[m, m, s]
    + Gamma[m, m, l] Gamma[l, n, s] - Gamma[m, n, l] Gamma[l, m, s])``.
    """
    ginv = np.linalg.inv(g)
    gam = christoffel_from_derivatives(g, dg)
    # d_s ginv = -ginv (d_s g) ginv
    dginv = -np.einsum("am,smn,nb->sab", ginv, dg, ginv)
    # bracket[s, m, b, c] = d_s(d_c g_mb + d_b g_cm - d_m g_bc)
    bracket = np.einsum("scmb->smbc", ddg) + np.einsum("sbcm->smbc", ddg) - np.einsum("smbc->smbc", ddg)
    term = np.einsum("cmb->mbc", dg) + np.einsum("bcm->mbc", dg) - dg
    dgam = 0.5 * (np.einsum("sam,mbc->sabc", dginv, term) + np.einsum("am,smbc->sabc", ginv, bracket))
    # dgam[s, a, b, c] = d_s Gamma[a, b, c]
    r_tensor = (
        np.einsum("mmns->ns", dgam)
        - np.einsum("nmms->ns", dgam)
        + np.einsum("mml,lns->ns", gam, gam)
        - np.einsum("mnl,lms->ns", gam, gam)
    )
    return float(np.einsum("sn,ns->", ginv, r_tensor))


@dataclass(frozen=True)
class MetricField:
    """Metric, its derivatives, connection and curvature at one point."""

    point: NDArray[np.float64]
    metric: NDArray[np.float64]
    first: NDArray[np.float64]
    second: NDArray[np.float64] | None
    christoffel: NDArray[np.float64] | None
    ricci: float
    det: float
    degenerate: bool

    @property
    def gaussian_curvature(self) -> float:
        return 0.5 * self.ricci


def metric_field(
    source,
    lam: ArrayLike,
    step: float | ArrayLike = DEFAULT_FD_STEP,
    second: bool = True,
    richardson: bool = True,
    det_threshold: float = DEFAULT_DET_THRESHOLD,
    analytic: bool | None = None,
) -> MetricField:
    """Evaluate the full local geometry; never raises on degeneracy, sets a flag instead."""
    lam = as_point(lam)
    md = metric_derivatives(source, lam, step, second, richardson, analytic)
    g = md.metric
    det = float(np.linalg.det(g))
    degenerate = det < det_threshold or md.stencil_min_det < det_threshold
    if degenerate:
        return MetricField(lam, g, md.first, md.second, None, float("nan"), det, True)
    gam = christoffel_from_derivatives(g, md.first)
    ric = ricci_from_derivatives(g, md.first, md.second) if second else float("nan")
    return MetricField(lam, g, md.first, md.second, gam, ric, det, False)


def christoffel(
    source,
    lam: ArrayLike,
    step: float | ArrayLike = DEFAULT_FD_STEP,
    richardson: bool = True,
    det_threshold: float = DEFAULT_DET_THRESHOLD,
    analytic: bool | None = None,
) -> NDArray[np.float64]:
    """Christoffel symbols ``Gamma[a, b, c]`` (symmetric in ``b, c``)."""
    f = metric_field(source, lam, step, second=False, richardson=richardson, det_threshold=det_threshold, analytic=analytic)
    if f.degenerate:
        raise MetricDegenerateError(f"metric near-degenerate at {tuple(f.point)} (det {f.det:.3g})")
    return f.christoffel


def ricci_scalar(
    source,
    lam: ArrayLike,
    step: float | ArrayLike = DEFAULT_FD_STEP,
    richardson: bool = True,
    det_threshold: float = DEFAULT_DET_THRESHOLD,
    analytic: bool | None = None,
) -> float:
    """Scalar curvature; the Gaussian curvature is half of it in two dimensions."""
    f = metric_field(source, lam, step, second=True, richardson=richardson, det_threshold=det_threshold, analytic=analytic)
    if f.degenerate:
        raise MetricDegenerateError(f"metric near-degenerate at {tuple(f.point)} (det {f.det:.3g})")
    return f.ricci
