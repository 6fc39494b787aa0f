"""Geometry near a diabolic point: two-level reduction, polar charts, circles.

Close to a conical crossing the ground state lives, to leading order, in the
two-dimensional space spanned by the degenerate pair at the crossing. The
Hamiltonian projected onto that pair is ``c + (x, y, z)`` on the Bloch sphere
and the approximate metric is the pullback of the radius-1/2 sphere metric
through ``lambda -> (x, y, z)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import quad

from .errors import DegenerateGroundStateError, QManifoldError
from .geometry import (
    DEFAULT_DET_THRESHOLD,
    FamilyMetric,
    MetricField,
    PolarMap,
    PullbackMetric,
    geometric_tensor_batch,
    metric_field,
)
from .model import HamiltonianFamily, LmgModel, ParameterPoint, as_point
from .spectrum import DiabolicPoint, spectrum

DEFAULT_TRUST_RADIUS = 0.3
DEFAULT_SHIFT = 0.5
TWO_LEVEL_FD_STEP = 1e-6


def _family(family_or_n: HamiltonianFamily | int) -> HamiltonianFamily:
    if isinstance(family_or_n, HamiltonianFamily):
        return family_or_n
    return LmgModel(int(family_or_n))


def _center(dp: DiabolicPoint | ParameterPoint | ArrayLike) -> NDArray[np.float64]:
    if isinstance(dp, DiabolicPoint):
        return dp.point
    return as_point(dp)


@dataclass
class DpChart:
    """Local two-level chart around a refined DP.

    ``basis`` holds the degenerate pair as columns. With ``taylor_order=None``
    the projected Hamiltonian uses the exact ``H(lambda_d + dlam)``; with
    ``taylor_order=2`` it uses the second-order expansion built from the
    family's analytic derivatives, which coincides for Hamiltonians that are
    quadratic in the parameters.
    """

    family: HamiltonianFamily
    center: NDArray[np.float64]
    basis: NDArray
    energy: float = 0.0
    shift: float = DEFAULT_SHIFT
    trust_radius: float = DEFAULT_TRUST_RADIUS
    taylor_order: int | None = None
    displacement: float = 0.0

    @classmethod
    def from_dp(cls, family: HamiltonianFamily | int, dp: DiabolicPoint, **kwargs) -> "DpChart":
        disp = dp.displacement
        return cls(
            _family(family),
            dp.point,
            dp.degenerate_basis,
            dp.energy,
            displacement=0.0 if math.isnan(disp) else disp,
            **kwargs,
        )

    @classmethod
    def at(cls, family: HamiltonianFamily | int, center: ArrayLike, **kwargs) -> "DpChart":
        """Chart at a known crossing point; the pair is taken from a diagonalization there."""
        fam = _family(family)
        c = as_point(center)
        spec = spectrum(fam, c)
        return cls(fam, c, spec.vectors[:, :2].copy(), float(spec.energies[:2].mean()), **kwargs)

    def rotated(self, angle: float) -> "DpChart":
        """Same chart with the degenerate pair rotated by ``angle`` (a gauge change)."""
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        return DpChart(self.family, self.center, self.basis @ rot, self.energy, self.shift,
                       self.trust_radius, self.taylor_order, self.displacement)

    def hamiltonian(self, dlam: ArrayLike) -> NDArray:
        dlam = as_point(dlam)
        if self.taylor_order is None:
            return self.family.matrix(self.center + dlam)
        if self.taylor_order != 2:
            raise ValueError("taylor_order must be None or 2")
        h = self.family.matrix(self.center).astype(complex if not self.family.is_real else float)
        h = h + np.einsum("m,mij->ij", dlam, self.family.derivatives(self.center))
        second = self.family.second_derivatives(self.center)
        if second is not None:
            h = h + 0.5 * np.einsum("m,n,mnij->ij", dlam, dlam, second)
        return h

    def cxyz(self, dlam: ArrayLike) -> NDArray[np.float64]:
        """``(c, x, y, z)`` from the projected 2x2 Hamiltonian."""
        B = self.basis
        h = B.conj().T @ self.hamiltonian(dlam) @ B
        h10 = h[1, 0]
        return np.array([
            0.5 * float(np.real(h[0, 0] + h[1, 1])),
            float(np.real(h10)),
            float(np.imag(h10)),
            0.5 * float(np.real(h[0, 0] - h[1, 1])),
        ])

    def bloch(self, dlam: ArrayLike) -> NDArray[np.float64]:
        return self.cxyz(dlam)[1:]

    def inside_trust(self, dlam: ArrayLike) -> bool:
        return float(np.linalg.norm(as_point(dlam))) <= self.trust_radius

    def metric(self, dlam: ArrayLike, step: float = TWO_LEVEL_FD_STEP) -> NDArray[np.float64]:
        """Sphere-pullback approximate metric ``g_d`` at offset ``dlam``."""
        dlam = as_point(dlam)
        n = self.bloch(dlam)
        r2 = float(n @ n)
        if math.sqrt(r2) < 1e-12:
            raise DegenerateGroundStateError(f"at DP: two-level vector vanishes at offset {tuple(dlam)}")
        D = len(dlam)
        dn = np.empty((D, 3))
        for mu in range(D):
            e = np.zeros(D)
            e[mu] = step
            dn[mu] = (self.bloch(dlam + e) - self.bloch(dlam - e)) / (2 * step)
        proj = dn @ n
        g = (dn @ dn.T - np.outer(proj, proj) / r2) / (4 * r2)
        return 0.5 * (g + g.T)

    def polar_map(self, shift: float | None = None) -> PolarMap:
        return PolarMap(self.center, self.shift if shift is None else shift)


def _chart(family, dp, **kwargs) -> DpChart:
    if isinstance(dp, DpChart):
        return dp
    if isinstance(dp, DiabolicPoint):
        return DpChart.from_dp(family, dp, **kwargs)
    return DpChart.at(family, dp, **kwargs)


def two_level_map(family: HamiltonianFamily | int, dp, dlam: ArrayLike, taylor_order: int | None = None) -> NDArray[np.float64]:
    """``(c, x, y, z)`` of the effective two-level Hamiltonian at ``lambda_d + dlam``.

    ``c = (H00 + H11)/2``, ``x = Re H10``, ``y = Im H10``, ``z = (H00 - H11)/2``
    with matrix elements taken in the degenerate basis of ``dp``.
    """
    return _chart(family, dp, taylor_order=taylor_order).cxyz(dlam)


def two_level_metric(family: HamiltonianFamily | int, dp, dlam: ArrayLike, step: float = TWO_LEVEL_FD_STEP) -> NDArray[np.float64]:
    """Approximate metric ``g_d`` from the two-level reduction (rank one for real families)."""
    return _chart(family, dp).metric(dlam, step)


def two_level_gap(family: HamiltonianFamily | int, dp, dlam: ArrayLike) -> float:
    """Two-level estimate ``2 |(x, y, z)|`` of the ground-state gap."""
    return 2.0 * float(np.linalg.norm(_chart(family, dp).bloch(dlam)))


# --------------------------------------------------------------------------
# circles around a DP
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleLength:
    """Geometric circumference of the circle of radius ``R`` about a DP.

    ``method`` is ``"trapezoid"`` when the 720- and 1440-node periodic rules
    agree to ``tol`` and ``"adaptive"`` when adaptive quadrature was needed.
    """

    R: float
    length: float
    method: str
    coarse: float
    fine: float
    error_estimate: float

    @property
    def excess(self) -> float:
        return self.length - math.pi


def _g_theta_theta(source: FamilyMetric, center: NDArray, R: float, theta: NDArray) -> NDArray[np.float64]:
    c, s = np.cos(theta), np.sin(theta)
    pts = center + R * np.column_stack([c, s])
    g = source.metrics(pts)
    t = R * np.column_stack([-s, c])
    return np.einsum("na,nab,nb->n", t, g, t)


def circle_length(
    family: HamiltonianFamily | int,
    dp,
    R: float,
    nodes: int = 720,
    tol: float = 1e-4,
    quad_eps: float = 1e-10,
    quad_limit: int = 500,
) -> CircleLength:
    """``l = int_0^{2 pi} sqrt(g_TT(R, T)) dT`` around the DP.

    The integrand is periodic, so the trapezoid rule is spectrally accurate
    once the angular structure is resolved. Near a DP the integrand develops
    narrow peaks; when the ``nodes`` and ``2 * nodes`` rules disagree by more
    than ``tol`` the integral is recomputed adaptively.
    """
    if not R > 0:
        raise ValueError(f"circle radius must be positive, got {R}")
    fam = _family(family)
    center = _center(dp.center if isinstance(dp, DpChart) else dp)
    src = FamilyMetric(fam)

    def trapezoid(n: int) -> float:
        th = 2 * math.pi * np.arange(n) / n
        gtt = _g_theta_theta(src, center, R, th)
        return float(2 * math.pi / n * np.sum(np.sqrt(np.maximum(gtt, 0.0))))

    try:
        coarse, fine = trapezoid(nodes), trapezoid(2 * nodes)
    except DegenerateGroundStateError as exc:
        raise QManifoldError(f"circle of radius {R} passes through a degeneracy: {exc}") from exc
    if abs(fine - coarse) <= tol:
        return CircleLength(R, fine, "trapezoid", coarse, fine, abs(fine - coarse))

    def integrand(th: float) -> float:
        return math.sqrt(max(_g_theta_theta(src, center, R, np.array([th]))[0], 0.0))

    # split at the coarse-grid maxima so the peaks sit on interval edges
    th = 2 * math.pi * np.arange(2 * nodes) / (2 * nodes)
    vals = np.sqrt(np.maximum(_g_theta_theta(src, center, R, th), 0.0))
    peaks = th[(vals > np.roll(vals, 1)) & (vals >= np.roll(vals, -1))]
    try:
        val, err = quad(integrand, 0.0, 2 * math.pi, points=list(peaks[(peaks > 0)]) or None,
                        limit=quad_limit, epsabs=quad_eps, epsrel=quad_eps)
    except DegenerateGroundStateError as exc:
        raise QManifoldError(f"circle of radius {R} passes through a degeneracy: {exc}") from exc
    return CircleLength(R, float(val), "adaptive", coarse, fine, float(err))


# --------------------------------------------------------------------------
# shifted polar chart
# --------------------------------------------------------------------------


def polar_source(family: HamiltonianFamily | int, dp, shift: float = DEFAULT_SHIFT) -> PullbackMetric:
    """Exact metric in the chart ``(R + shift, Theta)`` about the DP."""
    center = _center(dp.center if isinstance(dp, DpChart) else dp)
    return PullbackMetric(FamilyMetric(_family(family)), PolarMap(center, shift))


def dp_polar_field(
    family: HamiltonianFamily | int,
    dp,
    R: float,
    theta: float,
    shift: float = DEFAULT_SHIFT,
    step: float = 1e-4,
    radial_fraction: float = 1e-3,
    max_angular_step: float = 1e-3,
    richardson: bool = True,
    det_threshold: float = DEFAULT_DET_THRESHOLD,
) -> MetricField:
    """Metric, connection and curvature at ``(R + shift, theta)``.

    Finite-difference steps are ``min(step, radial_fraction * R)`` in ``R``
    and ``min(max_angular_step, step / R)`` in ``theta``, i.e. physical
    displacements of about ``step`` that shrink with ``R`` close to the DP,
    where the geometry varies on the scale of ``R`` itself. Points with ``R``
    below ten times the DP refinement displacement are refused: the chart has
    no meaning there.
    """
    if not R > 0:
        raise ValueError(f"radius must be positive, got {R}")
    if isinstance(dp, DiabolicPoint):
        disp = dp.displacement
        if not math.isnan(disp) and R < 10 * disp:
            raise ValueError(f"R={R} is inside the collapsed region (< 10 x displacement {disp:.3g})")
    src = polar_source(family, dp, shift)
    steps = np.array([min(step, radial_fraction * R), min(max_angular_step, step / R)])
    return metric_field(src, (R + shift, theta), steps, second=True, richardson=richardson, det_threshold=det_threshold)


# --------------------------------------------------------------------------
# approximation error
# --------------------------------------------------------------------------

COMPONENTS = ("kk", "kc", "cc")


@dataclass(frozen=True)
class ApproxErrorProfile:
    """Relative errors ``|g_d - g| / |g|`` per component along a ray.

    ``errors`` has shape (n, 3) for the ``(0,0), (0,1), (1,1)`` components;
    entries where the exact component is (numerically) zero are NaN and
    flagged in ``undefined``. ``outside_trust`` marks radii beyond the trust
    radius of the two-level reduction.
    """

    theta: float
    R: NDArray[np.float64]
    errors: NDArray[np.float64]
    approx: NDArray[np.float64]
    exact: NDArray[np.float64]
    undefined: NDArray[np.bool_]
    outside_trust: NDArray[np.bool_]


def approx_error_profile(
    family: HamiltonianFamily | int,
    dp,
    theta: float,
    radii: Sequence[float],
    trust_radius: float = DEFAULT_TRUST_RADIUS,
    zero_tol: float = 1e-12,
) -> ApproxErrorProfile:
    chart = _chart(family, dp, trust_radius=trust_radius)
    radii = np.asarray(radii, dtype=float)
    direction = np.array([math.cos(theta), math.sin(theta)])
    approx = np.array([chart.metric(R * direction) for R in radii])
    exact = np.real(geometric_tensor_batch(chart.family, chart.center + radii[:, None] * direction))
    idx = ([0, 0, 1], [0, 1, 1])
    a = approx[:, idx[0], idx[1]]
    e = exact[:, idx[0], idx[1]]
    scale = np.linalg.norm(exact, axis=(1, 2))[:, None]
    undefined = np.abs(e) <= zero_tol * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.where(undefined, np.nan, np.abs(a - e) / np.abs(e))
    return ApproxErrorProfile(float(theta), radii, err, approx, exact, undefined, radii > trust_radius)
