"""Hartree-Bose condensates: energy minimization, phases and HB metrics.

For the f=1 model the condensate ``(s+ + rho t+)^N |0>`` is described by a
single signed real ``rho``; the sign encodes the phase ``0`` or ``pi``.
Passing ``N=None`` (or ``math.inf``) selects the infinite-size functional.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq
from scipy.special import gammaln

from .errors import SeparatrixError
from .geometry import FunctionMetric, metric_field
from .model import LmgModel, ParameterPoint, as_point
from .spectrum import spectrum

DEFAULT_BRACKET = (-8.0, 8.0)
DEFAULT_SCAN_POINTS = 4001
DEGENERACY_TOL = 1e-12
HB_FD_STEP = 1e-5


def _is_infinite(N) -> bool:
    return N is None or (isinstance(N, float) and math.isinf(N))


# --------------------------------------------------------------------------
# condensate states
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CondensateState:
    """Condensate amplitudes ``alpha_k = rho_k exp(i phi_k)`` for ``k = 1..f``."""

    alpha: NDArray[np.complex128]

    @classmethod
    def f1(cls, rho: float) -> "CondensateState":
        return cls(np.array([complex(rho)]))

    @property
    def f(self) -> int:
        return len(self.alpha)

    @property
    def rho(self) -> NDArray[np.float64]:
        return np.abs(self.alpha)

    @property
    def phi(self) -> NDArray[np.float64]:
        return np.angle(self.alpha)

    @property
    def norm(self) -> float:
        """``S = 1 + sum rho_k^2``."""
        return 1.0 + float(np.sum(self.rho**2))

    def single_particle(self) -> NDArray[np.complex128]:
        """Normalized single-boson amplitudes ``(1, alpha_1, ..., alpha_f) / sqrt(S)``."""
        return np.concatenate([[1.0], self.alpha]) / math.sqrt(self.norm)


def condensate_vector(N: int, rho: float) -> NDArray[np.float64]:
    """Fock amplitudes ``sqrt(C(N, n)) rho^n / (1 + rho^2)^(N/2)`` for ``n = 0..N``.

    Evaluated in log space so large ``N`` and ``|rho|`` do not overflow.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not math.isfinite(rho):
        raise ValueError(f"rho must be finite, got {rho}")
    n = np.arange(N + 1)
    if rho == 0.0:
        out = np.zeros(N + 1)
        out[0] = 1.0
        return out
    logc = 0.5 * (gammaln(N + 1) - gammaln(n + 1) - gammaln(N - n + 1))
    logs = logc + n * math.log(abs(rho)) - 0.5 * N * math.log1p(rho * rho)
    amp = np.exp(logs)
    if rho < 0:
        amp = amp * np.where(n % 2 == 1, -1.0, 1.0)
    return amp / np.linalg.norm(amp)


def _condensate_vectors(N: int, rhos: NDArray) -> NDArray[np.float64]:
    return np.stack([condensate_vector(N, float(r)) for r in rhos])


# --------------------------------------------------------------------------
# energy functionals
# --------------------------------------------------------------------------


def infinite_functional(kappa: float, chi: float, rho: ArrayLike) -> NDArray[np.float64] | float:
    """``(-1 + rho^2 [-2 kappa + rho (rho - 4 chi - 2 rho chi^2)]) / (1 + rho^2)^2``.

    This is twice the large-N limit of the intensive energy ``<H>/N``.
    """
    r = np.asarray(rho, dtype=float)
    num = -1.0 + r * r * (-2.0 * kappa + r * (r - 4.0 * chi - 2.0 * r * chi * chi))
    out = num / (1.0 + r * r) ** 2
    return float(out) if out.ndim == 0 else out


def infinite_functional_derivative(kappa: float, chi: float, rho: ArrayLike) -> NDArray[np.float64] | float:
    r = np.asarray(rho, dtype=float)
    num = -1.0 - 2.0 * kappa * r**2 - 4.0 * chi * r**3 + (1.0 - 2.0 * chi * chi) * r**4
    dnum = -4.0 * kappa * r - 12.0 * chi * r**2 + 4.0 * (1.0 - 2.0 * chi * chi) * r**3
    out = (dnum * (1.0 + r * r) - 4.0 * r * num) / (1.0 + r * r) ** 3
    return float(out) if out.ndim == 0 else out


def hb_energy(N: int | None, lam: ArrayLike | ParameterPoint, rho: float) -> float:
    """Condensate energy: ``<psi_HB|H|psi_HB>/N`` for finite ``N``, the closed form for ``N=None``."""
    kappa, chi = as_point(lam)
    if _is_infinite(N):
        return infinite_functional(kappa, chi, rho)
    model = LmgModel(int(N))
    v = condensate_vector(int(N), rho)
    return float(v @ model.matrix((kappa, chi)) @ v) / N


def _finite_energy_and_slope(H: NDArray, N: int, rhos: NDArray) -> tuple[NDArray, NDArray]:
    """Intensive energy and its exact ``rho`` derivative for a stack of ``rho`` values.

    With ``u`` the normalized condensate vector, ``du/drho`` is ``n u_n / rho``
    projected orthogonally to ``u``; ``dE/drho = 2 <du|H|u> / N``.
    """
    n = np.arange(N + 1)
    U = _condensate_vectors(N, rhos)
    HU = U @ H
    E = np.einsum("ki,ki->k", U, HU) / N
    dU = np.empty_like(U)
    for k, r in enumerate(rhos):
        if r == 0.0:
            dU[k] = 0.0
            dU[k, 1] = math.sqrt(N)
        else:
            dU[k] = n * U[k] / r
    dU -= np.einsum("ki,ki->k", dU, U)[:, None] * U
    dE = 2.0 * np.einsum("ki,ki->k", dU, HU) / N
    return E, dE


# --------------------------------------------------------------------------
# minimization
# --------------------------------------------------------------------------


@dataclass
class MeanFieldSolution:
    """Global condensate minimum at ``lam``.

    ``rho`` is the representative minimizer (the larger one when several are
    degenerate), ``degenerate_minima`` lists all minimizers within
    ``DEGENERACY_TOL`` of the global energy and ``local_minima`` every refined
    local minimum as ``(rho, energy)``.
    """

    lam: NDArray[np.float64]
    N: int | None
    rho: float
    energy: float
    degenerate_minima: list[float]
    local_minima: list[tuple[float, float]] = field(default_factory=list)
    phase: str = "I"
    residual: float = 0.0

    @property
    def coexisting(self) -> bool:
        return len(self.degenerate_minima) > 1


def _label(kappa: float, chi: float, rho: float, coexisting: bool, rho_tol: float = 1e-8) -> str:
    if kappa == 1.0 and chi == 0.0:
        return "QPT-2"
    if coexisting:
        return "boundary"
    if abs(rho) <= rho_tol:
        return "I"
    return "II+" if rho > 0 else "II-"


def hb_minimize(
    N: int | None,
    lam: ArrayLike | ParameterPoint,
    bracket: tuple[float, float] = DEFAULT_BRACKET,
    points: int = DEFAULT_SCAN_POINTS,
    degeneracy_tol: float = DEGENERACY_TOL,
) -> MeanFieldSolution:
    """Global minimum of the condensate energy over ``rho`` in ``bracket``.

    A uniform scan locates every local minimum; each is refined by Brent's
    method on the exact derivative. Minima whose energy lies within
    ``degeneracy_tol`` of the global value are reported as coexisting.
    """
    lam = as_point(lam)
    kappa, chi = float(lam[0]), float(lam[1])
    lo, hi = bracket
    if not lo < hi or points < 3:
        raise ValueError("bracket must satisfy lo < hi and points >= 3")
    grid = np.linspace(lo, hi, points)
    if _is_infinite(N):
        n_val = None

        def energy(r):
            return infinite_functional(kappa, chi, r)

        def slope(r):
            return infinite_functional_derivative(kappa, chi, r)

        E = energy(grid)
    else:
        n_val = int(N)
        H = LmgModel(n_val).matrix(lam)

        def energy(r):
            return float(_finite_energy_and_slope(H, n_val, np.array([r]))[0][0])

        def slope(r):
            return float(_finite_energy_and_slope(H, n_val, np.array([r]))[1][0])

        E, _ = _finite_energy_and_slope(H, n_val, grid)

    idx = [i for i in range(1, points - 1) if E[i] <= E[i - 1] and E[i] <= E[i + 1]]
    i_glob = int(np.argmin(E))
    if i_glob in (0, points - 1):
        warnings.warn(f"condensate minimum at the edge of the bracket {bracket} for {tuple(lam)}", RuntimeWarning)
        idx.append(i_glob)
    minima: list[tuple[float, float, float]] = []
    for i in idx:
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]
        r = float(grid[i])
        sa, sb = slope(a), slope(b)
        if sa < 0 < sb:
            r = brentq(slope, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            if n_val is None and abs(r) < 1e-12:
                r = 0.0  # rho = 0 is an exact stationary point of the closed form
        minima.append((r, energy(r), abs(slope(r))))
    # merge duplicates produced by plateaus on the grid
    minima.sort(key=lambda m: m[0])
    merged: list[tuple[float, float, float]] = []
    for m in minima:
        if merged and abs(m[0] - merged[-1][0]) < 1e-9:
            if m[1] < merged[-1][1]:
                merged[-1] = m
            continue
        merged.append(m)
    e_min = min(m[1] for m in merged)
    degenerate = [m for m in merged if m[1] - e_min <= degeneracy_tol]
    best = max(degenerate, key=lambda m: m[0])
    rho = best[0]
    return MeanFieldSolution(
        lam=lam,
        N=n_val,
        rho=rho,
        energy=best[1],
        degenerate_minima=[m[0] for m in degenerate],
        local_minima=[(m[0], m[1]) for m in merged],
        phase=_label(kappa, chi, rho, len(degenerate) > 1),
        residual=best[2],
    )


def qpt_separatrix(kappa: float) -> tuple[float, float] | str:
    """Critical ``chi`` of the infinite-size phase diagram at ``kappa``.

    Returns ``(+chi_c, -chi_c)`` with ``chi_c = sqrt((kappa-1)/(kappa-2))`` for
    ``kappa < 1``; ``"QPT-2"`` at ``kappa = 1`` (the point ``chi = 0``); and
    ``"chi=0"`` for ``kappa > 1`` where the first-order line is the axis.
    """
    if not math.isfinite(kappa):
        raise ValueError("kappa must be finite")
    if kappa < 1.0:
        c = math.sqrt((kappa - 1.0) / (kappa - 2.0))
        return c, -c
    if kappa == 1.0:
        return "QPT-2"
    return "chi=0"


def separatrix_residual(kappa: float, chi: float) -> float:
    """``chi^2 (kappa - 2) - (kappa - 1)``, zero on the QPT-1 +/- lines."""
    return chi * chi * (kappa - 2.0) - (kappa - 1.0)


def phase_classify(lam: ArrayLike | ParameterPoint, **kwargs) -> str:
    """Phase label of the infinite-size minimizer: I, II+, II-, boundary or QPT-2."""
    return hb_minimize(None, lam, **kwargs).phase


# --------------------------------------------------------------------------
# HB metrics
# --------------------------------------------------------------------------


def _rho_stencil(N, lam: NDArray, h: float, finite: bool) -> tuple[NDArray, list[str]]:
    src = N if finite else None
    grad = np.zeros(len(lam))
    labels = []
    for mu in range(len(lam)):
        vals = {}
        for s in (-2, -1, 1, 2):
            p = lam.copy()
            p[mu] += s * h
            sol = hb_minimize(src, p)
            labels.append(sol.phase)
            vals[s] = sol.rho
        grad[mu] = (vals[1] - vals[-1]) / (2 * h)
    return grad, labels


def hb_metric_f1(N: int, lam: ArrayLike | ParameterPoint, step: float = HB_FD_STEP, finite: bool = False) -> NDArray[np.float64]:
    """``g_HB = N / (1 + rho^2)^2 * grad(rho) grad(rho)^T`` (rank at most one).

    ``rho`` is the infinite-size minimizer unless ``finite`` is set. Raises
    :class:`SeparatrixError` when any point within two steps of ``lam`` has a
    different phase label, since the central difference would straddle a jump.
    """
    lam = as_point(lam)
    sol = hb_minimize(N if finite else None, lam)
    grad, labels = _rho_stencil(N, lam, step, finite)
    if sol.phase in ("boundary", "QPT-2") or any(l != sol.phase for l in labels):
        raise SeparatrixError(f"HB metric stencil at {tuple(lam)} straddles a phase boundary")
    return N / (1.0 + sol.rho**2) ** 2 * np.outer(grad, grad)


def lmg_condensate_amplitudes(lam: ArrayLike, N: int | None = None) -> NDArray[np.float64]:
    """Normalized single-boson amplitudes ``(1, rho)/sqrt(1 + rho^2)`` of the minimizer."""
    rho = hb_minimize(N, lam).rho
    return np.array([1.0, rho]) / math.sqrt(1.0 + rho * rho)


def hb_metric_general(
    amplitudes: Callable[[NDArray[np.float64]], ArrayLike],
    lam: ArrayLike,
    N: float,
    step: float = 1e-3,
) -> NDArray[np.float64]:
    """HB metric from a smooth map ``lambda -> u`` of normalized single-boson amplitudes.

    ``g = N [Im<u|d_m u> Im<d_n u|u> - Re<u|d_m d_n u>]``, i.e. ``N`` times the
    Fubini-Study metric of the condensate orbital. Derivatives of ``u`` are
    central differences at steps ``h`` and ``2h`` combined by Richardson
    extrapolation.
    """
    lam = as_point(lam)
    D = len(lam)

    def u(p):
        return np.asarray(amplitudes(p), dtype=complex)

    u0 = u(lam)

    def derivs(h):
        d1 = np.zeros((D, len(u0)), dtype=complex)
        d2 = np.zeros((D, D, len(u0)), dtype=complex)
        for m in range(D):
            em = np.zeros(D)
            em[m] = h
            up, um = u(lam + em), u(lam - em)
            d1[m] = (up - um) / (2 * h)
            d2[m, m] = (up - 2 * u0 + um) / (h * h)
            for n in range(m + 1, D):
                en = np.zeros(D)
                en[n] = h
                val = (u(lam + em + en) - u(lam + em - en) - u(lam - em + en) + u(lam - em - en)) / (4 * h * h)
                d2[m, n] = d2[n, m] = val
        return d1, d2

    a1, a2 = derivs(step)
    b1, b2 = derivs(2 * step)
    d1 = (4 * a1 - b1) / 3
    d2 = (4 * a2 - b2) / 3
    conn = np.imag(d1 @ u0.conj())  # Im <u|d_m u>
    second = np.real(np.einsum("i,mni->mn", u0.conj(), d2))
    g = N * (-np.outer(conn, conn) - second)
    return 0.5 * (g + g.T)


# --------------------------------------------------------------------------
# condensate geometry for general f
# --------------------------------------------------------------------------


def condensate_blocks(rho: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """``g^rho_kl = (S d_kl - rho_k rho_l)/S^2`` and ``g^phi_kl = (S rho_k^2 d_kl - rho_k^2 rho_l^2)/S^2``."""
    r = np.asarray(rho, dtype=float)
    S = 1.0 + float(r @ r)
    g_rho = (S * np.eye(len(r)) - np.outer(r, r)) / S**2
    r2 = r * r
    g_phi = (S * np.diag(r2) - np.outer(r2, r2)) / S**2
    return g_rho, g_phi


def condensate_metric(N: float, coords: ArrayLike) -> NDArray[np.float64]:
    """Metric ``N diag(g^rho, g^phi)`` in the chart ``(rho_1..rho_f, phi_1..phi_f)``."""
    c = np.asarray(coords, dtype=float)
    f = len(c) // 2
    g_rho, g_phi = condensate_blocks(c[:f])
    g = np.zeros((2 * f, 2 * f))
    g[:f, :f] = g_rho
    g[f:, f:] = g_phi
    return N * g


@dataclass(frozen=True)
class CondensateGeometry:
    """Condensate-chart metric blocks and the numerically evaluated Ricci scalar.

    ``redundant`` lists the indices ``k`` with ``rho_k = 0`` where ``phi_k``
    is not a coordinate; the Ricci scalar is NaN there.
    """

    f: int
    N: float
    g_rho: NDArray[np.float64]
    g_phi: NDArray[np.float64]
    metric: NDArray[np.float64]
    ricci: float
    expected_ricci: float
    redundant: tuple[int, ...]


def condensate_geometry(f: int, N: float, alpha: ArrayLike, step: float = 1e-4) -> CondensateGeometry:
    """Block metric of the ``f``-boson condensate chart and its Ricci scalar.

    The Ricci scalar is computed with the generic finite-difference pipeline
    on the ``2f``-dimensional ``(rho, phi)`` chart; the closed-form value is
    ``4 f (f + 1) / N``.
    """
    if f < 1:
        raise ValueError("f must be >= 1")
    a = np.asarray(alpha, dtype=complex).reshape(-1)
    if len(a) != f:
        raise ValueError(f"expected {f} amplitudes, got {len(a)}")
    rho, phi = np.abs(a), np.angle(a)
    g_rho, g_phi = condensate_blocks(rho)
    coords = np.concatenate([rho, phi])
    metric = condensate_metric(N, coords)
    redundant = tuple(int(k) for k in np.flatnonzero(rho < 1e-8))
    ricci = float("nan")
    if not redundant:
        src = FunctionMetric(lambda p: condensate_metric(N, p), n_params=2 * f)
        field_ = metric_field(src, coords, step=step, richardson=True, det_threshold=0.0)
        ricci = field_.ricci
    return CondensateGeometry(f, N, g_rho, g_phi, metric, ricci, 4.0 * f * (f + 1) / N, redundant)


# --------------------------------------------------------------------------
# condensate fraction
# --------------------------------------------------------------------------


def condensate_fraction(N: int, lam: ArrayLike | ParameterPoint) -> float:
    """Weight ``|<psi_HB(rho_min^(N))|psi_0>|^2`` of the full condensate in the exact ground state."""
    lam = as_point(lam)
    sol = hb_minimize(N, lam)
    if sol.coexisting:
        warnings.warn(f"condensate minimum not unique at {tuple(lam)}; using rho={sol.rho}", RuntimeWarning)
    v = condensate_vector(N, sol.rho)
    psi = spectrum(LmgModel(N), lam).ground
    return float(min(1.0, abs(np.vdot(v, psi)) ** 2))
