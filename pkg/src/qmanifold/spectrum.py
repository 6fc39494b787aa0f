"""Exact diagonalization, gaps, Fock occupations and diabolic points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize

from .errors import EigensolverError, NoDegeneracyError
from .model import HamiltonianFamily, LmgModel, ParameterPoint, as_point


@dataclass(frozen=True)
class SpectrumResult:
    """Ascending energies and gauge-fixed orthonormal eigenvectors (as columns)."""

    energies: NDArray[np.float64]
    vectors: NDArray

    @property
    def ground(self) -> NDArray:
        return self.vectors[:, 0]

    @property
    def gap(self) -> float:
        return float(self.energies[1] - self.energies[0])


def fix_gauge(vectors: NDArray) -> NDArray:
    """Rotate each column so its largest-magnitude entry is real positive.

    Works on a single (d, d) matrix or a stack (n, d, d). Ties in magnitude
    resolve to the lowest index, which is what ``argmax`` does.
    """
    v = np.asarray(vectors)
    idx = np.argmax(np.abs(v), axis=-2)  # (..., d)
    pivot = np.take_along_axis(v, idx[..., None, :], axis=-2)
    if np.iscomplexobj(v):
        phase = pivot / np.abs(pivot)
        return v * np.conj(phase)
    return v * np.where(pivot < 0, -1.0, 1.0)


def diagonalize_batch(matrices: NDArray) -> tuple[NDArray[np.float64], NDArray]:
    """Diagonalize a stack of Hermitian matrices; returns (energies, gauge-fixed vectors)."""
    h = np.asarray(matrices)
    if not np.all(np.isfinite(h)):
        raise ValueError("Hamiltonian contains non-finite entries")
    try:
        e, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        cond = np.linalg.cond(h) if h.ndim == 2 else float("nan")
        raise EigensolverError(f"eigensolver did not converge (condition number {cond:.3g})") from exc
    return e, fix_gauge(v)


def diagonalize(H: ArrayLike) -> SpectrumResult:
    """Full spectral decomposition of a symmetric/Hermitian matrix."""
    h = np.asarray(H)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    scale = max(np.max(np.abs(h)), 1.0)
    if np.max(np.abs(h - h.conj().T)) > 1e-12 * scale:
        raise ValueError("matrix is not Hermitian")
    e, v = diagonalize_batch(h)
    return SpectrumResult(e, v)


def spectrum(family: HamiltonianFamily, lam: ArrayLike) -> SpectrumResult:
    return diagonalize(family.matrix(as_point(lam)))


def energy_gap(family: HamiltonianFamily, lam: ArrayLike) -> float:
    """``E_1 - E_0`` at ``lam``."""
    e = np.linalg.eigvalsh(family.matrix(as_point(lam)))
    return float(e[1] - e[0])


def energy_gaps(family: HamiltonianFamily, lams: ArrayLike) -> NDArray[np.float64]:
    e = np.linalg.eigvalsh(family.matrices(lams))
    return e[:, 1] - e[:, 0]


def fock_probabilities(N: int, lam: ArrayLike | ParameterPoint) -> NDArray[np.float64]:
    """Occupation probabilities ``p(n_t) = |<n_s, n_t|psi_0>|^2`` for ``n_t = 0..N``."""
    res = spectrum(LmgModel(N), as_point(lam))
    p = np.abs(res.ground) ** 2
    return p / p.sum()


# --------------------------------------------------------------------------
# diabolic points
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DpSeed:
    """Closed-form DP location for pair index ``l`` on the branch ``sign(chi)``."""

    l: int
    branch: int
    point: ParameterPoint


def dp_seeds(N: int) -> list[DpSeed]:
    """Closed-form DP locations for ``l = 1..floor(N/2)``, both chi branches.

    ``kappa = (1 - 2l)/(N - 2l + 1)``, ``chi = +/- sqrt(N/(2N - 2l + 1))``.
    """
    seeds: list[DpSeed] = []
    if N < 2:
        return seeds
    for l in range(1, N // 2 + 1):
        kappa = (1 - 2 * l) / (N - 2 * l + 1)
        chi = math.sqrt(N / (2 * N - 2 * l + 1))
        seeds.append(DpSeed(l, +1, ParameterPoint(kappa, chi)))
        seeds.append(DpSeed(l, -1, ParameterPoint(kappa, -chi)))
    return seeds


@dataclass(frozen=True)
class DiabolicPoint:
    """A refined ground-state degeneracy.

    ``degenerate_basis`` holds the two lowest gauge-fixed eigenvectors at the
    refined location as columns. Any rotation of this pair is an equally valid
    basis; this one is pinned for reproducibility.
    """

    location: ParameterPoint
    gap_at_location: float
    degenerate_basis: NDArray
    energy: float
    seed: ParameterPoint | None = None
    l: int | None = None
    branch: int | None = None
    evaluations: int = field(default=0, compare=False)

    @property
    def point(self) -> NDArray[np.float64]:
        return self.location.as_array()

    @property
    def displacement(self) -> float:
        if self.seed is None:
            return float("nan")
        return float(np.hypot(self.location.kappa - self.seed.kappa, self.location.chi - self.seed.chi))


def _quadratic_polish(family: HamiltonianFamily, x0: NDArray, scale: float, rounds: int = 6) -> NDArray:
    """Newton-like polish on the squared gap, which is smooth near a conical crossing."""
    x = x0.copy()
    best = energy_gap(family, x) ** 2
    offsets = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1], [1, 1]], dtype=float)
    for _ in range(rounds):
        pts = x + scale * offsets
        vals = energy_gaps(family, pts) ** 2
        # fit a + b.u + u^T C u on the stencil (u in units of scale)
        u, w = offsets[:, 0], offsets[:, 1]
        A = np.column_stack([np.ones(6), u, w, u * u, u * w, w * w])
        coef = np.linalg.solve(A, vals)
        b = coef[1:3]
        C = np.array([[2 * coef[3], coef[4]], [coef[4], 2 * coef[5]]])
        try:
            step = -np.linalg.solve(C, b)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) > 10:
            break
        cand = x + scale * step
        val = energy_gap(family, cand) ** 2
        if val >= best:
            scale *= 0.1
            continue
        x, best = cand, val
        scale = max(min(scale, 10 * scale * np.linalg.norm(step)), 1e-12)
    return x


def dp_refine(
    family: HamiltonianFamily,
    seed: ArrayLike | ParameterPoint | DpSeed,
    simplex_side: float = 1e-3,
    gap_tol: float = 1e-10,
    fail_gap: float = 1e-6,
    max_shift: float = 0.05,
) -> DiabolicPoint:
    """Locally minimize the ground-state gap around ``seed``.

    Nelder-Mead with an initial simplex of side ``simplex_side`` followed by a
    quadratic polish of ``gap**2``. Raises :class:`NoDegeneracyError` when the
    best gap found is above ``fail_gap`` or the minimizer wandered farther than
    ``max_shift`` from the seed (e.g. onto the exponentially small gaps of a
    first-order line).
    """
    l = branch = None
    if isinstance(seed, DpSeed):
        l, branch, seed = seed.l, seed.branch, seed.point
    x0 = as_point(seed)
    simplex = np.array([x0, x0 + [simplex_side, 0.0], x0 + [0.0, simplex_side]])
    res = minimize(
        lambda p: energy_gap(family, p),
        x0,
        method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": 1e-13, "fatol": 1e-15, "maxiter": 4000, "maxfev": 8000},
    )
    x = np.asarray(res.x, dtype=float)
    gap = energy_gap(family, x)
    nfev = int(res.nfev)
    if gap > gap_tol:
        x = _quadratic_polish(family, x, scale=max(gap, 1e-9))
        gap = energy_gap(family, x)
    if gap > fail_gap:
        raise NoDegeneracyError(f"no degeneracy near {tuple(x0)}: minimized gap {gap:.3g}")
    if np.linalg.norm(x - x0) > max_shift:
        raise NoDegeneracyError(f"no degeneracy within {max_shift} of {tuple(x0)}: search ended at {tuple(x)}")
    spec = spectrum(family, x)
    return DiabolicPoint(
        location=ParameterPoint(float(x[0]), float(x[1])),
        gap_at_location=float(spec.gap),
        degenerate_basis=spec.vectors[:, :2].copy(),
        energy=float(0.5 * (spec.energies[0] + spec.energies[1])),
        seed=ParameterPoint(float(x0[0]), float(x0[1])),
        l=l,
        branch=branch if branch is not None else (int(np.sign(x[1])) if len(x) > 1 else None),
        evaluations=nfev,
    )


def refine_all(N: int) -> list[DiabolicPoint]:
    """Refine every closed-form DP seed of the f=1 model with ``N`` bosons."""
    model = LmgModel(N)
    return [dp_refine(model, s) for s in dp_seeds(N)]
