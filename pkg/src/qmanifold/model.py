"""Parametrized Hamiltonian families.

A family maps a point in a D-dimensional control space to a Hermitian
matrix and exposes the analytic parameter derivatives of that matrix. The
geometry code only ever talks to this interface, so new models plug in by
subclassing :class:`HamiltonianFamily`.

Two concrete families are provided:

* :class:`LmgModel` -- the f=1 (s, t) boson model written in the quasispin
  basis ``|j=N/2, m>``, with states ordered by ``n_t = m + N/2 = 0..N``.
* :class:`TwoLevelModel` -- ``c - x sx - y sy - z sz`` composed with an
  arbitrary chart ``lambda -> (c, x, y, z)``.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class ParameterPoint:
    """A point (kappa, chi) of the two-dimensional control plane."""

    kappa: float
    chi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.kappa) and math.isfinite(self.chi)):
            raise ValueError(f"parameter point must be finite, got ({self.kappa}, {self.chi})")

    def __iter__(self) -> Iterator[float]:
        yield self.kappa
        yield self.chi

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.kappa, self.chi], dtype=float)


def as_point(lam: ArrayLike | ParameterPoint) -> NDArray[np.float64]:
    """Coerce a parameter point to a finite 1-d float array."""
    arr = lam.as_array() if isinstance(lam, ParameterPoint) else np.asarray(lam, dtype=float)
    arr = np.atleast_1d(arr)
    if arr.ndim != 1:
        raise ValueError(f"parameter point must be 1-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"parameter point must be finite, got {arr}")
    return arr


class HamiltonianFamily(ABC):
    """Abstract parametrized family ``lambda -> H(lambda)``.

    Subclasses implement :meth:`matrix` and :meth:`derivatives`; the batch
    methods have looping defaults that subclasses may vectorize.
    """

    #: number of control parameters D
    n_params: int = 2
    #: True when every matrix is real symmetric
    is_real: bool = True

    @property
    @abstractmethod
    def dim(self) -> int:
        """Hilbert-space dimension d."""

    @abstractmethod
    def matrix(self, lam: ArrayLike) -> NDArray:
        """Return the d x d Hermitian matrix at ``lam``."""

    @abstractmethod
    def derivatives(self, lam: ArrayLike) -> NDArray:
        """Return the stack ``dH/dlambda_mu`` with shape (D, d, d)."""

    def second_derivatives(self, lam: ArrayLike) -> NDArray | None:
        """Return ``d2H/dlambda_mu dlambda_nu`` with shape (D, D, d, d), if known."""
        return None

    def derivative(self, lam: ArrayLike, mu: int) -> NDArray:
        return self.derivatives(lam)[mu]

    def matrices(self, lams: ArrayLike) -> NDArray:
        lams = np.atleast_2d(np.asarray(lams, dtype=float))
        return np.stack([self.matrix(p) for p in lams])

    def derivatives_batch(self, lams: ArrayLike) -> NDArray:
        lams = np.atleast_2d(np.asarray(lams, dtype=float))
        return np.stack([self.derivatives(p) for p in lams])


# --------------------------------------------------------------------------
# quasispin algebra
# --------------------------------------------------------------------------


def quasispin_operators(N: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Return (J_z, J_x) for j = N/2 in the basis m = -j..j (ascending).

    Built from ``J_+|j,m> = sqrt((j-m)(j+m+1)) |j,m+1>``.
    """
    if N < 1:
        raise ValueError(f"boson number must be >= 1, got {N}")
    j = N / 2.0
    m = np.arange(N + 1) - j
    jz = np.diag(m)
    jp = np.zeros((N + 1, N + 1))
    up = np.sqrt((j - m[:-1]) * (j + m[:-1] + 1.0))
    jp[np.arange(1, N + 1), np.arange(N)] = up
    jx = 0.5 * (jp + jp.T)
    return jz, jx


class LmgModel(HamiltonianFamily):
    """The f=1 boson model in quasispin form.

    ``H = J_z - (1/N)[kappa J_x^2 + chi {J_x, J_z + N/2} + chi^2 (J_z + N/2)^2] + E0``
    with ``E0 = -kappa/4`` when ``energy_shift`` is true.
    Basis index ``n_t = 0..N`` corresponds to ``m = n_t - N/2``.
    """

    n_params = 2
    is_real = True

    def __init__(self, N: int, energy_shift: bool = True):
        if int(N) != N or N < 1:
            raise ValueError(f"boson number must be a positive integer, got {N}")
        self.N = int(N)
        self.energy_shift = bool(energy_shift)

    def __repr__(self) -> str:
        return f"LmgModel(N={self.N})"

    @property
    def dim(self) -> int:
        return self.N + 1

    @cached_property
    def _ops(self) -> dict[str, NDArray[np.float64]]:
        N = self.N
        jz, jx = quasispin_operators(N)
        nt = jz + 0.5 * N * np.eye(N + 1)  # J_z + N/2 = t-boson number
        ops = {
            "jz": jz,
            "jx2": jx @ jx,
            "anti": jx @ nt + nt @ jx,
            "nt2": nt @ nt,
            "eye": np.eye(N + 1),
        }
        for op in ops.values():
            op.setflags(write=False)
        return ops

    def matrix(self, lam: ArrayLike) -> NDArray[np.float64]:
        kappa, chi = as_point(lam)
        o = self._ops
        h = o["jz"] - (kappa * o["jx2"] + chi * o["anti"] + chi * chi * o["nt2"]) / self.N
        if self.energy_shift:
            h = h - 0.25 * kappa * o["eye"]
        return h

    def derivatives(self, lam: ArrayLike) -> NDArray[np.float64]:
        kappa, chi = as_point(lam)
        o = self._ops
        dk = -o["jx2"] / self.N
        if self.energy_shift:
            dk = dk - 0.25 * o["eye"]
        dc = -(o["anti"] + 2.0 * chi * o["nt2"]) / self.N
        return np.stack([dk, dc])

    def second_derivatives(self, lam: ArrayLike) -> NDArray[np.float64]:
        d = self.dim
        out = np.zeros((2, 2, d, d))
        out[1, 1] = -2.0 * self._ops["nt2"] / self.N
        return out

    def matrices(self, lams: ArrayLike) -> NDArray[np.float64]:
        lams = np.atleast_2d(np.asarray(lams, dtype=float))
        k = lams[:, 0, None, None]
        c = lams[:, 1, None, None]
        o = self._ops
        h = o["jz"] - (k * o["jx2"] + c * o["anti"] + c * c * o["nt2"]) / self.N
        if self.energy_shift:
            h = h - 0.25 * k * o["eye"]
        return h

    def derivatives_batch(self, lams: ArrayLike) -> NDArray[np.float64]:
        lams = np.atleast_2d(np.asarray(lams, dtype=float))
        n = len(lams)
        o = self._ops
        dk = -o["jx2"] / self.N
        if self.energy_shift:
            dk = dk - 0.25 * o["eye"]
        out = np.empty((n, 2, self.dim, self.dim))
        out[:, 0] = dk
        out[:, 1] = -(o["anti"] + 2.0 * lams[:, 1, None, None] * o["nt2"]) / self.N
        return out


def lmg_matrix(N: int, lam: ArrayLike | ParameterPoint) -> NDArray[np.float64]:
    """Quasispin Hamiltonian matrix of the f=1 model at ``lam = (kappa, chi)``."""
    return LmgModel(N).matrix(as_point(lam))


def lmg_derivatives(
    N: int, lam: ArrayLike | ParameterPoint
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Return ``(dH/dkappa, dH/dchi, d2H/dchi2)``; all other second derivatives vanish."""
    model = LmgModel(N)
    p = as_point(lam)
    dk, dc = model.derivatives(p)
    return dk, dc, model.second_derivatives(p)[1, 1]


# --------------------------------------------------------------------------
# two-level model
# --------------------------------------------------------------------------


_PAULI_BASIS = np.stack([np.eye(2, dtype=complex), -SIGMA_X, -SIGMA_Y, -SIGMA_Z])


def two_level_matrix(c: float, x: float, y: float, z: float) -> NDArray[np.complex128]:
    """``c I - x sx - y sy - z sz``; eigenvalues ``c -/+ r`` with ``r = |(x, y, z)|``."""
    vals = np.array([c, x, y, z], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"two-level parameters must be finite, got {vals}")
    return c * np.eye(2, dtype=complex) - x * SIGMA_X - y * SIGMA_Y - z * SIGMA_Z


Chart = Callable[[NDArray[np.float64]], ArrayLike]


class TwoLevelModel(HamiltonianFamily):
    """Two-level Hamiltonian pulled back through a chart ``lambda -> (c, x, y, z)``.

    ``jacobian`` returns the (4, D) matrix of chart derivatives; when omitted
    it is estimated by central differences with step ``fd_step``.
    """

    def __init__(
        self,
        chart: Chart,
        n_params: int = 2,
        jacobian: Callable[[NDArray[np.float64]], ArrayLike] | None = None,
        is_real: bool = False,
        fd_step: float = 1e-6,
    ):
        self.chart = chart
        self.n_params = int(n_params)
        self.jacobian = jacobian
        self.is_real = bool(is_real)
        self.fd_step = fd_step

    @property
    def dim(self) -> int:
        return 2

    def bloch(self, lam: ArrayLike) -> NDArray[np.float64]:
        return np.asarray(self.chart(as_point(lam)), dtype=float)

    def _jac(self, lam: NDArray[np.float64]) -> NDArray[np.float64]:
        if self.jacobian is not None:
            return np.asarray(self.jacobian(lam), dtype=float)
        cols = []
        for mu in range(self.n_params):
            e = np.zeros(self.n_params)
            e[mu] = self.fd_step
            cols.append((self.bloch(lam + e) - self.bloch(lam - e)) / (2 * self.fd_step))
        return np.stack(cols, axis=1)

    def _compose(self, cxyz: NDArray[np.float64], constant: bool = True) -> NDArray:
        coeffs = np.array(cxyz, dtype=float)
        if not constant:
            coeffs[0] = 0.0
        m = np.tensordot(coeffs, _PAULI_BASIS, axes=1)
        return m.real.copy() if self.is_real else m

    def matrix(self, lam: ArrayLike) -> NDArray:
        return self._compose(self.bloch(lam))

    def derivatives(self, lam: ArrayLike) -> NDArray:
        jac = self._jac(as_point(lam))
        return np.stack([self._compose(jac[:, mu]) for mu in range(self.n_params)])

    @classmethod
    def sphere(cls, radius: float = 1.0) -> "TwoLevelModel":
        """Chart ``(theta, phi) -> (0, r sin(theta) cos(phi), r sin(theta) sin(phi), r cos(theta))``."""

        def chart(p):
            th, ph = p
            return (0.0, radius * math.sin(th) * math.cos(ph),
                    radius * math.sin(th) * math.sin(ph), radius * math.cos(th))

        def jac(p):
            th, ph = p
            st, ct, sp, cp = math.sin(th), math.cos(th), math.sin(ph), math.cos(ph)
            return radius * np.array(
                [[0.0, 0.0], [ct * cp, -st * sp], [ct * sp, st * cp], [-st, 0.0]]
            )

        return cls(chart, 2, jac, is_real=False)

    @classmethod
    def plane(cls, axes: Sequence[str] = ("x", "z"), offset: ArrayLike = (0.0, 0.0, 0.0)) -> "TwoLevelModel":
        """Linear chart placing the two parameters along two Bloch axes.

        The default ``(x, z)`` plane keeps every matrix real; the DP sits at
        ``lambda = 0`` unless ``offset`` moves it.
        """
        index = {"x": 1, "y": 2, "z": 3}
        cols = [index[a] for a in axes]
        base = np.concatenate([[0.0], np.asarray(offset, dtype=float)])
        jac = np.zeros((4, len(cols)))
        for mu, col in enumerate(cols):
            jac[col, mu] = 1.0

        def chart(p):
            return base + jac @ p

        return cls(chart, len(cols), lambda p: jac, is_real="y" not in axes)


class ShiftedFamily(HamiltonianFamily):
    """Wrap a family and add ``shift(lambda) * I``; geometrically inert."""

    def __init__(self, base: HamiltonianFamily, shift: float | Callable[[NDArray], float] = 1.0):
        self.base = base
        self.shift = shift
        self.n_params = base.n_params
        self.is_real = base.is_real

    @property
    def dim(self) -> int:
        return self.base.dim

    def _s(self, lam):
        return self.shift(lam) if callable(self.shift) else self.shift

    def matrix(self, lam: ArrayLike) -> NDArray:
        lam = as_point(lam)
        return self.base.matrix(lam) + self._s(lam) * np.eye(self.dim)

    def derivatives(self, lam: ArrayLike) -> NDArray:
        lam = as_point(lam)
        d = self.base.derivatives(lam).copy()
        if callable(self.shift):
            h = 1e-6
            for mu in range(self.n_params):
                e = np.zeros(self.n_params)
                e[mu] = h
                d[mu] = d[mu] + (self.shift(lam + e) - self.shift(lam - e)) / (2 * h) * np.eye(self.dim)
        return d
