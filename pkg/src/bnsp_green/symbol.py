"""Fourier symbols of the linearized system and their characteristic polynomial."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FluidParams


@dataclass(frozen=True)
class SymbolMatrix4:
    """Compressible-part symbol A1(k) acting on (rho, phi1, n, phi2)."""

    entries: np.ndarray
    k: float


@dataclass(frozen=True)
class SymbolMatrix8:
    """Full symbol A(xi) acting on (rho, m, n, omega)."""

    entries: np.ndarray
    xi: np.ndarray


@dataclass(frozen=True)
class CharPoly:
    """Monic quartic theta^4 + a3 theta^3 + a2 theta^2 + a1 theta + a0."""

    a3: float
    a2: float
    a1: float
    a0: float
    k: float

    @property
    def coefficients(self) -> np.ndarray:
        """Coefficients in descending powers, numpy.roots order."""
        return np.array([1.0, self.a3, self.a2, self.a1, self.a0])

    def __call__(self, theta):
        th = np.asarray(theta)
        return (((th + self.a3) * th + self.a2) * th + self.a1) * th + self.a0

    def derivative(self, theta):
        th = np.asarray(theta)
        return ((4 * th + 3 * self.a3) * th + 2 * self.a2) * th + self.a1


def _check_k(k):
    k = np.asarray(k, dtype=float)
    if np.any(~(k > 0)):
        raise ValueError("wavenumber k must be > 0")
    return k


def compressible_symbol_batch(params: FluidParams, k) -> np.ndarray:
    """A1(k) for an array of wavenumbers, shape ``k.shape + (4, 4)``."""
    k = _check_k(k)
    p = params
    A = np.zeros(k.shape + (4, 4), dtype=complex)
    A[..., 0, 1] = -k
    A[..., 1, 0] = p.c1sq * k + p.rhobar / k
    A[..., 1, 1] = -(p.mu / p.rhobar) * k**2
    A[..., 1, 2] = -p.rhobar / k
    A[..., 2, 3] = -k
    A[..., 3, 0] = -p.rhobar / k
    A[..., 3, 2] = p.c2sq * k + p.rhobar / k
    A[..., 3, 3] = -(p.mubar / p.rhobar) * k**2
    return A


def build_compressible_symbol(params: FluidParams, k: float) -> SymbolMatrix4:
    """Exact 4x4 symbol A1(k) for k > 0."""
    return SymbolMatrix4(compressible_symbol_batch(params, float(k)), float(k))


def build_full_symbol(params: FluidParams, xi) -> SymbolMatrix8:
    """Exact 8x8 symbol A(xi), including the Poisson coupling."""
    xi = np.asarray(xi, dtype=float).reshape(3)
    k2 = float(xi @ xi)
    if k2 == 0.0:
        raise ValueError("wavevector must be nonzero")
    p = params
    I3 = np.eye(3)
    outer = np.outer(xi, xi)
    pois = 1j * p.rhobar * xi / k2
    A = np.zeros((8, 8), dtype=complex)
    A[0, 1:4] = -1j * xi
    A[1:4, 0] = -1j * p.c1sq * xi - pois
    A[1:4, 1:4] = -(p.mu1 / p.rhobar) * k2 * I3 - (p.mu2 / p.rhobar) * outer
    A[1:4, 4] = pois
    A[4, 5:8] = -1j * xi
    A[5:8, 0] = pois
    A[5:8, 4] = -1j * p.c2sq * xi - pois
    A[5:8, 5:8] = -(p.mubar1 / p.rhobar) * k2 * I3 - (p.mubar2 / p.rhobar) * outer
    return SymbolMatrix8(A, xi.copy())


def compressible_embedding(xi) -> np.ndarray:
    """8x4 map T from (rho, phi1, n, phi2) to (rho, m, n, omega).

    ``m = -i xihat phi1`` and ``omega = -i xihat phi2``, so that
    ``A(xi) T = T A1(|xi|)``.
    """
    xi = np.asarray(xi, dtype=float).reshape(3)
    xh = xi / np.linalg.norm(xi)
    T = np.zeros((8, 4), dtype=complex)
    T[0, 0] = 1.0
    T[1:4, 1] = -1j * xh
    T[4, 2] = 1.0
    T[5:8, 3] = -1j * xh
    return T


def compressible_projection(xi) -> np.ndarray:
    """4x8 left inverse S of :func:`compressible_embedding` (``phi1 = i xihat . m``)."""
    xi = np.asarray(xi, dtype=float).reshape(3)
    xh = xi / np.linalg.norm(xi)
    S = np.zeros((4, 8), dtype=complex)
    S[0, 0] = 1.0
    S[1, 1:4] = 1j * xh
    S[2, 4] = 1.0
    S[3, 5:8] = 1j * xh
    return S


def characteristic_coefficients(params: FluidParams, k: float) -> CharPoly:
    """Closed-form coefficients of det(theta I - A1(k))."""
    k = float(_check_k(k))
    a3, a2, a1, a0 = char_coeffs_batch(params, k)
    return CharPoly(float(a3), float(a2), float(a1), float(a0), k)


def char_coeffs_batch(params: FluidParams, k):
    """Coefficients (a3, a2, a1, a0) for ``k >= 0``; regular at k = 0."""
    p = params
    k = np.asarray(k, dtype=float)
    k2 = k * k
    r = p.rhobar
    a3 = (p.mu + p.mubar) * k2 / r
    a2 = p.mu * p.mubar * k2 * k2 / r**2 + (p.c1sq + p.c2sq) * k2 + 2 * r
    a1 = ((p.c1sq * p.mubar + p.c2sq * p.mu) * k2 / r + p.mu + p.mubar) * k2
    a0 = p.c1sq * p.c2sq * k2 * k2 + (p.c1sq + p.c2sq) * r * k2
    return a3, a2, a1, a0


def factored_coefficients(params: FluidParams, k: float) -> np.ndarray:
    """Coefficients of [th(th+mu k^2/r)+c1^2k^2+r][th(th+mub k^2/r)+c2^2k^2+r] - r^2.

    An independent route to the characteristic polynomial, descending order.
    """
    p = params
    k2 = float(k) ** 2
    r = p.rhobar
    f1 = np.array([1.0, p.mu * k2 / r, p.c1sq * k2 + r])
    f2 = np.array([1.0, p.mubar * k2 / r, p.c2sq * k2 + r])
    out = np.polymul(f1, f2)
    # (a + r)(b + r) - r^2 without cancellation
    a, b = p.c1sq * k2, p.c2sq * k2
    out[-1] = a * b + r * (a + b)
    return out
