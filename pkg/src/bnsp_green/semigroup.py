"""Spectral projectors, the Fourier-space Green's matrix and frequency bands."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.linalg import expm

from .model import FluidParams, RunConfig
from .spectrum import eigenvalues_batch, track_branches, _min_gap
from .symbol import (
    compressible_embedding,
    compressible_projection,
    compressible_symbol_batch,
)

FALLBACK_GAP = 1e-6


@dataclass(frozen=True)
class ProjectorSet:
    """Spectral projectors at one wavenumber.

    ``P`` has shape (4, 4, 4) with ``P[j]`` the projector of ``theta[j]``
    (branch ``j+1``); it is ``None`` when the eigenvalue gap triggers the
    matrix-exponential fallback.
    """

    P: np.ndarray | None
    theta: np.ndarray
    method: Literal["spectral", "expm-fallback"]
    k: float


@dataclass(frozen=True)
class GreenSymbol:
    """Compressible Green's matrix and transverse heat factors at (k, t)."""

    compressible: np.ndarray
    transverse_ion: float
    transverse_electron: float
    k: float
    t: float
    method: str


def _product_projectors(A, theta):
    """Rank-one projectors prod_{m != j} (A - theta_m)/(theta_j - theta_m), batched."""
    I = np.eye(4)
    out = np.empty(theta.shape + (4, 4), dtype=complex)
    for j in range(4):
        Pj = np.broadcast_to(I, A.shape).astype(complex)
        for m in range(4):
            if m == j:
                continue
            fac = (A - theta[..., m, None, None] * I) / (theta[..., j] - theta[..., m])[..., None, None]
            Pj = Pj @ fac
        out[..., j, :, :] = Pj
    return out


def _degenerate(theta):
    scale = np.maximum(np.abs(theta).max(axis=-1), 1e-300)
    return _min_gap(theta) < FALLBACK_GAP * scale


def _labelled_roots(params: FluidParams, k: float) -> np.ndarray:
    grid = np.geomspace(min(1e-4, k / 10), k, 200)
    return track_branches(params, grid).theta[-1]


def projectors(params: FluidParams, k: float) -> ProjectorSet:
    """Spectral projectors with tracked branch labels.

    Falls back (``P=None``) when the minimal eigenvalue gap is below
    ``1e-6 * max|theta|``.
    """
    k = float(k)
    if not k > 0:
        raise ValueError("k must be > 0")
    theta = _labelled_roots(params, k)
    if _degenerate(theta):
        return ProjectorSet(None, theta, "expm-fallback", k)
    A = compressible_symbol_batch(params, k)
    return ProjectorSet(_product_projectors(A, theta), theta, "spectral", k)


def green_compressible_batch(params: FluidParams, k, t: float, method: str = "auto") -> np.ndarray:
    """exp(t A1(k)) for an array of k, shape ``k.shape + (4, 4)``.

    ``method='auto'`` uses the spectral sum and switches to the matrix
    exponential at samples with nearly colliding eigenvalues; ``'spectral'``
    and ``'expm'`` force one path.
    """
    k = np.asarray(k, dtype=float)
    t = float(t)
    if t < 0:
        raise ValueError("t must be >= 0")
    A = compressible_symbol_batch(params, k)
    if t == 0.0:
        return np.broadcast_to(np.eye(4, dtype=complex), A.shape).copy()
    if method == "expm":
        flat = A.reshape(-1, 4, 4)
        return np.stack([expm(t * a) for a in flat]).reshape(A.shape)
    theta = eigenvalues_batch(params, k)
    P = _product_projectors(A, theta)
    G = np.einsum("...j,...jab->...ab", np.exp(theta * t), P)
    if method == "spectral":
        return G
    bad = _degenerate(theta)
    if np.any(bad):
        idx = np.nonzero(bad)
        G[idx] = np.stack([expm(t * a) for a in A[idx]])
    return G


def green_symbol(params: FluidParams, k: float, t: float) -> GreenSymbol:
    """Compressible semigroup exp(t A1(k)) and transverse heat factors."""
    k = float(k)
    if not k > 0:
        raise ValueError("k must be > 0")
    theta = eigenvalues_batch(params, k)
    method = "expm-fallback" if _degenerate(theta) else "spectral"
    G = green_compressible_batch(params, k, t)
    p = params
    return GreenSymbol(
        G,
        float(np.exp(-p.mu1 * k * k * t / p.rhobar)),
        float(np.exp(-p.mubar1 * k * k * t / p.rhobar)),
        k,
        float(t),
        method,
    )


def full_green_symbol(params: FluidParams, xi, t: float) -> np.ndarray:
    """8x8 Green's matrix exp(t A(xi)) by Hodge recomposition.

    Compressible part ``T Gc S`` plus heat factors on ``I - xihat xihat^T`` in
    the two momentum blocks.
    """
    xi = np.asarray(xi, dtype=float).reshape(3)
    k = float(np.linalg.norm(xi))
    if k == 0.0:
        raise ValueError("wavevector must be nonzero")
    g = green_symbol(params, k, t)
    G = compressible_embedding(xi) @ g.compressible @ compressible_projection(xi)
    xh = xi / k
    Pt = np.eye(3) - np.outer(xh, xh)
    G[1:4, 1:4] += g.transverse_ion * Pt
    G[5:8, 5:8] += g.transverse_electron * Pt
    return G


# ---------------------------------------------------------------- bands


def smooth_step(x):
    """C-infinity transition: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        y = 1.0 - x
        g = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
    return f / (f + g)


def low_cutoff(k, eps1: float):
    """chi_1: 1 on [0, eps1], 0 beyond 2*eps1."""
    return smooth_step((2 * eps1 - np.asarray(k, dtype=float)) / eps1)


def high_cutoff(k, K: float):
    """chi_3: 0 below K, 1 beyond K+1."""
    return smooth_step(np.asarray(k, dtype=float) - K)


def band_weights(config: RunConfig, k):
    """Partition of unity (chi1, chi2, chi3) at wavenumber(s) ``k >= 0``."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("k must be >= 0")
    c1 = low_cutoff(k, config.eps1)
    c3 = high_cutoff(k, config.K)
    c2 = 1.0 - c1 - c3
    if k.ndim == 0:
        return float(c1), float(c2), float(c3)
    return c1, c2, c3


# ---------------------------------------------------------------- cancellation

CancellationKind = Literal["J1", "J2", "rowsum"]


def _acoustic_pair(theta):
    order = np.argsort(np.abs(theta), axis=-1)
    return np.take_along_axis(theta, order[..., :2], axis=-1)


def cancellation_symbol_batch(params: FluidParams, kind: str, k, t: float) -> np.ndarray:
    """Acoustic-pair part of G11-G31 (J1), G12-G32 (J2) or the rho-n row sum.

    Uses closed-form right and left eigenvectors of A1 so the small
    differences are formed without cancellation:
    ``v = (1, -th/k, q, -th q/k)``, ``w = (-(th + mu k^2/r)/k, 1, -q (th + mub k^2/r)/k, q)``
    with ``1 - q = -(th^2 + mu k^2 th/r + c1sq k^2)/r``.
    """
    if kind not in ("J1", "J2", "rowsum"):
        raise ValueError(f"unknown cancellation kind {kind!r}")
    if kind in ("J2", "rowsum") and not params.equal_sound_speeds:
        raise ValueError(f"{kind} order holds only when c1sq == c2sq (equal sound speeds)")
    k = np.asarray(k, dtype=float)
    if np.any(~(k > 0)):
        raise ValueError("k must be > 0")
    p = params
    r = p.rhobar
    th = _acoustic_pair(eigenvalues_batch(p, k))
    kk = k[..., None]
    k2 = kk * kk
    if np.any(np.abs(th.imag) <= 1e-12 * np.abs(th).max(axis=-1, keepdims=True)):
        raise ValueError("acoustic pair is not complex at some k (above the first collision)")
    one_minus_q = -(th * th + p.mu * k2 * th / r + p.c1sq * k2) / r
    q = 1.0 - one_minus_q
    w1 = -(th + p.mu * k2 / r) / kk
    w3 = -q * (th + p.mubar * k2 / r) / kk
    wv = -(2 * th + p.mu * k2 / r + q * q * (2 * th + p.mubar * k2 / r)) / kk
    col = {"J1": w1, "J2": np.ones_like(w1), "rowsum": w1 + w3}[kind]
    return (one_minus_q * col / wv * np.exp(th * t)).sum(axis=-1)


def cancellation_symbol(params: FluidParams, kind: str, k: float, t: float) -> complex:
    """Scalar version of :func:`cancellation_symbol_batch`."""
    return complex(cancellation_symbol_batch(params, kind, float(k), t))
