"""Radial Fourier inversion (spherical Bessel quadrature), FFT cross-check, Green action.

Convention: for a radial amplitude ``a(k)`` and angular order ``l``,

    T_l[a](r) = 1/(2 pi^2) * int_0^inf k^2 a(k) j_l(k r) dk,

which is the inverse Fourier transform of ``(-i)^l a(k)`` times the matching
angular factor. Concretely

* ``l = 0``: ``F^{-1}[a] = T_0[a]``;
* ``l = 1``: ``F^{-1}[-i khat a] = T_1[a] xhat``;
* ``l = 2``: ``F^{-1}[a (khat khat^T - I/3)] = -T_2[a] (xhat xhat^T - I/3)``.

The profile returned for ``l = 2`` is the coefficient of ``(xhat xhat^T - I/3)``,
i.e. ``-T_2[a]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import erf, spherical_jn

from .model import FluidParams, RunConfig, front_speed
from .semigroup import green_compressible_batch, low_cutoff

_NODES = 8


@dataclass(frozen=True)
class RadialSymbol:
    """Radial amplitude ``a(k)`` on (0, kmax] with an angular order."""

    a: Callable[[np.ndarray], np.ndarray]
    ell: int
    kmax: float
    band: str = "full"
    phase_scale: float = 0.0  # largest k-frequency carried by a(k) itself (e.g. c*t)


@dataclass(frozen=True)
class RadialProfile:
    """Scalar function of radius at fixed time."""

    r: np.ndarray
    values: np.ndarray
    t: float = 0.0
    provenance: str = "raw-low-band"
    entry: str = ""
    ell: int = 0
    sigma: float | None = None
    meta: dict = field(default_factory=dict)


def gl_panels(kmax: float, scale: float, n: int = _NODES, kmin: float = 0.0):
    """Composite Gauss-Legendre nodes on [kmin, kmax].

    Panel width is at most ``pi / (4 * max(scale, 1))`` so that oscillations
    ``exp(i k scale)`` get at least ``n`` nodes per quarter period.
    """
    width = math.pi / (4.0 * max(scale, 1.0))
    m = max(1, int(math.ceil((kmax - kmin) / width)))
    edges = np.linspace(kmin, kmax, m + 1)
    x, w = leggauss(n)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return nodes, weights


def radial_quadrature(ak: np.ndarray, k: np.ndarray, w: np.ndarray, r: np.ndarray, ell: int, derivative: bool = False) -> np.ndarray:
    """Apply T_l to sampled amplitudes (real or complex), chunked over r."""
    r = np.asarray(r, dtype=float)
    out = np.empty(r.shape, dtype=np.result_type(ak, float))
    base = w * k * k * ak / (2 * math.pi**2)
    if derivative:
        base = base * k
    chunk = max(1, int(4e6 // max(k.size, 1)))
    flat = r.ravel()
    res = out.ravel()
    for i in range(0, flat.size, chunk):
        rr = flat[i : i + chunk]
        J = spherical_jn(ell, np.outer(rr, k), derivative=derivative)
        res[i : i + chunk] = J @ base
    return res.reshape(r.shape)


def radial_inverse_transform(sym: RadialSymbol, r_grid, atol: float = 1e-12, nodes: int = _NODES) -> RadialProfile:
    """Inverse 3D Fourier transform of a radial symbol of order 0, 1 or 2.

    Returns T_0[a], T_1[a] (radial component of ``F^{-1}[-i khat a]``) or
    ``-T_2[a]`` (coefficient of ``xhat xhat^T - I/3``).

    Raises
    ------
    ValueError
        If ``k^2 |a|`` at the truncation point exceeds ``atol`` (tail not negligible).
    """
    if sym.ell not in (0, 1, 2):
        raise ValueError("angular order must be 0, 1 or 2")
    r = np.asarray(r_grid, dtype=float)
    tail = np.abs(np.asarray(sym.a(np.array([sym.kmax])))) * sym.kmax**2
    if not np.all(np.isfinite(tail)) or tail.max() > atol:
        raise ValueError(f"symbol not negligible at kmax={sym.kmax}: k^2|a| = {tail.max():.3e} > atol")
    scale = max(float(np.max(r)) if r.size else 0.0, sym.phase_scale, 1.0)
    k, w = gl_panels(sym.kmax, scale, nodes)
    ak = np.asarray(sym.a(k))
    vals = radial_quadrature(ak, k, w, r, sym.ell)
    if sym.ell == 2:
        vals = -vals
    if np.iscomplexobj(vals):
        amp = max(np.abs(vals).max(), 1e-300)
        if np.abs(vals.imag).max() > 1e-8 * amp:
            raise ValueError("complex radial profile: amplitude is not real")
        vals = vals.real
    return RadialProfile(r, vals, provenance=sym.band, ell=sym.ell)


# ---------------------------------------------------------------- FFT path


def fft_grid(n: int, dk: float):
    """1-D wavenumber and position axes for an ``n``-point centred grid."""
    m = np.arange(n) - n // 2
    return m * dk, m * (2 * math.pi / (n * dk))


def fft_crosscheck(symbol: np.ndarray, dk: float, atol: float = 1e-12) -> np.ndarray:
    """Continuum-normalised inverse FFT of a symbol sampled on a centred cube.

    ``f(x) = (2 pi)^{-3} sum a(xi) exp(i xi.x) dk^3`` on the matching centred
    position grid from :func:`fft_grid`.
    """
    a = np.asarray(symbol)
    n = a.shape[0]
    if a.ndim != 3 or a.shape != (n, n, n) or n & (n - 1):
        raise ValueError("symbol must be an N^3 array with N a power of two")
    edge = max(np.abs(a[0]).max(), np.abs(a[:, 0]).max(), np.abs(a[:, :, 0]).max())
    if edge > atol:
        raise ValueError(f"aliasing: symbol {edge:.3e} > atol at the Nyquist faces")
    f = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(a))) * (n * dk / (2 * math.pi)) ** 3
    amp = max(np.abs(f).max(), 1e-300)
    if np.abs(f.imag).max() > 1e-8 * amp:
        raise ValueError("inverse transform has a non-negligible imaginary part")
    return f.real


def _gaussian_mass(r, sigma):
    u = np.asarray(r, dtype=float) / sigma
    return (2 * math.pi) ** -1.5 * (math.sqrt(math.pi / 2) * erf(u / math.sqrt(2)) - u * np.exp(-0.5 * u * u))


def gaussian_newton_field(r, sigma: float) -> np.ndarray:
    """``E(r) = r^{-2} int_0^r g(s) s^2 ds`` for the normalised Gaussian ``g``."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _gaussian_mass(r, sigma) / np.where(r > 0, r, 1.0) ** 2
    return np.where(r > 0, out, 0.0)


def gaussian_longitudinal_rr(r, sigma: float) -> np.ndarray:
    """Radial-radial component of ``F^{-1}[khat khat^T exp(-sigma^2 k^2/2)]``.

    Equals ``g - 2 E / r`` with ``g`` the normalised Gaussian and ``E`` its
    Newton field; ``g/3`` at the origin.
    """
    r = np.asarray(r, dtype=float)
    g = gaussian_profile(r, sigma)
    mass = _gaussian_mass(r, sigma)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = g - 2 * mass / np.where(r > 0, r, 1.0) ** 3
    return np.where(r > 0, out, g / 3.0)


def fft_green_entry(
    params: FluidParams,
    config: RunConfig,
    entry: str,
    t: float,
    n: int = 64,
    atol: float = 1e-12,
) -> tuple[np.ndarray, np.ndarray]:
    """Mollified Green entry on the positive x-axis via a 3-D inverse FFT.

    Independent of the radial quadrature: the full-space symbol is sampled on
    an ``n^3`` cube whose Nyquist wavenumber puts the mollifier below
    ``atol``. The origin sample uses the ``k -> 0+`` limit. For
    longitudinal entries the direction-dependent part ``G(0+) khat khat^T``
    (field decaying like ``r^{-3}``), and for vector entries a Coulomb part
    ``b khat / k`` (decaying like ``r^{-2}``), would alias; both are
    subtracted and added back in closed form.
    """
    sel = EntrySelector.parse(entry)
    sigma = config.sigma
    knyq = math.sqrt(2 * math.log(1 / atol)) / sigma
    dk = knyq / (n // 2 - 1)
    k1, x1 = fft_grid(n, dk)
    kx = k1[:, None, None]
    K = np.sqrt(kx**2 + k1[None, :, None] ** 2 + k1[None, None, :] ** 2)
    Ks = np.where(K > 0, K, 1.0)
    G = green_compressible_batch(params, Ks.ravel(), t).reshape(K.shape + (4, 4))
    G0 = green_compressible_batch(params, np.array([1e-7]), t)[0]
    moll = np.exp(-0.5 * sigma**2 * K * K)
    xh = np.where(K > 0, kx / Ks, 0.0)
    a = np.zeros(K.shape, dtype=complex)
    lim = 0.0
    for (i, j), c in sel.terms:
        a += c * G[..., i, j]
        lim += c * G0[i, j]
    origin = K == 0
    if sel.component == "scalar":
        a[origin] = lim
        a *= moll
    elif sel.component == "radial":
        # row phi: -i khat a ; row scalar: +i khat a. A Coulomb part b/k is
        # removed and restored through the Gaussian's Newton field.
        tiny = 1e-7
        b = 0.0
        for (i, j), c in sel.terms:
            b += c * tiny * green_compressible_batch(params, np.array([tiny]), t)[0][i, j]
        a = -sel.vector_sign * 1j * xh * (a - b / Ks) * moll
        a[origin] = 0.0
        lim = b
    else:
        a = xh * xh * (a - lim) * moll
        a[origin] = 0.0
    f = fft_crosscheck(a, dk, atol=10 * atol)
    i0 = n // 2
    x = x1[i0:]
    v = f[i0:, i0, i0]
    if sel.component == "longitudinal":
        v = v + np.real(lim) * gaussian_longitudinal_rr(x, sigma)
    elif sel.component == "radial":
        v = v + sel.vector_sign * np.real(lim) * gaussian_newton_field(x, sigma)
    return x, v


# ---------------------------------------------------------------- Green action

_ROLE = {"rho": 0, "phi1": 1, "n": 2, "phi2": 3, "1": 0, "2": 1, "3": 2, "4": 3}


@dataclass(frozen=True)
class EntrySelector:
    """Linear combination of compressible Green entries with an output component.

    ``terms`` maps zero-based (row, col) to coefficients. ``component`` is
    ``'scalar'`` (rows/cols both density roles), ``'radial'`` for the radial
    component of a vector entry, ``'longitudinal'`` for the radial-radial
    component of the ``xihat xihat^T`` part of a momentum-momentum entry.
    """

    terms: tuple
    component: str
    label: str

    @classmethod
    def parse(cls, text: str) -> "EntrySelector":
        """Parse strings like ``'G11'``, ``'G11-G31'``, ``'G11+G31'``, ``'G22'``.

        Indices are one-based over (rho, phi1, n, phi2).
        """
        s = text.replace(" ", "")
        terms = []
        i = 0
        sign = 1.0
        while i < len(s):
            if s[i] in "+-":
                sign = 1.0 if s[i] == "+" else -1.0
                i += 1
            if i + 3 > len(s) or s[i] != "G" or not s[i + 1 : i + 3].isdigit():
                raise ValueError(f"bad entry selector {text!r}")
            a, b = int(s[i + 1]) - 1, int(s[i + 2]) - 1
            if not (0 <= a < 4 and 0 <= b < 4):
                raise ValueError(f"bad entry selector {text!r}")
            terms.append(((a, b), sign))
            i += 3
            sign = 1.0
        rows = {a % 2 for (a, _), _ in terms}
        cols = {b % 2 for (_, b), _ in terms}
        if len(rows) != 1 or len(cols) != 1:
            raise ValueError("mixed scalar/vector roles in one selector")
        rv, cv = rows.pop() == 1, cols.pop() == 1
        comp = "longitudinal" if (rv and cv) else ("radial" if (rv or cv) else "scalar")
        return cls(tuple(terms), comp, text)

    def symbol(self, params: FluidParams, k, t: float) -> np.ndarray:
        G = green_compressible_batch(params, k, t)
        out = np.zeros(np.shape(k), dtype=complex)
        for (a, b), c in self.terms:
            out = out + c * G[..., a, b]
        return out

    @property
    def vector_sign(self) -> float:
        """Sign relating the entry's vector field to T_1 of its amplitude.

        Column vector (row phi): ``-i khat a`` -> ``+T_1``; row vector
        (column phi): ``+i khat a`` -> ``-T_1``.
        """
        (a, _), _ = self.terms[0]
        return 1.0 if a % 2 == 1 else -1.0


def _profile_from_amplitude(amp, k, w, r, component, sign=1.0):
    if component == "scalar":
        v = radial_quadrature(amp, k, w, r, 0)
    elif component == "radial":
        v = sign * radial_quadrature(amp, k, w, r, 1)
    else:
        t0 = radial_quadrature(amp, k, w, r, 0)
        t2 = radial_quadrature(amp, k, w, r, 2)
        v = t0 / 3.0 - 2.0 * t2 / 3.0
    return v


def green_action(
    params: FluidParams,
    config: RunConfig,
    entry: str | EntrySelector,
    t: float,
    r_grid,
    mode: Literal["raw-low-band", "mollified-full"] = "raw-low-band",
) -> RadialProfile:
    """Physical-space profile of a Green entry.

    ``raw-low-band`` transforms ``chi_1(k) G(k, t)``; ``mollified-full``
    transforms ``G(k, t) exp(-sigma^2 k^2 / 2)``, the response to Gaussian data
    of width ``sigma``. Vector entries return the radial component,
    momentum-momentum entries the radial-radial component of their
    ``khat khat^T`` part.
    """
    sel = entry if isinstance(entry, EntrySelector) else EntrySelector.parse(entry)
    r = np.asarray(r_grid, dtype=float)
    t = float(t)
    c = front_speed(params)
    scale = max(float(r.max()) if r.size else 0.0, c * t, 1.0)
    if mode == "raw-low-band":
        kmax = 2 * config.eps1
        weight = lambda kk: low_cutoff(kk, config.eps1)
        sigma = None
    elif mode == "mollified-full":
        kmax = config.kmax
        weight = lambda kk: np.exp(-0.5 * config.sigma**2 * kk * kk)
        sigma = config.sigma
        if weight(np.array(kmax)) * kmax**2 > config.atol:
            raise ValueError("mollified tail above atol at kmax")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    k, w = gl_panels(kmax, scale)
    amp = sel.symbol(params, k, t) * weight(k)
    v = _profile_from_amplitude(amp, k, w, r, sel.component, sel.vector_sign)
    amp_max = max(np.abs(v).max(), 1e-300)
    if np.abs(np.imag(v)).max() > 1e-8 * amp_max:
        raise ValueError("profile has a non-negligible imaginary part")
    return RadialProfile(r, np.real(v), t, mode, sel.label, {"scalar": 0, "radial": 1, "longitudinal": 2}[sel.component], sigma)


def gaussian_profile(r, sigma: float) -> np.ndarray:
    """Normalised 3D Gaussian g_sigma(r)."""
    r = np.asarray(r, dtype=float)
    return (2 * math.pi * sigma**2) ** -1.5 * np.exp(-0.5 * r * r / sigma**2)
