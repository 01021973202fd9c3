"""Eigenvalue branches of A1(k): solving, tracking and expansion checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import mpmath
import numpy as np

from .model import FluidParams
from .symbol import char_coeffs_batch

_EPS = np.finfo(float).eps
_PERMS = np.array(list(itertools.permutations(range(4))))


# ---------------------------------------------------------------- roots


def _companion(a3, a2, a1, a0):
    n = np.shape(a3)
    C = np.zeros(n + (4, 4))
    C[..., 0, 0] = -a3
    C[..., 0, 1] = -a2
    C[..., 0, 2] = -a1
    C[..., 0, 3] = -a0
    C[..., 1, 0] = C[..., 2, 1] = C[..., 3, 2] = 1.0
    return C


def _peval(c, th):
    a3, a2, a1, a0 = (np.asarray(x)[..., None] for x in c)
    p = (((th + a3) * th + a2) * th + a1) * th + a0
    dp = ((4 * th + 3 * a3) * th + 2 * a2) * th + a1
    mag = (((np.abs(th) + np.abs(a3)) * np.abs(th) + np.abs(a2)) * np.abs(th) + np.abs(a1)) * np.abs(th) + np.abs(a0)
    return p, dp, mag


def eigenvalues_batch(params: FluidParams, k) -> np.ndarray:
    """Roots of the characteristic quartic for each k, shape ``k.shape + (4,)``.

    Companion-matrix eigensolve followed by one Newton step, kept only where it
    lowers the residual (double roots at k = 0 are left untouched).
    """
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("k must be >= 0")
    c = char_coeffs_batch(params, k)
    th = np.linalg.eigvals(_companion(*c)).astype(complex)
    p, dp, _ = _peval(c, th)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(np.abs(dp) > 0, p / dp, 0.0)
    cand = th - step
    pc, _, _ = _peval(c, cand)
    better = np.isfinite(cand) & (np.abs(pc) < np.abs(p))
    return np.where(better, cand, th)


def eigenvalues(params: FluidParams, k: float) -> np.ndarray:
    """Four complex roots of the characteristic polynomial at wavenumber ``k >= 0``."""
    return eigenvalues_batch(params, float(k))


def root_error_estimate(params: FluidParams, k, theta) -> np.ndarray:
    """First-order rounding-error bound for computed roots (eps * cond)."""
    c = char_coeffs_batch(params, np.asarray(k, dtype=float))
    _, dp, mag = _peval(c, np.asarray(theta))
    with np.errstate(divide="ignore"):
        return 8 * _EPS * mag / np.abs(dp)


def refine_roots_mp(params: FluidParams, k, theta, dps: int = 40, steps: int = 4) -> list:
    """Newton-refine double-precision roots in extended precision.

    Returns a list (per sample) of four ``mpmath.mpc`` roots. Used where
    expansion remainders fall below double rounding of the roots.
    """
    p = params
    out = []
    with mpmath.workdps(dps):
        mu, mub, r = mpmath.mpf(p.mu), mpmath.mpf(p.mubar), mpmath.mpf(p.rhobar)
        c1, c2 = mpmath.mpf(p.c1sq), mpmath.mpf(p.c2sq)
        for ki, row in zip(np.atleast_1d(k), np.atleast_2d(theta)):
            kk = mpmath.mpf(float(ki)) ** 2
            a3 = (mu + mub) * kk / r
            a2 = mu * mub * kk**2 / r**2 + (c1 + c2) * kk + 2 * r
            a1 = ((c1 * mub + c2 * mu) * kk / r + mu + mub) * kk
            a0 = c1 * c2 * kk**2 + (c1 + c2) * r * kk
            refined = []
            for z0 in row:
                z = mpmath.mpc(complex(z0))
                for _ in range(steps):
                    pz = (((z + a3) * z + a2) * z + a1) * z + a0
                    dz = ((4 * z + 3 * a3) * z + 2 * a2) * z + a1
                    if dz == 0:
                        break
                    z = z - pz / dz
                refined.append(z)
            out.append(refined)
    return out


def _mp_remainders(params, k, theta, model_fn):
    """Extended-precision (re, im) remainders theta - model as float arrays."""
    refined = refine_roots_mp(params, k, theta)
    re = np.empty(theta.shape)
    im = np.empty(theta.shape)
    with mpmath.workdps(40):
        for i, (ki, row) in enumerate(zip(k, refined)):
            mod = model_fn(mpmath.mpf(float(ki)))
            for j in range(4):
                d = row[j] - mod[j]
                re[i, j] = float(mpmath.re(d))
                im[i, j] = float(mpmath.im(d))
    return re, im


# ---------------------------------------------------------------- tracking


@dataclass(frozen=True)
class EigenBranches:
    """Continuously labelled eigenvalue branches.

    Attributes
    ----------
    k_grid : ndarray, shape (n,)
    theta : ndarray, shape (n, 4)
        Column ``j`` is branch ``j+1``.
    gap : ndarray, shape (n,)
        Minimal pairwise distance between the four roots.
    """

    k_grid: np.ndarray
    theta: np.ndarray
    gap: np.ndarray

    def branch(self, j: int) -> np.ndarray:
        """Branch ``j`` in 1..4."""
        return self.theta[:, j - 1]

    def first_collision_index(self, rtol: float = 1e-8) -> int:
        """Index of the first sample where a conjugate pair has become real.

        Returns ``len(k_grid)`` when both pairs stay complex on the grid.
        """
        scale = np.maximum(np.abs(self.theta).max(axis=1), 1.0)
        real1 = np.abs(self.theta[:, 0].imag) <= rtol * scale
        real3 = np.abs(self.theta[:, 2].imag) <= rtol * scale
        hit = np.nonzero(real1 | real3)[0]
        return int(hit[0]) if hit.size else len(self.k_grid)


def _min_gap(th):
    d = np.abs(th[..., :, None] - th[..., None, :])
    d = d + np.where(np.eye(4, dtype=bool), np.inf, 0.0)
    return d.min(axis=(-1, -2))


def _canonical_pairs(z, rtol=1e-9):
    """Within pairs (0,1) and (2,3): complex pair puts Im>0 first, real pair the larger Re first."""
    z = z.copy()
    scale = max(np.abs(z).max(), 1.0)
    for a, b in ((0, 1), (2, 3)):
        complex_pair = max(abs(z[a].imag), abs(z[b].imag)) > rtol * scale
        swap = (z[a].imag < z[b].imag) if complex_pair else (z[a].real < z[b].real)
        if swap:
            z[a], z[b] = z[b], z[a]
    return z


def _seed(theta0, k0):
    order = np.argsort(np.abs(theta0))
    small, large = theta0[order[:2]], theta0[order[2:]]
    if _min_gap(theta0) < 1e-10:
        raise ValueError(f"ambiguous seeding at k={k0}: eigenvalue gap below 1e-10")
    s = small[np.argsort(-small.imag)]
    l = large[np.argsort(-large.imag)]
    return np.array([s[0], s[1], l[0], l[1]])


def track_branches(params: FluidParams, k_grid, eps1: float | None = None) -> EigenBranches:
    """Label the four roots continuously along an increasing wavenumber grid.

    Seeding at the first sample: branch 1 is the small root with Im > 0,
    branch 3 the root near ``+i sqrt(2 rhobar)``; branches 2 and 4 are their
    conjugates. Each later sample is matched to a quadratic extrapolation of
    the previous labels by the permutation of least total displacement.
    Within each conjugate pair the odd label is kept on the Im > 0 member, or
    on the larger real part once the pair has become real.

    Parameters
    ----------
    params : FluidParams
    k_grid : array_like
        Strictly increasing wavenumbers.
    eps1 : float, optional
        When given, the first sample must not exceed ``eps1/10``.
    """
    k = np.asarray(k_grid, dtype=float)
    if k.ndim != 1 or k.size < 1 or np.any(np.diff(k) <= 0):
        raise ValueError("k_grid must be a strictly increasing 1-D array")
    if eps1 is not None and k[0] > eps1 / 10:
        raise ValueError("first sample must be <= eps1/10")
    raw = eigenvalues_batch(params, k)
    th = np.empty_like(raw)
    th[0] = _canonical_pairs(_seed(raw[0], k[0]))
    for i in range(1, k.size):
        if i >= 3:
            # quadratic extrapolation in k
            x = k[i - 3 : i]
            L0 = (k[i] - x[1]) * (k[i] - x[2]) / ((x[0] - x[1]) * (x[0] - x[2]))
            L1 = (k[i] - x[0]) * (k[i] - x[2]) / ((x[1] - x[0]) * (x[1] - x[2]))
            L2 = (k[i] - x[0]) * (k[i] - x[1]) / ((x[2] - x[0]) * (x[2] - x[1]))
            pred = L0 * th[i - 3] + L1 * th[i - 2] + L2 * th[i - 1]
        elif i == 2:
            pred = th[1] + (th[1] - th[0]) * (k[2] - k[1]) / (k[1] - k[0])
        else:
            pred = th[0]
        cost = np.abs(raw[i][_PERMS] - pred[None, :]).sum(axis=1)
        th[i] = _canonical_pairs(raw[i][_PERMS[np.argmin(cost)]])
    return EigenBranches(k, th, _min_gap(th))


# ---------------------------------------------------------------- expansions


@dataclass(frozen=True)
class ExpansionCoefficients:
    """Closed-form low- and high-frequency expansion coefficients."""

    re2: float
    re4: float
    im1: float
    im3: float
    plasma: float
    plasma_im2: float
    lim1: float
    lim3: float
    rate2: float
    rate4: float

    @classmethod
    def from_params(cls, params: FluidParams) -> "ExpansionCoefficients":
        p = params
        c = math.sqrt(0.5 * (p.c1sq + p.c2sq))
        r = p.rhobar
        return cls(
            re2=-(p.mu + p.mubar) / (4 * r),
            re4=(p.mu - p.mubar) * (p.c1sq - p.c2sq) / (8 * r * r),
            im1=c,
            im3=-((p.c1sq - p.c2sq) ** 2) / (16 * r * c) - (p.mu + p.mubar) ** 2 / (32 * r * r * c),
            plasma=math.sqrt(2 * r),
            plasma_im2=(p.c1sq + p.c2sq) / (4 * math.sqrt(2 * r)),
            lim1=-p.c1sq * r / p.mu,
            lim3=-p.c2sq * r / p.mubar,
            rate2=-p.mu / r,
            rate4=-p.mubar / r,
        )


@dataclass(frozen=True)
class FitRecord:
    """One log-log fit of a remainder against k."""

    branch: int
    quantity: str
    fitted_slope: float
    prefactor: float
    pass_: bool
    threshold: float
    n_used: int

    def to_json(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("pass_")
        return d


def _loglog_fit(k, rem, floor):
    k = np.asarray(k)
    rem = np.abs(np.asarray(rem))
    keep = (rem > floor) & np.isfinite(rem)
    if not keep.any() and np.all(np.isfinite(rem)):
        # remainder vanishes to working precision: expansion exact at this order
        return math.inf, 0.0, 0
    if keep.sum() < 4:
        raise ValueError(f"fit degeneracy: {int(keep.sum())} usable samples (need >= 4)")
    slope, icpt = np.polyfit(np.log(k[keep]), np.log(rem[keep]), 1)
    return float(slope), float(math.exp(icpt)), int(keep.sum())


def low_expansion_terms(params: FluidParams, k) -> np.ndarray:
    """Truncated small-k expansions of branches 1..4, shape ``k.shape + (4,)``."""
    e = ExpansionCoefficients.from_params(params)
    k = np.asarray(k, dtype=float)
    re1 = e.re2 * k**2 + e.re4 * k**4
    re3 = e.re2 * k**2 - e.re4 * k**4
    im1 = e.im1 * k + e.im3 * k**3
    im3 = e.plasma + e.plasma_im2 * k**2
    return np.stack([re1 + 1j * im1, re1 - 1j * im1, re3 + 1j * im3, re3 - 1j * im3], axis=-1)


def _low_terms_mp(params: FluidParams):
    """Small-k expansion with coefficients evaluated in extended precision."""
    p = params
    mp = mpmath.mpf
    with mpmath.workdps(40):
        mu, mub, r = mp(p.mu), mp(p.mubar), mp(p.rhobar)
        c1, c2 = mp(p.c1sq), mp(p.c2sq)
        c = mpmath.sqrt((c1 + c2) / 2)
        w = mpmath.sqrt(2 * r)
        re2 = -(mu + mub) / (4 * r)
        re4 = (mu - mub) * (c1 - c2) / (8 * r * r)
        im1 = c
        im3 = -((c1 - c2) ** 2) / (16 * r * c) - (mu + mub) ** 2 / (32 * r * r * c)
        im_pl = (c1 + c2) / (4 * w)

    def model(k):
        re1 = re2 * k**2 + re4 * k**4
        re3 = re2 * k**2 - re4 * k**4
        i1 = im1 * k + im3 * k**3
        i3 = w + im_pl * k**2
        return [mpmath.mpc(re1, i1), mpmath.mpc(re1, -i1), mpmath.mpc(re3, i3), mpmath.mpc(re3, -i3)]

    return model


def verify_low_expansion(params: FluidParams, k_samples) -> list[FitRecord]:
    """Fit remainder slopes of all four branches against the small-k expansion.

    Roots and expansion coefficients are evaluated at 40 digits before
    subtracting, since the remainders drop below double rounding for k of
    order 1e-3. Samples under a floor of 1e-30 relative to the root are
    discarded (at least four must remain).

    Thresholds: acoustic branches 4 - 0.2 (real and imaginary); plasma branches
    6 - 0.3 (real) and 4 - 0.2 (imaginary).
    """
    k = np.sort(np.asarray(k_samples, dtype=float))
    if k.size < 4:
        raise ValueError("fit degeneracy: fewer than 4 samples")
    if np.any(k <= 0):
        raise ValueError("samples must be positive")
    th = track_branches(params, k).theta
    re, im = _mp_remainders(params, k, th, _low_terms_mp(params))
    terms = np.abs(low_expansion_terms(params, k))
    floor = 1e-30 * np.maximum(terms, np.abs(th))
    out = []
    thresholds = {(1, "re"): 3.8, (1, "im"): 3.8, (3, "re"): 5.7, (3, "im"): 3.8}
    for j in range(4):
        for part, rem in (("re", re[:, j]), ("im", im[:, j])):
            s, pref, n = _loglog_fit(k, rem, floor[:, j])
            thr = thresholds[(1 if j < 2 else 3, part)]
            out.append(FitRecord(j + 1, f"{part}_remainder", s, pref, s >= thr, thr, n))
    return out


def high_asymptotes(params: FluidParams, k) -> np.ndarray:
    """Large-k asymptotes of branches 1..4 (two finite limits, two parabolas)."""
    e = ExpansionCoefficients.from_params(params)
    k = np.asarray(k, dtype=float)
    ones = np.ones_like(k)
    return np.stack(
        [e.lim1 * ones, e.rate2 * k**2 - e.lim1, e.lim3 * ones, e.rate4 * k**2 - e.lim3], axis=-1
    ).astype(complex)


def assign_high_labels(params: FluidParams, k, theta) -> np.ndarray:
    """Permutation per sample mapping asymptote labels to the given roots.

    Returns ``perm`` with ``theta[i, perm[i, j]]`` the root nearest asymptote ``j``
    in the least-total-distance sense.
    """
    asy = high_asymptotes(params, k)
    theta = np.asarray(theta)
    cost = np.abs(theta[:, None, _PERMS] - asy[:, None, None, :]).sum(-1)[:, 0, :]
    return _PERMS[np.argmin(cost, axis=1)]


def verify_high_expansion(params: FluidParams, k_samples) -> list[FitRecord]:
    """Check the large-k limits and fit the decay of their remainders.

    Branches are labelled by nearest asymptote: branch 1 tends to
    ``-c1sq rhobar/mu``, branch 3 to ``-c2sq rhobar/mubar``, and branches 2 and 4
    follow ``-(mu/rhobar) k^2 + c1sq rhobar/mu`` and
    ``-(mubar/rhobar) k^2 + c2sq rhobar/mubar``. Remainder slopes must be at
    most ``-2 + 0.2``; ``rate`` records compare the k^2-secant slope of the
    parabolic branches between the two largest samples to ``-mu/rhobar`` and
    ``-mubar/rhobar`` (pass within 1%). The secant removes the constant shift
    of the parabola, which is not small against ``mu k^2/rhobar`` when
    ``rhobar`` is large.
    """
    k = np.sort(np.asarray(k_samples, dtype=float))
    if k.size < 4:
        raise ValueError("fit degeneracy: fewer than 4 samples")
    raw = eigenvalues_batch(params, k)
    perm = assign_high_labels(params, k, raw)
    th = np.take_along_axis(raw, perm, axis=1)
    asy = high_asymptotes(params, k)
    for a, b in ((0, 2), (1, 3)):
        if np.allclose(asy[:, a], asy[:, b], rtol=1e-12, atol=0.0):
            # coinciding asymptotes: order the pair by distance to keep labels continuous
            swap = np.abs(th[:, a] - asy[:, a]) < np.abs(th[:, b] - asy[:, b])
            th[swap, a], th[swap, b] = th[swap, b], th[swap, a].copy()
    floor = 64 * root_error_estimate(params, k, th)
    e = ExpansionCoefficients.from_params(params)
    out = []
    for j in range(4):
        s, pref, n = _loglog_fit(k, np.abs(th[:, j] - asy[:, j]), floor[:, j])
        out.append(FitRecord(j + 1, "limit_remainder", s, pref, s <= -1.8, -1.8, n))
    for j, rate in ((1, e.rate2), (3, e.rate4)):
        secant = (th[-1, j] - th[-2, j]).real / (k[-1] ** 2 - k[-2] ** 2)
        ratio = float(secant / rate)
        out.append(FitRecord(j + 1, "parabolic_rate_ratio", ratio, rate, abs(ratio - 1) <= 0.01, 0.01, 1))
    return out


def high_fit_window(params: FluidParams, n: int = 12) -> np.ndarray:
    """Samples for :func:`verify_high_expansion` placed past the crossover scale.

    The large-k expansion is in powers of ``k_s^2 / k^2`` with
    ``k_s = rhobar sqrt(max(c1sq, c2sq)) / min(mu, mubar)``; the window starts
    at ``max(10, 3 k_s)`` and spans one decade.
    """
    p = params
    ks = p.rhobar * math.sqrt(max(p.c1sq, p.c2sq)) / min(p.mu, p.mubar)
    k0 = max(10.0, 3.0 * ks)
    return np.geomspace(k0, 10.0 * k0, n)


def high_label_map(params: FluidParams, k_grid) -> dict[int, int]:
    """Map tracked labels (seeded at small k) to large-k asymptote labels.

    Tracks on ``k_grid`` and assigns asymptote labels at its last sample.
    """
    br = track_branches(params, k_grid)
    perm = assign_high_labels(params, br.k_grid[-1:], br.theta[-1:])[0]
    return {int(perm[j]) + 1: j + 1 for j in range(4)}
