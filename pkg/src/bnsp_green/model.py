"""Physical parameters, state-vector roles and run configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import IntEnum
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

_REL = 1e-12


class ConfigError(ValueError):
    """Invalid configuration document or parameter constraint violation.

    Attributes
    ----------
    code : str
        Machine-readable error code used by the command-line front end.
    """

    def __init__(self, message: str, code: str = "invalid_config"):
        super().__init__(message)
        self.code = code


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= _REL * max(abs(a), abs(b))


@dataclass(frozen=True)
class FluidParams:
    """Linearized two-carrier fluid parameters (ions and electrons).

    Parameters
    ----------
    mu1, mu2 : float
        Ion shear and bulk-combination viscosities.
    mubar1, mubar2 : float
        Electron shear and bulk-combination viscosities.
    rhobar : float
        Background density.
    c1sq, c2sq : float
        Squared sound speeds of ions and electrons.
    """

    mu1: float
    mu2: float
    mubar1: float
    mubar2: float
    rhobar: float
    c1sq: float
    c2sq: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{f.name} must be a finite real number", "constraint_violation")
            object.__setattr__(self, f.name, float(v))
        checks = [
            (self.mu1 > 0, "mu1 > 0"),
            (3 * self.mu1 + 2 * self.mu2 > 0, "3*mu1 + 2*mu2 > 0"),
            (self.mubar1 > 0, "mubar1 > 0"),
            (3 * self.mubar1 + 2 * self.mubar2 > 0, "3*mubar1 + 2*mubar2 > 0"),
            (self.rhobar > 0, "rhobar > 0"),
            (self.c1sq > 0, "c1sq > 0"),
            (self.c2sq > 0, "c2sq > 0"),
        ]
        for ok, text in checks:
            if not ok:
                raise ConfigError(f"{text} violated", "constraint_violation")

    @property
    def mu(self) -> float:
        """Combined ion viscosity mu1 + mu2."""
        return self.mu1 + self.mu2

    @property
    def mubar(self) -> float:
        """Combined electron viscosity mubar1 + mubar2."""
        return self.mubar1 + self.mubar2

    @property
    def equal_sound_speeds(self) -> bool:
        return _close(self.c1sq, self.c2sq)

    @property
    def distinct_viscosities(self) -> bool:
        """True when the combined viscosities differ (relative test)."""
        return not _close(self.mu, self.mubar)

    @property
    def distinct_viscosity_components(self) -> tuple[bool, bool]:
        """Componentwise comparison (mu1 vs mubar1, mu2 vs mubar2)."""
        return (not _close(self.mu1, self.mubar1), not _close(self.mu2, self.mubar2))

    def flags(self) -> dict[str, Any]:
        return {
            "equal_sound_speeds": self.equal_sound_speeds,
            "distinct_viscosities": self.distinct_viscosities,
            "distinct_viscosity_components": list(self.distinct_viscosity_components),
        }

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def front_speed(params: FluidParams) -> float:
    """Acoustic phase speed sqrt((c1sq + c2sq) / 2)."""
    return math.sqrt(0.5 * (params.c1sq + params.c2sq))


class StateIndex(IntEnum):
    """Zero-based positions of the compressible roles (rho, phi1, n, phi2).

    The full system orders its unknowns as (rho, m1, m2, m3, n, w1, w2, w3);
    :meth:`full_slice` gives the matching block. The scalar roles map to a
    single full index, the potential roles to the 3-vector block whose
    longitudinal projection carries them.
    """

    RHO = 0
    PHI1 = 1
    N = 2
    PHI2 = 3

    def full_slice(self) -> slice:
        return _FULL_BLOCKS[self]

    @property
    def is_scalar(self) -> bool:
        return self in (StateIndex.RHO, StateIndex.N)


_FULL_BLOCKS = {
    StateIndex.RHO: slice(0, 1),
    StateIndex.PHI1: slice(1, 4),
    StateIndex.N: slice(4, 5),
    StateIndex.PHI2: slice(5, 8),
}

FULL_ROLES = ("rho", "m1", "m2", "m3", "n", "w1", "w2", "w3")


@dataclass(frozen=True)
class RunConfig:
    """Numerical settings shared by the evaluation modules.

    Parameters
    ----------
    eps1 : float
        Low-frequency plateau radius; the low band ends at ``2*eps1``.
    K : float
        Start of the high-frequency plateau transition ``[K, K+1]``.
    sigma : float
        Gaussian mollifier width for full-band evaluation.
    kmax : float or None
        Quadrature truncation; defaults to ``K + 24/sigma``.
    rtol, atol : float
        Quadrature tolerances.
    r_points : int
        Number of radii in profile grids.
    r_max_factor : float
        Profiles extend to ``r_max_factor * max(c*t, 1)``.
    t_list : tuple of float
        Times used for wave-front and envelope scans.
    front_window : float
        Half-width multiplier ``w`` of the sonic window ``c*t +- w*sqrt(1+t)``.
    """

    eps1: float = 0.1
    K: float = 10.0
    sigma: float = 0.5
    kmax: float | None = None
    rtol: float = 1e-8
    atol: float = 1e-12
    r_points: int = 1201
    r_max_factor: float = 2.5
    t_list: tuple = (10.0, 20.0, 40.0, 80.0)
    front_window: float = 2.0

    def __post_init__(self):
        if self.kmax is None:
            object.__setattr__(self, "kmax", self.K + 24.0 / self.sigma)
        object.__setattr__(self, "t_list", tuple(float(t) for t in self.t_list))
        if not (self.eps1 > 0 and 2 * self.eps1 < self.K):
            raise ConfigError("0 < 2*eps1 < K violated", "constraint_violation")
        if not self.sigma > 0:
            raise ConfigError("sigma > 0 violated", "constraint_violation")
        if not self.kmax >= self.K + 10.0 / self.sigma:
            raise ConfigError("kmax >= K + 10/sigma violated", "constraint_violation")
        if not (0 < self.rtol < 1 and 0 < self.atol):
            raise ConfigError("0 < rtol < 1 and atol > 0 violated", "constraint_violation")
        if int(self.r_points) < 3:
            raise ConfigError("r_points >= 3 violated", "constraint_violation")
        object.__setattr__(self, "r_points", int(self.r_points))
        if any(t < 0 for t in self.t_list):
            raise ConfigError("t_list entries >= 0 violated", "constraint_violation")

    def as_dict(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["t_list"] = list(self.t_list)
        return d


_PARAM_KEYS = tuple(f.name for f in fields(FluidParams))
_RUN_KEYS = tuple(f.name for f in fields(RunConfig))


def parse_config(doc: Mapping[str, Any]) -> tuple[FluidParams, RunConfig]:
    """Validate a flat mapping of parameter and run-configuration keys."""
    unknown = sorted(set(doc) - set(_PARAM_KEYS) - set(_RUN_KEYS))
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}", "unknown_key")
    missing = [k for k in _PARAM_KEYS if k not in doc]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}", "missing_key")
    params = FluidParams(**{k: doc[k] for k in _PARAM_KEYS})
    run_kw = {k: doc[k] for k in _RUN_KEYS if k in doc}
    try:
        run = RunConfig(**run_kw)
    except TypeError as exc:  # pragma: no cover - defensive
        raise ConfigError(str(exc)) from exc
    return params, run


def load_config(source: str | Path) -> tuple[FluidParams, RunConfig]:
    """Load parameters from a flat TOML document.

    Parameters
    ----------
    source : str or Path
        Either a filesystem path or the TOML text itself. A ``str`` is read as
        TOML text when it contains ``=`` or a newline; otherwise it is a path.

    Returns
    -------
    (FluidParams, RunConfig)

    Raises
    ------
    ConfigError
        With ``code`` one of ``config_not_found``, ``malformed_config``,
        ``unknown_key``, ``missing_key`` or ``constraint_violation``.
    """
    if isinstance(source, Path) or ("=" not in source and "\n" not in source):
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}", "config_not_found")
        text = path.read_text()
    else:
        text = source
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}", "malformed_config") from exc
    nested = [k for k, v in doc.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat; found tables: {', '.join(nested)}", "malformed_config")
    return parse_config(doc)
