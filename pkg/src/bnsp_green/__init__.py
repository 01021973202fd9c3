"""Linear Green's function laboratory for the bipolar Navier-Stokes-Poisson system."""

from .model import FluidParams, RunConfig, StateIndex, ConfigError, load_config, front_speed

__all__ = ["FluidParams", "RunConfig", "StateIndex", "ConfigError", "load_config", "front_speed"]
__version__ = "0.1.0"
