"""Reproducible synthetic markets used by tests, scripts and the CLI examples.

``skewed_market`` is the reference right-skewed instance: one delivery
period, K lognormal spot prices (median 40 $/MWh, log-sd 0.6) and a hydro
generator whose output is lognormal around 100 MWh with log-correlation -0.6
to the spot price (dry years are expensive).  The load is a flat 100 MWh.
Selling forward exposes the generator to the dry/expensive scenarios, so a
more risk-averse generator asks a higher price, while the load buys
protection against price spikes.
"""
from __future__ import annotations

import numpy as np

from .agents import AgentKind, AgentSpec
from .equilibrium import MarketConfig
from .risk import RiskParams
from .scenario_model import ContractSpec, ProfileSet, ScenarioSet


def skewed_sample(num_scenarios: int = 200, seed: int = 7, sigma: float = 0.6, corr: float = 0.6):
    """(spot, hydro) vectors of length ``num_scenarios``."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(num_scenarios)
    spot = 40.0 * np.exp(sigma * z)
    u = -corr * z + np.sqrt(1.0 - corr**2) * rng.standard_normal(num_scenarios)
    hydro = 100.0 * np.exp(0.25 * u - 0.25**2 / 2)
    return spot, hydro


def skewed_market(num_scenarios: int = 200, seed: int = 7, gen_scale: float = 1.0,
                  lam_gen: float = 0.5, lam_load: float = 0.5, alpha: float = 0.9) -> MarketConfig:
    spot, hydro = skewed_sample(num_scenarios, seed)
    s = ScenarioSet(spot[None, :])
    gen = AgentSpec("gen", AgentKind.GENERATOR, RiskParams(lam_gen),
                    ProfileSet("gen", gen_scale * hydro[None, :]))
    load = AgentSpec("load", AgentKind.LOAD, RiskParams(lam_load), ProfileSet.constant("load", 100.0, s))
    return MarketConfig((gen, load), s, ContractSpec((1,)), alpha)


def yearly_paths(num_scenarios: int = 1200, years: int = 5, seed: int = 11) -> ScenarioSet:
    """Multi-year spot trajectories: a mean-reverting log process with lognormal shocks."""
    rng = np.random.default_rng(seed)
    x = np.zeros((years, num_scenarios))
    x[0] = 0.5 * rng.standard_normal(num_scenarios)
    for t in range(1, years):
        x[t] = 0.6 * x[t - 1] + 0.5 * rng.standard_normal(num_scenarios)
    labels = tuple(str(2022 + t) for t in range(years))
    return ScenarioSet(40.0 * np.exp(x), labels)


def yearly_market(num_scenarios: int = 1200, years: int = 5, seed: int = 11,
                  lam_gen: float = 0.5, lam_load: float = 0.5, alpha: float = 0.9,
                  delivery: tuple[int, ...] | None = None) -> MarketConfig:
    """Generator/load market on :func:`yearly_paths`; hydro output falls when prices are high."""
    s = yearly_paths(num_scenarios, years, seed)
    rng = np.random.default_rng(seed + 1)
    z = np.log(s.spot / 40.0)
    hydro = 100.0 * np.exp(-0.3 * z + 0.15 * rng.standard_normal(z.shape))
    gen = AgentSpec("gen", AgentKind.GENERATOR, RiskParams(lam_gen), ProfileSet("gen", hydro))
    load = AgentSpec("load", AgentKind.LOAD, RiskParams(lam_load), ProfileSet.constant("load", 100.0, s))
    c = ContractSpec(delivery or (years,))
    return MarketConfig((gen, load), s, c, alpha)
