"""Reputational learning on networks: survival probabilities, hitting-time sampling,
network-scaled ostracism times, Monte Carlo welfare and network design comparisons."""

from .model import (AgentPrior, ConfigError, EconomyParams, EngineConfig, ExtensionConfig, MCConfig,
                    NetworkConstraint, RunConfig, load_config, validate)

__all__ = ["AgentPrior", "ConfigError", "EconomyParams", "EngineConfig", "ExtensionConfig", "MCConfig",
           "NetworkConstraint", "RunConfig", "load_config", "validate"]
__version__ = "0.1.0"
