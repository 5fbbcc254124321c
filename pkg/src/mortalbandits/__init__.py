"""Mortal multi-armed bandits: policies, regret bounds, simulation and replay."""
from .core import ArmEstimate, ArmSpec, Bernoulli, Environment, RewardRange, TruncGauss
from .policies import PolicyConfig, make_policy

__version__ = "0.1.0"

__all__ = ["ArmEstimate", "ArmSpec", "Bernoulli", "Environment", "PolicyConfig", "RewardRange",
           "TruncGauss", "make_policy"]
