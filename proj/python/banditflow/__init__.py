"""Generalized UCB1 simulation and asymptotic predictions."""

from ._core import (
    ConfigError,
    DomainError,
    SingularityError,
    UnsupportedConfiguration,
    predict_clt,
    predict_regret,
    run_cli,
    simulate,
    solve_fluid,
    stylized_bias,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "SingularityError",
    "UnsupportedConfiguration",
    "predict_clt",
    "predict_regret",
    "run_cli",
    "simulate",
    "solve_fluid",
    "stylized_bias",
]
