"""Stationary distribution of a two-orbit retrial queue with join-the-shortest-orbit routing."""

from ._jsoq import (  # noqa: F401
    DomainError,
    Error,
    InvalidParameter,
    ModelParams,
    SimConfig,
    TruncationError,
    Unstable,
    asymptotic_roots,
    balance_residual,
    build_series,
    delta_given_gamma,
    gamma_given_delta,
    kernel_value,
    oracle,
    simulate,
    verify_appendix,
)
