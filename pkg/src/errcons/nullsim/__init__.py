"""Null-hypothesis simulation of independent observers.

The sampling loops live in a compiled extension (``_kernel``) with a
bit-identical numpy fallback (``_fallback``) chosen at import time; see
:mod:`errcons.nullsim.backend`.
"""
from .backend import compiled_available
from .simulation import (
    CounterStream,
    SampleBatch,
    SimulatedSample,
    band_lookup,
    build_grid,
    cache_key,
    cached_table,
    grid_samples,
    quantile_type7,
    resolve_workers,
    run_simulation,
    simulate_many,
    simulate_pair,
)

__all__ = [
    "CounterStream",
    "SampleBatch",
    "SimulatedSample",
    "band_lookup",
    "build_grid",
    "cache_key",
    "cached_table",
    "compiled_available",
    "grid_samples",
    "quantile_type7",
    "resolve_workers",
    "run_simulation",
    "simulate_many",
    "simulate_pair",
]
