"""Polars DataFrame Schema 定義。

所有 schema 集中在此模組，供基準測試與匯出共用。
"""

import polars as pl

BENCH_STATS_SCHEMA = pl.Schema(
    {
        "n_stations": pl.Int64,
        "states": pl.Int64,
        "transitions": pl.Int64,
        "loop1a_transitions": pl.Int64,
        "equations": pl.Int64,
        "variables": pl.Int64,
        "part": pl.String,
        "verified": pl.Boolean,
        "generate_seconds": pl.Float64,
        "flatten_seconds": pl.Float64,
        "lift_seconds": pl.Float64,
        "verify_seconds": pl.Float64,
    }
)

FLAT_TRANSITION_SCHEMA = pl.Schema(
    {
        "source": pl.String,
        "action": pl.String,
        "target": pl.String,
        "rate": pl.Float64,
        "derivations": pl.Int64,
    }
)
