"""Bundled case studies: the eBond+ bonded network device and the productivity SPL."""

from .ebond import (
    ALGORITHMS,
    BUNDLES,
    FEATURES,
    NICS,
    QUERY_NAMES,
    EbondConfig,
    EbondParams,
    all_configs,
    build_ebond,
    build_ebond_text,
    ebond_queries,
    initial_configs,
    signature,
)
from .productivity import expected_money, load_productivity
from .sweep import HEADER, MODES, Row, SweepError, SweepResult, read_rows, rows_csv, sweep, write_sweep

__all__ = [
    "ALGORITHMS",
    "BUNDLES",
    "FEATURES",
    "HEADER",
    "MODES",
    "NICS",
    "QUERY_NAMES",
    "EbondConfig",
    "EbondParams",
    "Row",
    "SweepError",
    "SweepResult",
    "all_configs",
    "build_ebond",
    "build_ebond_text",
    "ebond_queries",
    "expected_money",
    "initial_configs",
    "load_productivity",
    "read_rows",
    "rows_csv",
    "signature",
    "sweep",
    "write_sweep",
]
