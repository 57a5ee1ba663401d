"""Joint user-activity detection, delay detection and channel estimation for
asynchronous grant-free random access, via AMP and its unfolded (LAMP) variants.

Thin re-export of the compiled core. Arrays are numpy; the bindings cover the
complex field (complex64 coefficients over float64 pilot matrices).
"""

from ._core import (
    ConfigError,
    Field,
    IoError,
    Model,
    NumericError,
    RocPoint,
    ShrinkageParams,
    SystemConfig,
    UserRecord,
    amp,
    calibrate_threshold,
    detect,
    expanded_matrix,
    gen_dataset,
    group_refine,
    load_dataset,
    metrics_at,
    omp,
    pilots,
    pool_records,
    roc_md_at_fa,
    roc_sweep,
    se,
    train,
)

__all__ = [
    "ConfigError",
    "Field",
    "IoError",
    "Model",
    "NumericError",
    "RocPoint",
    "ShrinkageParams",
    "SystemConfig",
    "UserRecord",
    "amp",
    "calibrate_threshold",
    "detect",
    "expanded_matrix",
    "gen_dataset",
    "group_refine",
    "load_dataset",
    "metrics_at",
    "omp",
    "pilots",
    "pool_records",
    "roc_md_at_fa",
    "roc_sweep",
    "se",
    "train",
]
