"""Residual graph-convolution networks with theory checks."""

from ._smpnn import (
    Dataset,
    Graph,
    Model,
    Report,
    SmpnnError,
    desk_task,
    evaluate,
    gordon_bound_trial,
    kernel_witness_sweep,
    linear_global_attention,
    load_dataset,
    make_synthetic,
    oversmoothing_trace,
    residual_injectivity_trial,
    save_dataset,
    train,
    version,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Graph",
    "Model",
    "Report",
    "SmpnnError",
    "desk_task",
    "evaluate",
    "gordon_bound_trial",
    "kernel_witness_sweep",
    "linear_global_attention",
    "load_dataset",
    "make_synthetic",
    "oversmoothing_trace",
    "residual_injectivity_trial",
    "save_dataset",
    "train",
    "version",
]
