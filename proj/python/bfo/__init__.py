"""Back-and-forth observer reconstruction of initial states (Python bindings)."""

from ._core import (
    DimensionMismatch,
    Equation,
    FieldSpec,
    NotContractive,
    ObservationProfile,
    ProblemInstance,
    Trace,
    add_noise,
    choose_truncation,
    default_instance,
    estimate_eta,
    file_checksum,
    fit_rate,
    generate_observation,
    read_trace,
    reconstruct,
    run_sweep,
    write_trace,
)

__all__ = [
    "DimensionMismatch",
    "Equation",
    "FieldSpec",
    "NotContractive",
    "ObservationProfile",
    "ProblemInstance",
    "Trace",
    "add_noise",
    "choose_truncation",
    "default_instance",
    "estimate_eta",
    "file_checksum",
    "fit_rate",
    "generate_observation",
    "read_trace",
    "reconstruct",
    "run_sweep",
    "write_trace",
]
