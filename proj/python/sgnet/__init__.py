"""Stepwise-goal trajectory prediction: training, evaluation, and data tools."""

from ._sgnet import (
    ConfigError,
    ContractError,
    DimError,
    IoError,
    Model,
    NumericError,
    ParseError,
    Track,
    Window,
    __version__,
    gradcheck,
    load_bbox_csv,
    load_bev_text,
    make_windows,
    synth,
    with_motion_features,
    write_bev_text,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DimError",
    "IoError",
    "Model",
    "NumericError",
    "ParseError",
    "Track",
    "Window",
    "__version__",
    "gradcheck",
    "load_bbox_csv",
    "load_bev_text",
    "make_windows",
    "synth",
    "with_motion_features",
    "write_bev_text",
]
