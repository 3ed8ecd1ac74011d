"""Python access to the geoworld C++ core."""

from ._core import (
    NUM_ACTIONS,
    AgentState,
    Checkpoint,
    GridConfig,
    TrainConfig,
    __version__,
    apply_action,
    collect,
    encode,
    evaluate,
    gaussian_kl,
    initial_checkpoint,
    load_checkpoint,
    probe,
    render_observation,
    report,
    save_checkpoint,
    spearman,
    train,
    welch_t_test,
)

__all__ = [
    "NUM_ACTIONS",
    "AgentState",
    "Checkpoint",
    "GridConfig",
    "TrainConfig",
    "apply_action",
    "collect",
    "encode",
    "evaluate",
    "gaussian_kl",
    "initial_checkpoint",
    "load_checkpoint",
    "probe",
    "render_observation",
    "report",
    "save_checkpoint",
    "spearman",
    "train",
    "welch_t_test",
]
