from .adam import AdamState
from .model import (
    ArchetypeModel,
    CultureVector,
    MODEL_FORMAT_VERSION,
    forward_psi,
    forward_psi_batch,
    load_model,
    predict_action,
    predict_action_batch,
    save_model,
)
from .training import (
    TrainingConfig,
    action_mse,
    calibrate_culture,
    closed_form_culture,
    train_archetype,
)
from .gpi import advance_window, default_grid, gpi_select_action

__all__ = [
    "AdamState",
    "ArchetypeModel",
    "CultureVector",
    "MODEL_FORMAT_VERSION",
    "TrainingConfig",
    "action_mse",
    "advance_window",
    "calibrate_culture",
    "closed_form_culture",
    "default_grid",
    "forward_psi",
    "forward_psi_batch",
    "gpi_select_action",
    "load_model",
    "predict_action",
    "predict_action_batch",
    "save_model",
    "train_archetype",
]
