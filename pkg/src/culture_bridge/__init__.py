"""culture_bridge: transferable driving archetypes with data-light culture calibration."""

from .trajectory import (
    Frame,
    TrajectoryDataset,
    VehicleTrack,
    import_highd_like,
    import_ngsim_like,
    parse_canonical_csv,
    sample_fraction,
    write_canonical_csv,
)
from .features import (
    ActionSample,
    Direction,
    NeighborSlot,
    StateWindow,
    assign_neighbors,
    direction_ttc,
    extract_samples,
    total_ttc,
)
from .synth import CultureSpec, GroundTruthFeatureMap, eval_ground_truth, gen_corpus, gen_world
from .dlirl import (
    ArchetypeModel,
    CultureVector,
    TrainingConfig,
    calibrate_culture,
    closed_form_culture,
    forward_psi,
    gpi_select_action,
    load_model,
    predict_action,
    save_model,
    train_archetype,
)
from .rollout import RolloutResult, run_rollout, step_ego
from .metrics import (
    case_report,
    classify_styles,
    density_estimate,
    density_mse,
    lane_change_frequency,
    ttc_density_rmse,
)

__version__ = "0.1.0"
