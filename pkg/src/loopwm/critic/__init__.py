from .reward_model import (
    PreferencePair,
    RewardModelParams,
    bt_loss,
    feature_width,
    features,
    rm_init,
    rm_score,
    rm_train,
    synthetic_pairs,
)
from .scoring import (
    CONTACT_RADIUS,
    DEFAULT_TAU,
    DEFAULT_WEIGHTS,
    DIMENSIONS,
    CriticReport,
    CriticWeights,
    aggregate,
    evaluate,
    revise_instruction,
    tag_dimension,
)

__all__ = [
    "CONTACT_RADIUS",
    "CriticReport",
    "CriticWeights",
    "DEFAULT_TAU",
    "DEFAULT_WEIGHTS",
    "DIMENSIONS",
    "PreferencePair",
    "RewardModelParams",
    "aggregate",
    "bt_loss",
    "evaluate",
    "feature_width",
    "features",
    "revise_instruction",
    "rm_init",
    "rm_score",
    "rm_train",
    "synthetic_pairs",
    "tag_dimension",
]
