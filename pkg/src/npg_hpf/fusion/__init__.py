from npg_hpf.fusion.losses import (
    LossBreakdown,
    LossOptions,
    instructive_loss,
    policies_of,
    td_targets,
    total_loss,
)
from npg_hpf.fusion.oracle import (
    IgmOracleInstance,
    OracleInstanceError,
    igm_oracle_check,
    random_oracle_instance,
)
from npg_hpf.fusion.policy import LearnerKind, VDNetworks, VDPolicy
from npg_hpf.fusion.sampling import (
    Estimator,
    PolicySet,
    Sampler,
    SelectionRecord,
    composite_act,
    estimate_policy_value,
    sample_policy,
    selection_probabilities,
)

__all__ = [
    "Estimator",
    "IgmOracleInstance",
    "LearnerKind",
    "LossBreakdown",
    "LossOptions",
    "OracleInstanceError",
    "PolicySet",
    "Sampler",
    "SelectionRecord",
    "VDNetworks",
    "VDPolicy",
    "composite_act",
    "estimate_policy_value",
    "igm_oracle_check",
    "instructive_loss",
    "policies_of",
    "random_oracle_instance",
    "sample_policy",
    "selection_probabilities",
    "td_targets",
    "total_loss",
]
