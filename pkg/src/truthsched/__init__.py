"""Truthful online job scheduling with regret-minimizing mechanism combiners."""

from truthsched.core import (
    Allocation,
    FeasibilityError,
    Instance,
    Job,
    Params,
    served_jobs,
    total_welfare,
    utility,
    validate_instance,
    welfare_series,
)
from truthsched.mechanisms import (
    PostedPriceClairvoyant,
    PostedPriceNonClairvoyant,
    parse_mechanism,
    ppf_clairvoyant,
    ppf_nonclairvoyant,
    run,
)
from truthsched.switching import (
    RestartConfig,
    RestartDriver,
    compose_chain,
    restart,
    switch_clairvoyant,
    switch_nonclairvoyant,
    with_random_restarts,
)
from truthsched.combiners import (
    CombinerConfig,
    FollowTheBanditSwitcher,
    FollowTheSwitcher,
    ftbs_run,
    fts_run,
    restart_benchmark,
)
from truthsched.instances import read_instance, write_instance

__all__ = [
    "Allocation",
    "CombinerConfig",
    "FeasibilityError",
    "FollowTheBanditSwitcher",
    "FollowTheSwitcher",
    "Instance",
    "Job",
    "Params",
    "PostedPriceClairvoyant",
    "PostedPriceNonClairvoyant",
    "RestartConfig",
    "RestartDriver",
    "compose_chain",
    "ftbs_run",
    "fts_run",
    "parse_mechanism",
    "ppf_clairvoyant",
    "ppf_nonclairvoyant",
    "read_instance",
    "restart",
    "restart_benchmark",
    "run",
    "served_jobs",
    "switch_clairvoyant",
    "switch_nonclairvoyant",
    "total_welfare",
    "utility",
    "validate_instance",
    "welfare_series",
    "with_random_restarts",
    "write_instance",
]

__version__ = "0.1.0"
