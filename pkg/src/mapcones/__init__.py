"""Convex geometry of quantum-map cones at desk scale.

Exact map/Choi transforms, membership oracles for the nested cones of
positive, decomposable, completely positive, PPT-inducing and superpositive
maps (with base, trace-preserving, trace-non-increasing and symmetrized
slices), and seeded Monte Carlo estimators for volume radii and mean widths
that corroborate the duality, radii, section and volume-bound relations for
two- and three-level systems.
"""

__version__ = "0.1.0"

from .cones import (
    BodySpec,
    Cone,
    OracleParams,
    Slice,
    Status,
    Verdict,
    cone_membership,
    decomposable_split,
    slice_membership,
    support_function,
)
from .geometry import (
    Estimate,
    ball_vol,
    bmk,
    duality_pair_value,
    exact_vol_states,
    mean_width_mc,
    no_duality_discrepancy,
    radii_verify,
    section_bounds,
    tni_experiment,
    urysohn_bracket,
    volume_mcmc,
    vrad_cp_base,
    vrad_from_vol,
    vrad_states,
)
from .randgen import (
    RngStream,
    WalkState,
    ginibre,
    haar_unitary,
    hit_and_run_step,
    random_channel_tp,
    random_product_state,
    random_state_hs,
)

__all__ = [
    "BodySpec", "Cone", "OracleParams", "Slice", "Status", "Verdict",
    "cone_membership", "decomposable_split", "slice_membership", "support_function",
    "Estimate", "ball_vol", "bmk", "duality_pair_value", "exact_vol_states",
    "mean_width_mc", "no_duality_discrepancy", "radii_verify", "section_bounds",
    "tni_experiment", "urysohn_bracket", "volume_mcmc", "vrad_cp_base",
    "vrad_from_vol", "vrad_states",
    "RngStream", "WalkState", "ginibre", "haar_unitary", "hit_and_run_step",
    "random_channel_tp", "random_product_state", "random_state_hs",
    "__version__",
]
