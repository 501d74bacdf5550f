"""Simulation and verification toolkit for random-walk Polya urns."""

__version__ = "0.1.0"

from .displacement import (  # noqa: E402
    DisplacementModel,
    StableLimit,
    cdf_displacement,
    parse_model,
    sample_displacement,
    sample_limit,
    stable_limit,
    stable_sampler,
)
from .measure import (  # noqa: E402
    AtomicMeasure,
    BoxedMeasure,
    box_index,
    boxify,
    ks_distance,
    ks_two_sample,
    l1_box_discrepancy,
    rescale_theta,
    tv_atomic,
    wasserstein1,
)
from .streams import derive_rng  # noqa: E402
from .urn import (  # noqa: E402
    UrnState,
    grow,
    load_checkpoint,
    record_rep_sample,
    save_checkpoint,
    simulate_urn,
    uniform_ball_samples,
)
