"""Information-privacy channels: capacity, mechanisms and audits."""

from .balance import balance_delta_bound, restricted_capacity_lower_bound
from .capacity import (
    CapacityResult,
    IndividualCapacityReport,
    ReducedChannel,
    SelectionMap,
    blahut_arimoto,
    brute_force_capacity_oracle,
    enumerate_selections,
    individual_channel_capacity,
    reduce_channel,
)
from .core import (
    BITS,
    NATS,
    ChannelMatrix,
    InfoUnit,
    QueryTable,
    RecordUniverse,
    decode_index,
    encode_index,
    entropy,
    max_mutual_information,
    mutual_information,
    validate_channel,
)
from .dp_audit import check_dp, dp_epsilon, prop1_crosscheck
from .errors import (
    ConvergenceError,
    DimensionError,
    DomainError,
    EnumerationTooLargeError,
    GridError,
    NonStochasticError,
    PrivChanError,
    SchemaError,
    ValidationError,
)
from .mechanisms import (
    GaussianSpec,
    data_independent_capacity_bound,
    discretize_gaussian,
    exponential_calibrate,
    exponential_channel,
    exponential_entropy,
    gaussian_calibrate,
    gaussian_capacity_bound,
    is_weakly_symmetric,
    noise_scale_report,
    randomized_response_channel,
    rr_calibrate,
)

__version__ = "0.1.0"
