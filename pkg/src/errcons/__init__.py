"""Error consistency: do two decision makers err on the same trials?

Trial-by-trial agreement between binary (correct/incorrect) outcomes,
corrected for the agreement expected by chance (Cohen's kappa), together
with its analytical bounds and simulated null-hypothesis bands.
"""
from .consistency import (
    PairwiseMatrix,
    bounds_cobs,
    bounds_cobs_from_accuracies,
    bounds_kappa,
    expected_overlap,
    group_mean_ci,
    kappa,
    observed_overlap,
    pair_consistency,
    pairwise_matrix,
)
from .core import (
    UNDEFINED,
    AccuracyPair,
    AlignedOutcomes,
    BinQuantiles,
    ConsistencyResult,
    GridSpec,
    Interval,
    PercentileTable,
    ResponseRecord,
    Undefined,
)

__version__ = "0.1.0"
