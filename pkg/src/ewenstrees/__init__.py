"""Ewens fragmentation trees, Plancherel random trees, and height asymptotics."""

from ewenstrees.bijection import (
    BilabelledTree,
    ChordSequence,
    bitree_to_sequence,
    sequence_to_bitree,
)
from ewenstrees.constants import (
    BrwExponents,
    HeightConstants,
    brw_exponents,
    digamma,
    finite_mass_exponent,
    height_constants,
    log_gamma,
)
from ewenstrees.ewens import (
    BlockSizes,
    CountVector,
    StickWeights,
    all_count_vectors,
    ewens_pmf,
    mixed_factorial_moment,
    sample_block_sizes,
    sample_ewens_crp,
    sample_gem,
)
from ewenstrees.fragmentation import (
    LabelledMassTree,
    MassTree,
    SpinePath,
    grow_recursive_tree,
    many_to_one_check,
    sample_fragmentation,
    sample_labelled_fragmentation,
    sample_spine,
    spine_step_pmf,
)
from ewenstrees.heights import (
    HeightCdfTable,
    Series,
    SMassProfile,
    exact_height_cdf,
    height,
    key_identity_residual,
    macroscopic_count,
    neg_binomial_mean,
    neg_binomial_pmf,
    neg_binomial_var,
    poissonization_radius,
    s_mass_profile,
    series_exp,
    threshold_diagnostic,
)
from ewenstrees.montecarlo import (
    ExperimentConfig,
    ReplicaRecord,
    barrier_diagnostic,
    gamma_mixture_check,
    height_ratio_trend,
    run_experiment,
)
from ewenstrees.trees import (
    CanonicalTree,
    HookData,
    canonicalize,
    enumerate_trees,
    fundamental_identity,
    hook_counts,
    random_leaf_removal,
)

__version__ = "0.1.0"
