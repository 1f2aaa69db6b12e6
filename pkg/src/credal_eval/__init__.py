"""Score uncertainty-aware classifiers by mapping their predictions to credal sets.

The metric combines the divergence from the ground truth to the nearest
credal vertex with a non-specificity penalty, E = d + lambda * NS.
"""

from .credal import (
    CredalVertices,
    IntervalPrediction,
    SampleSet,
    credal_from_intervals,
    credal_width,
    intervals_from_samples,
    lower_prob_from_samples,
    select_budget_subsets,
    vertices_approx,
    vertices_exact,
)
from .divergence import GroundTruth, js_divergence, kl_divergence, min_divergence_to_vertices
from .evaluator import (
    EvalConfig,
    EvaluationRecord,
    ModelSummary,
    aggregate,
    evaluate_instance,
    expected_calibration_error,
    predicted_class,
    rank_models,
)
from .records import PredictionRecord
from .setfn import (
    LabelSpace,
    LowerProbability,
    MassFunction,
    belief,
    commonality,
    mobius_inverse,
    pignistic,
    plausibility,
)
from .uncertainty import (
    EntropyBounds,
    credal_uncertainty,
    entropy_bounds,
    mutual_information,
    ns_dubois,
    ns_korner,
    ns_smets,
    shannon_entropy,
    spec_pal,
)

__version__ = "0.1.0"
