"""Video-interaction clickstream analytics.

Turns raw player event logs into encoded watching-state sequences, scores
behavioral actions with fuzzy pattern weights, derives an information
processing index, and runs the downstream analyses: Markov-transition
clustering, dyadic network statistics, engagement/dropout classification,
and proportional-hazards attrition modeling.
"""

from ._accel import active_backend
from .actions import (
    BehavioralActionVector,
    BehavioralCatalog,
    CATEGORY_ORDER,
    all_category_weights,
    category_raw_weight,
    default_catalog,
    mine_top_ngrams,
    summarize_actions,
)
from .ingest import (
    ClickEvent,
    Vwss,
    collapse_scrolls,
    compute_engagement,
    compute_play_proportion,
    encode_vwss,
    iter_groups,
    parse_event_log,
)
from .ipi import DEFAULT_IPI_WEIGHTS, IpiWeightTable, compute_ipi, weight_assign
from .learn import (
    ConfusionSummary,
    FeatureConfig,
    FeatureVector,
    Trajectory,
    build_trajectories,
    evaluate_metrics,
    extract_features,
    grouped_kfold,
    train_logistic,
)
from .markov import (
    FitReport,
    TransitionMatrix,
    cluster_transition_matrices,
    cluster_vwss_metrics,
    fit_markov,
    information_criteria,
    kmeans,
    predict_distribution,
)
from .sna import (
    Adjacency,
    comembership_network,
    density,
    density_by_group,
    ei_index,
    exact_match_matrix,
    multiplex_and,
    qap_correlation,
    qap_regression,
)
from .stats import chi_square, discretize, one_way_anova, tukey_hsd, two_sample_z
from .strdist import (
    EditWeights,
    fuzzy_pattern_weight,
    qgram_cosine_distance,
    weighted_levenshtein,
)
from .survival import HazardModel, SurvivalRecord, fit_hazard, prepare_covariates
from .synth import CohortSpec, HazardSpec, generate_cohort, two_archetype_spec
from .tokens import CLICK_OPS

__version__ = "0.1.0"
