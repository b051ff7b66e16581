"""Modulation classification from ECDF samples at a few testpoints.

The main entry points are :func:`class_statistics` and
:func:`build_discriminant_model` (the quadratic Bayes classifier),
:func:`optimize_testpoints` for placing the testpoints, and
:func:`run_experiment` for Monte Carlo evaluation against the ML, Kuiper,
rcK and VD baselines.
"""

from .baselines import (
    VdModel,
    build_vd_model,
    kuiper_classify,
    ml_classify,
    rck_classify,
    vd_classify,
)
from .bayes import (
    ClassStatistics,
    DiscriminantModel,
    RegionProbabilities,
    build_discriminant_model,
    class_statistics,
    discriminant_classify,
    exact_bayes_classify,
    multinomial_log_pmf,
    region_counts,
)
from .distributions import (
    SampledEcdf,
    TestpointSet,
    TheoreticalCdf,
    cdf_at,
    pdf_at,
    sampled_ecdf,
    theoretical_cdf,
)
from .harness import ConfusionMatrix, ExperimentConfig, build_models, emit_csv, run_experiment
from .kernels import BACKEND
from .signal import (
    ChannelConfig,
    Constellation,
    SymbolBlock,
    quadrature_feature,
    standard_constellation,
    transmit,
)
from .testpoints import (
    PairContext,
    bhattacharyya,
    multiclass_testpoints,
    optimize_testpoints,
    pdf_crossings,
)

__version__ = "0.1.0"
