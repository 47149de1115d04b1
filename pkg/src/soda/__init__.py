"""Directed-information analysis of part-based pose sequences.

Pipeline: detection candidates per frame -> per-frame joint placement
distributions from a star-structured part model (Gibbs sampling) -> one
shared k-means codebook -> symbol sequences -> shrinkage-regularized
directed information for localization (significance-screened DI surfaces)
and nearest-neighbor classification.
"""

from .classify import (
    DiMatrix,
    EvalReport,
    Prediction,
    SplitResult,
    evaluate,
    nn_classify,
    pairwise_matrix,
    split,
)
from .config import Config, build_config, load_config
from .errors import SodaError
from .estimators import (
    DiResult,
    MultinomialEstimate,
    cond_mutual_info,
    directed_information,
    entropy,
    mutual_information,
    shrink,
    shrinkage_lambda,
    symmetrized_di,
)
from .ingest import (
    DetectionSequence,
    FrameDetections,
    Part,
    PartState,
    PersonDetections,
    SymbolSequence,
    ValidationReport,
    load_detections,
    load_symbols,
    save_detections,
    save_symbols,
    validate,
)
from .localize import (
    DiSurface,
    NullModel,
    PairScreen,
    Peak,
    PeakList,
    SurfaceSpec,
    analyze_pair,
    detect_peaks,
    fdr_select,
    local_di_surface,
    null_calibrate,
    p_values,
    screen_pairs,
)
from .mrf import (
    DistributionTable,
    GammaFit,
    PictorialModel,
    SampleSet,
    exact_joint,
    fit_gammas,
    gibbs_sample,
    gibbs_sample_frames,
    log_potential,
)
from .oracle import (
    ProcessSpec,
    exact_di,
    exact_mi,
    random_process,
    sample_process,
)
from .quantize import (
    Codebook,
    JointHistogram,
    encode,
    encode_sequence,
    fit_codebook,
    joint_histogram,
    learn_codebook,
)
from .synth import (
    ClassTemplate,
    CouplingSpec,
    LabeledCorpus,
    gen_corpus,
    gen_coupled_pair,
    reverse_time,
)

__version__ = "0.1.0"

__all__ = [
    "ClassTemplate",
    "Codebook",
    "Config",
    "CouplingSpec",
    "DetectionSequence",
    "DiMatrix",
    "DiResult",
    "DiSurface",
    "DistributionTable",
    "EvalReport",
    "FrameDetections",
    "GammaFit",
    "JointHistogram",
    "LabeledCorpus",
    "MultinomialEstimate",
    "NullModel",
    "PairScreen",
    "Part",
    "PartState",
    "Peak",
    "PeakList",
    "PersonDetections",
    "PictorialModel",
    "Prediction",
    "ProcessSpec",
    "SampleSet",
    "SodaError",
    "SplitResult",
    "SurfaceSpec",
    "SymbolSequence",
    "ValidationReport",
    "analyze_pair",
    "build_config",
    "cond_mutual_info",
    "detect_peaks",
    "directed_information",
    "encode",
    "encode_sequence",
    "entropy",
    "evaluate",
    "exact_di",
    "exact_joint",
    "exact_mi",
    "fdr_select",
    "fit_codebook",
    "fit_gammas",
    "gen_corpus",
    "gen_coupled_pair",
    "gibbs_sample",
    "gibbs_sample_frames",
    "joint_histogram",
    "learn_codebook",
    "load_config",
    "load_detections",
    "load_symbols",
    "local_di_surface",
    "log_potential",
    "mutual_information",
    "nn_classify",
    "null_calibrate",
    "p_values",
    "pairwise_matrix",
    "random_process",
    "reverse_time",
    "sample_process",
    "save_detections",
    "save_symbols",
    "screen_pairs",
    "shrink",
    "shrinkage_lambda",
    "split",
    "symmetrized_di",
    "validate",
]
