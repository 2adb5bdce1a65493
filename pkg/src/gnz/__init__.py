"""gnz: graph-based semi-supervised classification.

Feature embeddings plus a small labeled subset go in; full-dataset label
predictions come out, via kNN-graph construction and p-Laplacian label
diffusion (quadratic p=2 spreading or robust p=1 total-variation ratio
minimization), orchestrated as one-pass or dynamic multi-epoch pipelines
with entropy-weighted pseudo-labels.
"""

from .certainty import (
    PseudoLabelSet,
    certainty_weights,
    entropy_certainty,
    extract_pseudo_labels,
    harden_labels,
)
from .errors import GnzError
from .formats import (
    LabelSet,
    PredictionTable,
    export_projection,
    read_embeddings,
    read_labels,
    read_predictions,
    write_embeddings,
    write_labels,
    write_predictions,
)
from .graph import (
    Graph,
    build_knn_graph,
    compute_edge_weights,
    degree_vector,
    normalized_operator,
    read_graph,
    write_edge_list,
    write_graph,
)
from .metrics import MetricReport, accuracy, binary_auc, evaluate, macro_auc
from .pipeline import (
    ExtractorRequest,
    MockExtractorConfig,
    ExternalExtractorConfig,
    PipelineConfig,
    config_from_dict,
    config_from_json,
    dynamic_pass,
    invoke_extractor,
    mock_extract,
    one_pass,
    ramp_weight,
    stage_seed,
)
from .spreading import (
    AlphaSelection,
    DiffusionConfig,
    diffuse_closed_form,
    diffuse_iterative,
    fixed_point_residual,
    seed_matrix,
    select_alpha,
)
from .tvratio import L1Config, diffuse_l1, minimize_class_ratio, ratio_energy, tv_energy

__version__ = "0.1.0"
