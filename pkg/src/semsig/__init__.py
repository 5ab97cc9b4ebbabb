"""Place recognition from semantic signatures of street objects.

A signature lists the classes of the objects visible from a viewpoint in
clockwise order from north, paired with their quantized bearings. A city
is sampled on a regular grid into a signature database, and a query
signature is localized by ranking database cells with sequence distances.
"""

__version__ = "0.1.0"

from .distortion import DistortionConfig, distort
from .evaluation import (
    EvaluationReport,
    filter_unambiguous,
    localization_error,
    run_benchmark,
    sample_query_set,
    sweep_quantization,
    sweep_visibility,
)
from .geo import PlanarPoint, azimuth_deg, planar_distance, project, unproject
from .ingest import (
    SyntheticCityConfig,
    generate_synthetic_city,
    load_database,
    read_objects_csv,
    read_objects_geojson,
    save_database,
)
from .kernels import BACKEND
from .metrics import (
    EditWeights,
    MetricKind,
    edit_distance,
    edit_distance_normalized,
    histogram_distance,
    jaccard_distance,
    part_distance,
)
from .model import (
    Alphabet,
    BuildParams,
    DatabaseRecord,
    GeoPoint,
    ObjectClass,
    SemanticObject,
    Signature,
    SignatureDatabase,
    alphabet_default,
    signature_from_string,
    signature_to_string,
)
from .retrieval import (
    FusionPolicy,
    Protocol,
    RankedCandidate,
    ground_truth_rank,
    rank_full,
    rank_single,
    rank_two_stage,
    score_fused,
)
from .siggen import BBox, build_database, build_signature, group_stats, quantize_angle
