"""3D left-ventricle segmentation for late-gadolinium-enhanced cardiac MR.

The pipeline corrects breath-hold slice misalignment, registers cine a-priori
contours onto the LGE images, detects myocardial edges with an intensity
profile model, and fits a pair of coupled simplex-mesh surfaces. A procedural
cardiac phantom with exact ground truth supports end-to-end validation.
"""

from .align import AlignmentResult, normalized_mssd, realign, total_residual
from .bundle import (StudyBundle, bundle_from_study, read_bundle, read_contour_csv, read_pgm,
                     read_plane, write_bundle, write_contour_csv, write_pgm,
                     write_plane)
from .config import PipelineConfig
from .errors import (CoplanarityError, DegenerateHistogramError,
                     DegenerateSampleError, NumericFailure,
                     ParameterizationError, RegistrationFailure, StageError,
                     ValidationError)
from .geometry import (PlaneFrame, Ray, SlicePlane, bilinear_sample,
                       intersect_planes, sample_along, star_polygon_radii)
from .mesh import (DeformParams, SimplexMesh, VertexPairing, build_meshes,
                   deform, edge_force, export_obj, slice_mesh, smooth_force,
                   thickness_forces, vertex_normals)
from .metrics import (SegmentationMasks, dice, mean_contour_distance,
                      polygon_mask, study_metrics, volumetric_dice)
from .phantom import (InfarctSpec, PhantomSpec, PhantomStudy,
                      TissueIntensities, generate, inject_misalignment,
                      truth_polar)
from .pipeline import RunResult, run_pipeline
from .profile_model import (AxialContour, EdgePoint, IntensityModel,
                            PolarContour, TemplateParams, build_template,
                            detect_edges_la, detect_edges_sa, edge_strength,
                            estimate_intensities, icm_minimize, match_error,
                            normalize_edge_weights, otsu_threshold,
                            polar_from_contours, ray_cost_tables)
from .register import (PatternIntensityParams, Roi, define_roi,
                       pattern_intensity, propagate_contours,
                       register_translation)

__version__ = "1.0.0"

__all__ = [
    "AlignmentResult", "AxialContour", "CoplanarityError",
    "DeformParams", "DegenerateHistogramError", "DegenerateSampleError",
    "EdgePoint", "InfarctSpec", "IntensityModel", "NumericFailure",
    "ParameterizationError", "PatternIntensityParams", "PhantomSpec",
    "PhantomStudy", "PipelineConfig", "PlaneFrame", "PolarContour", "Ray",
    "RegistrationFailure", "Roi", "RunResult", "SegmentationMasks",
    "SimplexMesh", "SlicePlane", "StageError", "StudyBundle",
    "TemplateParams", "TissueIntensities", "ValidationError", "VertexPairing",
    "bilinear_sample", "build_meshes", "build_template", "bundle_from_study", "define_roi",
    "deform", "detect_edges_la", "detect_edges_sa", "dice", "edge_force",
    "edge_strength", "estimate_intensities", "export_obj", "generate",
    "icm_minimize", "inject_misalignment", "intersect_planes", "match_error",
    "mean_contour_distance", "normalize_edge_weights", "normalized_mssd",
    "otsu_threshold", "pattern_intensity", "polar_from_contours",
    "polygon_mask", "propagate_contours", "ray_cost_tables", "read_bundle",
    "read_contour_csv", "read_pgm", "read_plane", "realign",
    "register_translation", "run_pipeline", "sample_along", "slice_mesh",
    "smooth_force", "star_polygon_radii", "study_metrics", "thickness_forces",
    "total_residual", "truth_polar", "vertex_normals", "volumetric_dice",
    "write_bundle", "write_contour_csv", "write_pgm", "write_plane",
]
