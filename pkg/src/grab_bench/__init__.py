"""Offline grasp-benchmark evaluation toolkit.

Computes the three graspability scores (object, grasp, clutter) and the three
performance scores (success, stability, efficiency) from file-based inputs,
fits the outcome models linking pre-grasp conditions to performance, and
emits comparison reports. No robot hardware involved.
"""

from .deformation import (AlignmentResult, DcdParams, ObjectScoreInput, PointCloud,
                          dcd, density_counts, icp, nearest_neighbor, object_score,
                          pca_align)
from .errors import GrabError
from .geometry import (CameraIntrinsics, ExecutablePose, KinematicChain,
                       ParallelGraspPose, Quaternion, RigidTransform, SuctionPose,
                       WorkbenchPlane, approach_angle, camera_to_world, compose_chain,
                       filter_poses, final_grasp_score, grasp_to_executable,
                       pixel_to_camera, pre_grasp_offset, rotation_to_quaternion)
from .inference import (DesignMatrix, FitResult, HalfTreatment, ModelOutcome,
                        ModelSpec, PdpCurve, build_design, detect_separation,
                        fit_fractional_logit, fit_logistic, kernel_density,
                        odds_ratio_table, partial_dependence, pearson_correlations,
                        wald_test)
from .reporting import (BoxStats, FailureBreakdown, RadarProfile, best_gripper,
                        box_stats, emit_report, failure_breakdown, radar_polygon)
from .scene import (BinaryMask, ClutterState, Contour, DepthImage, OccupancyResult,
                    binarize, clutter_score, compress_contour, depth_filter,
                    extract_outer_contours, largest_contour, occupancy,
                    scene_occupancy, trim_region)
from .scoring import (FailureMode, ForceSeries, GripperType, HoldTimeline,
                      ObjectCategory, TrialOutcome, TrialRecord, aggregate_profiles,
                      detect_drop, efficiency_score, grasp_score, normalize_efficiency,
                      score_trials, stability_score, success_score)

__version__ = "0.1.0"
