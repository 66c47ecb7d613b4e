"""Clustering-based view planning for surface inspection of building-scale meshes."""
from .mesh import TriangleMesh, build_mesh, load_mesh, subdivide
from .planner import ClusterConfig, PlanConfig, PlanReport, compare_methods, plan
from .solver import GaParams, ScpInstance, solve
from .viewgen import ConstraintSpace, Viewpoint
from .visibility import CameraModel, VisibilityMatrix, visibility_matrix

__all__ = [
    "CameraModel", "ClusterConfig", "ConstraintSpace", "GaParams", "PlanConfig", "PlanReport",
    "ScpInstance", "TriangleMesh", "Viewpoint", "VisibilityMatrix", "build_mesh", "compare_methods",
    "load_mesh", "plan", "solve", "subdivide", "visibility_matrix",
]
