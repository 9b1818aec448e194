"""Adaptive coarse spaces for BDDC and FETI-DP on structured 2D/3D meshes."""
from .experiments import ExperimentConfig, ExperimentReport, run_experiment
from .mesh import StructuredMesh, build_mesh

__all__ = ["ExperimentConfig", "ExperimentReport", "run_experiment", "StructuredMesh", "build_mesh"]
__version__ = "0.1.0"
