"""Phase-field image segmentation (ACCV model) with exponential time differencing."""
from .admm import RunTrace, admm_solve, extract_contours, extract_labels
from .estimator import ACCVSegmenter, MultiIGLIM
from .etd import NonFiniteError, SolveReport, solve_to_steady
from .iglim import InitParams, NoEdgesError, combine_phases, multi_iglim
from .model import EmptyRegionWarning, ModelParams, stabilizer_bound
from .spectral import SpectralPlan, apply_phi

__all__ = [
    "ACCVSegmenter", "MultiIGLIM", "ModelParams", "InitParams", "SpectralPlan", "RunTrace",
    "SolveReport", "admm_solve", "solve_to_steady", "multi_iglim", "combine_phases",
    "extract_labels", "extract_contours", "apply_phi", "stabilizer_bound",
    "NoEdgesError", "NonFiniteError", "EmptyRegionWarning",
]
__version__ = "0.1.0"
