"""3D nuclei segmentation and tracking.

Pipeline: probability-map detection -> seeded 3D watershed -> SLIC
supervoxels -> supervoxel boundary correction -> adjacency-graph
frame-to-frame tracking with lineage inference, plus the SEG/DET/TRA
scoring used to evaluate it.
"""

from ._backend import BACKEND_NAME, available_backends
from .volume import Connectivity, LabelVolume, Volume

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "available_backends",
    "Connectivity",
    "LabelVolume",
    "Volume",
    "__version__",
]
