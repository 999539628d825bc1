"""Heterophily-aware graph neural architecture search.

The package searches over per-layer aggregation operators (homophilic and
heterophilic families), layer-skip gates, and multi-scale fusers with a
differentiable supernet, shrinks the candidate pool progressively, selects a
discrete architecture with a leave-one-out heterophily criterion, and trains
the result from scratch.
"""

from .tensor import Tensor, Tape, gradient_check
from .sparse import SparseMatrix

__version__ = "0.1.0"

__all__ = ["Tensor", "Tape", "SparseMatrix", "gradient_check", "__version__"]
