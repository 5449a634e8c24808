"""Entanglement minimization laboratory: E, Ef, Em and Smin with witnesses."""
from .channels import (
    ChannelFamilySpec,
    KrausChannel,
    StinespringIsometry,
    depolarizing,
    dual_subspace,
    make_family,
    stinespring,
    werner_holevo,
)
from .errors import DimensionError, EmlabError, EmptySupportError, LabelError, NumericalError, ValidationError
from .measures import MeasureResult, e_f, e_m, entanglement, s_min
from .optimizer import OptimizerConfig, OptimResult
from .tensor_core import (
    BipartiteCut,
    DensityMatrix,
    Ensemble,
    FactoredSpace,
    PureState,
    Subspace,
    entanglement_entropy,
    von_neumann_entropy,
)

__version__ = "0.1.0"
