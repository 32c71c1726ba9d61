"""Convolutional sparse coding workbench.

Dilated convolutional dictionaries, Lasso pursuit (ISTA / FISTA / layered
thresholding), plain / residual / dense forward-propagation families, and
executable checks of the theory connecting them.
"""

from .dictionary import (
    ConvDictionary,
    ConvKernel,
    MSDDictionary,
    StripeLayout,
    mutual_coherence,
    stripe_sparsity,
    to_matrix,
)
from .models import (
    LayerParams,
    MLCSCModel,
    MSDCSCModel,
    ResCSCModel,
    mlcsc_forward,
    msdcsc_forward,
    msdcsc_layer_forward,
    rescsc_forward,
)
from .numeric import soft_threshold, soft_threshold_nonneg, spectral_lmax, symmetric_eigs
from .pursuit import (
    LassoProblem,
    PursuitConfig,
    PursuitResult,
    fista,
    ista,
    lasso_objective,
    layered_thresholding,
    lipschitz_constant,
)

__all__ = [
    "ConvDictionary",
    "ConvKernel",
    "MSDDictionary",
    "StripeLayout",
    "LassoProblem",
    "PursuitConfig",
    "PursuitResult",
    "LayerParams",
    "MLCSCModel",
    "MSDCSCModel",
    "ResCSCModel",
    "soft_threshold",
    "soft_threshold_nonneg",
    "spectral_lmax",
    "symmetric_eigs",
    "mutual_coherence",
    "stripe_sparsity",
    "to_matrix",
    "ista",
    "fista",
    "lasso_objective",
    "layered_thresholding",
    "lipschitz_constant",
    "mlcsc_forward",
    "rescsc_forward",
    "msdcsc_forward",
    "msdcsc_layer_forward",
]

__version__ = "0.1.0"
