from .base import CompositeModel, full_grad, full_loglik, holdout_negative_loglik
from .frailty import FrailtyParams, GammaFrailtyModel
from .ising import IsingModel, IsingParams

__all__ = [
    "CompositeModel",
    "FrailtyParams",
    "GammaFrailtyModel",
    "IsingModel",
    "IsingParams",
    "full_grad",
    "full_loglik",
    "holdout_negative_loglik",
]
