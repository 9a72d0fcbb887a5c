"""Gate-set characterization in the operational representation, with particle-filter inference."""

from .gateset import GateSet, concat, format_sequence, parse_sequence, power, seq, sequence_probability
from .kernels import BACKEND
from .oprep import (OperationalRep, ParameterMap, build_operational_rep, informational_completeness,
                    lgst_reconstruct, minimal_parameterization, oprep_sequence_probability)
from .priors import ChannelPrior, PriorSpec
from .smc import (Datum, InferenceFailure, ParticleCloud, bayes_update, induce_operational_prior,
                  posterior_mean, predict, update_all)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ChannelPrior", "Datum", "GateSet", "InferenceFailure", "OperationalRep", "ParameterMap",
    "ParticleCloud", "PriorSpec", "bayes_update", "build_operational_rep", "concat", "format_sequence",
    "induce_operational_prior", "informational_completeness", "lgst_reconstruct", "minimal_parameterization",
    "oprep_sequence_probability", "parse_sequence", "posterior_mean", "power", "predict", "seq",
    "sequence_probability", "update_all",
]
