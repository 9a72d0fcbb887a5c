"""Protocol front ends: designs, priors and analyses for each experiment type."""

from . import lsgst, ramsey, rb, statetomo
from .design import ExperimentDesign

__all__ = ["ExperimentDesign", "lsgst", "ramsey", "rb", "statetomo"]
