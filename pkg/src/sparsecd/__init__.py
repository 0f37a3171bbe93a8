"""Sparse rational Christoffel functions for measures with a graphical model."""

from .christoffel import (
    ChristoffelFactor,
    MomentMatrix,
    assemble,
    evaluate,
    evaluate_regularized,
    factorize,
    fit_factor,
    legendre_christoffel,
)
from .errors import (
    InvalidArgumentError,
    NumericOverflowError,
    PreconditionError,
    SingularMomentMatrixError,
    SparseCDError,
)
from .graph import (
    GraphicalModel,
    JunctionTree,
    build_junction_tree,
    chordal_complete,
    junction_tree,
    verify_clique_intersection,
)
from .moments import (
    AnalyticMeasure,
    MomentTable,
    SampleSet,
    analytic_moments,
    empirical_moments,
    get_measure,
    restrict,
)
from .multiindex import Mode, MultiIndexBasis, enumerate_basis, monomial_vector
from .rational import RationalModel, fit

__version__ = "0.1.0"
