"""Numerical verification of symplectic-Haantjes structures and Lenard-Haantjes chains."""

from .dual import Dual, Jet
from .errors import (
    CollisionError,
    DimensionError,
    DomainError,
    ExpressionError,
    HaantjesError,
    LocalityError,
    ModelFileError,
    ParseError,
    ProjectionError,
    SingularMatrixError,
    UnknownIdentifierError,
)
from .expression import Expression, parse_expression
from .fields import (
    CovectorField,
    OperatorField,
    ScalarField,
    SymplecticForm,
    VectorField,
    covector_rank,
    lie_bracket,
    poisson_bracket,
)
from .report import Check, VerificationReport, emit_report
from .stackel import StackelMatrix, StackelSystem, stackel_hamiltonians, stackel_operators
from .tensors import (
    ChainSpec,
    HaantjesStructure,
    haantjes_tensor,
    nijenhuis_torsion,
    verify_lenard_chain,
    verify_structure,
)

__version__ = "0.1.0"
