"""Exact calculus of weakly nonlocal Hamiltonian and symplectic operators in 1+1 dimensions."""

from .ring import DiffExpr, NonlocalError, RingError, format_expr, total_derivative, total_derivative_n
from .varcalc import (
    FunctionalClass,
    NotExactError,
    NotVariationalError,
    WnlCovector,
    WnlVector,
    antiderivative,
    directional,
    euler,
    frechet,
    helmholtz_is_variational,
    higher_euler,
    integrate,
    is_exact,
    reconstruct_density,
)
from .opalg import (
    DegenerateError,
    NotWeaklyNonlocalClosure,
    PDOperator,
    ShapeError,
    Tail,
    TruncatedSeries,
    expand_truncated,
    invert_truncated,
)
from .geom import (
    Inconclusive,
    commutator,
    lie_covector,
    lie_operator,
    pairing,
    poisson_bracket,
    schouten_eval,
    symplectic_trilinear,
)
from .certify import (
    CertificateInputError,
    NotApplicable,
    Refuted,
    casimir_check,
    compatibility_certificate,
    dn_canonical,
    dn_validate,
    hamiltonian_pair_certificate,
    homotopy_potential,
    jpj_decompose,
    wnl_symplectic_certificate,
    zero_order_check,
)
from .parser import Session, SessionError, parse_session, print_session

__version__ = "0.1.0"
