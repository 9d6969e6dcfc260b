"""opmap: positivity certification and decomposition of maps between
finite-dimensional operator algebras, with uncertainty-relation checkers."""

from .algebra import (
    AlgebraShape,
    DEFAULT_TOL,
    Element,
    ToleranceConfig,
    element_from_json,
    element_to_json,
)
from .maps import (
    ChoiMatrix,
    KrausSet,
    MapDescriptor,
    Notion,
    PositivityReport,
    RegistrationError,
    amplify_type1,
    amplify_type2,
    choi_matrix,
    evaluate,
    is_completely_positive_exact,
    register_map,
    replay_witness,
    test_choi_inequality,
    test_positive,
    test_superadditive,
    test_tracial,
)

__version__ = "0.1.0"
