"""Numerical realization of the projective-dual CR structure on strongly
C-convex hypersurfaces and decision procedures for decomposing functions as
CR + dual-CR sums."""

from .errors import (
    ChartError,
    DegenerateDual,
    DegenerateFrame,
    DivisionBySingularJet,
    DualCRError,
    ExprEvalError,
    IndexOutOfRange,
    MismatchedJetSpaces,
    NoHitZeroViolated,
    NotTotallyReal,
    ParseError,
    ProjectionDiverged,
    RepairFailed,
    ResidualTooLarge,
    SingularPivot,
)
from .expr import eval_jet, eval_value, parse, pretty
from .fields import FieldJet, apply_field, bracket, build_field, xt_fields
from .forms import (
    FormFrame,
    HFormSplit,
    LambdaResult,
    NuMatrix,
    eval_forms,
    h_frame,
    lambda_of,
    nu_matrix,
    split_d,
)
from .hypersurface import (
    Chart,
    StructureReport,
    Surface,
    SurfacePoint,
    Tolerances,
    check_structure,
    dual_map,
    make_chart,
    project_to_surface,
    repair_star,
    sample_points,
    star_margins,
)
from .incidence import (
    IncidencePoint,
    Section4Report,
    check_section4,
    lift,
    tangential_part,
)
from .jets import Jet, JetSpace, get_space, implicit_solve, jet_arith, jet_partial
from .decompose import (
    PointRecord,
    ResidualReport,
    decomposable_corpus,
    lambda_consistency,
    nondecomposable_corpus,
    report_to_csv,
    report_to_dict,
    report_to_json,
    run_decomposition,
    theorem_a_residuals,
    theorem_b_residuals,
)
from .sphere_plh import CrossCheckReport, audibert_residuals, cross_check

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
