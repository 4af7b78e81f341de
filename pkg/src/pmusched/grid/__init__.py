from .derive import derive, derive_instance, derive_precedence, derive_weights, pmu_submatrix
from .network import (
    AdmittanceMatrix,
    Branch,
    Bus,
    CaseError,
    DanglingBranch,
    MalformedCase,
    PowerNetwork,
    ZeroImpedanceBranch,
    build_admittance,
    load_case,
    parse_case,
)
from .placement import Placement, is_cover, place_pmus
from .svd import NoConvergence, SvdResult, svd
