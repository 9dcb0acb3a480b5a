"""
Percolation Bounds Toolkit
Local percolation functional, threshold certificates, packing numbers and
supercritical disconnection bounds on truncated graphs
"""

from .graph_core import (
    GraphFamily,
    GraphSpec,
    GraphView,
    build_view,
    ball,
    inner_boundary,
    interior,
    neighbors,
    puncture,
    segment,
    vertex_at,
)

from .estimates import (
    Estimate,
    wilson_interval
)

from .models import (
    CtdMode,
    Method,
    PercolationParams,
    SupercriticalParams,
    Verdict,
    WilMethod
)

from .percolation_engine import (
    EventSpec,
    connects,
    disconnection_profile,
    exact_probability,
    mc_estimate,
    sample
)

from .phi_functional import (
    PhiQuery,
    PhiResult,
    ball_query,
    phi
)

from .pc_estimator import (
    audit_supercritical_witness,
    check_pepe,
    connection_lower_bound,
    find_witness,
    pc_lower_bound
)

from .packing_certifier import (
    PackingCertificate,
    PackingOracle,
    PackingRequest,
    certify_packing
)

from .bound_verifier import (
    induction_check,
    lemma_bound,
    theorem_bound,
    verify_disconnection
)

__all__ = [
    # Graphs
    'GraphFamily',
    'GraphSpec',
    'GraphView',
    'build_view',
    'ball',
    'inner_boundary',
    'interior',
    'neighbors',
    'puncture',
    'segment',
    'vertex_at',

    # Estimates
    'Estimate',
    'wilson_interval',

    # Models
    'CtdMode',
    'Method',
    'PercolationParams',
    'SupercriticalParams',
    'Verdict',
    'WilMethod',

    # Engine
    'EventSpec',
    'connects',
    'disconnection_profile',
    'exact_probability',
    'mc_estimate',
    'sample',

    # Functional
    'PhiQuery',
    'PhiResult',
    'ball_query',
    'phi',

    # Threshold
    'audit_supercritical_witness',
    'check_pepe',
    'connection_lower_bound',
    'find_witness',
    'pc_lower_bound',

    # Packing
    'PackingCertificate',
    'PackingOracle',
    'PackingRequest',
    'certify_packing',

    # Bounds
    'induction_check',
    'lemma_bound',
    'theorem_bound',
    'verify_disconnection',
]

__version__ = '1.0.0'
