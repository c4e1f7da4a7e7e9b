"""First-quantized matrix-product-state toolkit for the 1D t-V model.

Spinless fermions are encoded by the distances between consecutive
particles; ordered configurations make antisymmetry implicit, the
hard-core constraint is automatic and the box constraint is a compact
projector MPO, so standard DMRG and TDVP run on an N-site chain whose
entanglement matches (statics) or undercuts (domain-wall dynamics) the
occupation-basis formulation.
"""

__version__ = "0.1.0"

from .mpo import (  # noqa: F401
    ModelParams,
    Mpo,
    assemble_hamiltonian,
    build_ht,
    build_hv,
    build_position_projector,
    build_projector_C,
    build_q2_tv,
    energy_offset,
    hole_params,
)
from .mps import (  # noqa: F401
    Mps,
    canonicalize,
    entropy_profile,
    expectation,
    inner,
    local_expectation,
    mps_from_dense,
    product_state,
)
from .tensor import TruncationPolicy, contract, krylov_expv, lanczos_min, qr_split, svd_split  # noqa: F401
from .dmrg import DmrgConfig, SweepReport, dmrg_run, dmrg_sweep  # noqa: F401
from .tdvp import TdvpConfig, Trajectory, expand_bond_basis, tdvp_run, tdvp_step  # noqa: F401
from .eos import EosTable, eos_maxwell  # noqa: F401
from .observables import (  # noqa: F401
    interparticle_profile,
    leakage,
    occupation_profile,
    particle_entropy_bound,
)
