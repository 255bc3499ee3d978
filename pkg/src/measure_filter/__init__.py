"""Exact filtering for Fleming-Viot and Dawson-Watanabe measure-valued signals.

Filtering distributions are finite mixtures of Dirichlet processes (FV) or
gamma random measures (DW) indexed by multiplicity vectors; prediction moves
mixture weight down the lattice of multiplicities according to a dual death
process.
"""
from ._mix import FilterStepRecord, NonMonotoneTimes
from .dual import (
    DualTimeState,
    DwDualParams,
    FvDualParams,
    InstabilityError,
    LineageCapExceeded,
    dw_death_prob,
    dw_s_decay,
    fv_death_prob,
    sample_lineage_count,
)
from .dw import dw_filter, dw_predict, dw_update
from .fv import fv_filter, fv_predict, fv_update, total_log_marginal
from .lattice import (
    DownSetTooLarge,
    MultiplicityVector,
    Partition,
    ResourceCapError,
    down_set,
    down_set_union,
    hypergeom_pmf,
    mv,
    project,
    t_update,
)
from .measures import (
    AtomRegistry,
    BaseMeasure,
    DwFilterState,
    FvFilterState,
    Gaussian,
    Uniform,
    mean_measure,
    new_prior,
    predictive_density,
    project_state,
    prune,
)
from .parametric import (
    DirichletMixture,
    GammaMixture,
    cir_filter,
    cir_predict,
    cir_update,
    multi_cir_predict,
    wf_filter,
    wf_predict,
    wf_update,
)

__version__ = "0.1.0"
