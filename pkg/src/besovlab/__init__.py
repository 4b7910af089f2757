"""Littlewood-Paley / Besov tools, anisotropic norm-inflation data, the first
Picard iterate of non-resistive MHD and a 2-D pseudo-spectral solver."""

from .bumps import BumpProfile, CuboidSpec, build_bump_profile, companion_cutoff
from .construction import (
    ConstructionParams,
    VectorInitialData,
    build_algebra_pair,
    build_initial_data,
    initial_norm_report,
)
from .fields import ResolutionError, SpectralField, read_sfld, write_sfld
from .lp import (
    DEFAULT_BANK,
    BesovParams,
    DyadicFilterBank,
    NormReport,
    besov_norm,
    block_lp_norm,
    build_filter_bank,
    project_block,
    sobolev_norm,
)
from .picard import BilinearIBResult, first_iterate_IB_field, heat_evolve, lower_bound_IB, product_norm_scan
from .sparse import Atom, SparseBumpField

__version__ = "0.1.0"
