"""Enantiosensitive exceptional points of a driven chiral two-level model."""

from .averaging import (
    MicroscopicParams,
    PseudoscalarDecomposition,
    decompose,
    mc_orientation_average,
    triple_product,
)
from .dynamics import (
    Direction,
    EncirclementPath,
    EncirclementResult,
    FinalState,
    InitialState,
    loop_time_sweep,
    ep_loop,
    path_point,
    propagate,
    run_encirclement,
    track_branches,
)
from .eps import (
    EPNotConverged,
    EPPoint,
    closed_form_eps,
    eigengap_map,
    ratio_sweep,
    refine_ep,
    response_scaling_probe,
)
from .model import (
    AdiabaticFrame,
    EffectiveParams,
    Handedness,
    build_hamiltonian,
    c_product,
    discriminant,
    effective_from_microscopic,
    eigensystem,
)

__version__ = "0.1.0"
