"""Model families and their exact small-system oracles."""

from .hubbard import (
    HubbardOracle,
    HubbardParams,
    PotentialSchedule,
    build_cavity_hubbard,
    ground_state_orbitals,
)
from .lasing import (
    LasingParams,
    build_incoherent_lasing_model,
    build_lasing_model,
    effective_density_from_table,
    fit_vibrational_bath,
    relax_to_steady_state,
)
from .tavis_cummings import (
    TavisCummingsParams,
    build_tavis_cummings,
    dicke_lindblad_oracle,
    dicke_oracle_converged,
    mean_field_baseline,
)
from .toy import toy_resonance_model

__all__ = [
    "HubbardOracle",
    "HubbardParams",
    "PotentialSchedule",
    "build_cavity_hubbard",
    "ground_state_orbitals",
    "LasingParams",
    "build_incoherent_lasing_model",
    "build_lasing_model",
    "effective_density_from_table",
    "fit_vibrational_bath",
    "relax_to_steady_state",
    "TavisCummingsParams",
    "build_tavis_cummings",
    "dicke_lindblad_oracle",
    "dicke_oracle_converged",
    "mean_field_baseline",
    "toy_resonance_model",
]
