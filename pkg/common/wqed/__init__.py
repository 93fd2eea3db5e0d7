"""Single-photon scattering off a two-dimensional atom array threaded by crossed waveguides."""
from common.wqed.errors import (ConfigError, InvalidInputError, InvalidLatticeError, NearSingularMomentumError,
                                OutputError, PoleError, ResonanceSingularityError, Result, SingularNetworkError,
                                SingularPhaseError, UnreliableReconstructionError, WaveguideError)
from common.wqed.green_scattering import (ExcitationField, PortTotals, ScatteringAmplitudes, excitation_profile,
                                          green_apply, port_totals, scatter, scatter_ribbon)
from common.wqed.hamiltonians import (Boundary, EffectiveHamiltonian, InverseChainCoefficients, PhaseMode,
                                      build_h1d, build_heff_2d, build_heff_ribbon, build_inverse_h1d,
                                      build_inverse_h2d, inverse_chain_coefficients)
from common.wqed.model import (Direction, LatticeParams, PhotonInput, PortLabel, gaussian_input,
                               single_port_input)

__version__ = "0.3.0"
