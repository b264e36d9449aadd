"""Integer-forcing receivers for linear dispersion space-time block codes.

Modules
-------
designs      code designs (Alamouti, Golden, cyclic extension, X_E) and file I/O
channel      Rayleigh channel, ring constellation, real effective channel
lattice      LLL reduction, shortest-vector enumeration, successive minima
if_receiver  integer-forcing equalizer selection and ring decoding
baselines    ZF, MMSE and ML decoders
properties   RNVS / NVD / rank checks and the Wishart radius budget
simkit       seeded Monte Carlo BER sweeps and diversity slopes
"""

from .baselines import decode_ml, decode_mmse, decode_zf
from .channel import (ChannelRealization, Constellation, EffectiveChannel, effective_channel,
                      sample_channel, substream, transmit)
from .designs import LinearDesign, assemble, code_matrix, load_design, make_design
from .if_receiver import IFEqualizer, decode, select_equalizer
from .lattice import LatticeBasis, lll_reduce, successive_minima_check, svp_enumerate
from .properties import (check_nvd, check_rank, check_rnvs, choose_radius,
                         sigma_min_closed_form, wishart_min_eig_ccdf)
from .simkit import BERCurve, ExperimentConfig, diversity_slope, run_ber

__version__ = "0.1.0"

__all__ = [
    "BERCurve", "ChannelRealization", "Constellation", "EffectiveChannel", "ExperimentConfig",
    "IFEqualizer", "LatticeBasis", "LinearDesign", "assemble", "check_nvd", "check_rank",
    "check_rnvs", "choose_radius", "code_matrix", "decode", "decode_ml", "decode_mmse",
    "decode_zf", "diversity_slope", "effective_channel", "lll_reduce", "load_design",
    "make_design", "run_ber", "sample_channel", "select_equalizer", "sigma_min_closed_form",
    "substream", "successive_minima_check", "svp_enumerate", "transmit", "wishart_min_eig_ccdf",
]
