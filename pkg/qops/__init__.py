"""Six-vertex transfer matrices and Baxter Q-operators on finite charge sectors."""

from .aplus_operator import (TruncationPolicy, aplus_at_zeta, build_aminus, build_aminus_continued,
                             build_aminus_factorized, build_aplus_continued, build_aplus_factorized,
                             build_aplus_trace)
from .errors import QOpsError
from .qf_operator import build_qf, build_qinf
from .sector import OperatorMatrix, SectorBasis, enumerate_basis
from .transfer import ModelParams, build_transfer

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "OperatorMatrix",
    "QOpsError",
    "SectorBasis",
    "TruncationPolicy",
    "aplus_at_zeta",
    "build_aminus",
    "build_aminus_continued",
    "build_aminus_factorized",
    "build_aplus_continued",
    "build_aplus_factorized",
    "build_aplus_trace",
    "build_qf",
    "build_qinf",
    "build_transfer",
    "enumerate_basis",
]
