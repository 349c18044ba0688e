"""Fifth-order partially symmetric CPD by joint diagonalization.

The package provides

* :func:`cps5_jd` / :class:`CPS5JD`, the closed-form decomposition driven by
  rank-1 detectors and real joint diagonalization;
* :func:`cps5_eals` / :class:`CPS5EALS`, alternating least squares with an
  exact line search, optionally started from the JD solution;
* :func:`ica_cpa` / :class:`ICACPA`, blind separation of trilinear mixtures
  through the quadricovariance and the fifth-order CPD;
* generators, the Amari index and a Monte-Carlo runner in
  :mod:`cps5jd.experiments`, and the ``cps5`` command line.
"""
__version__ = "0.1.0"

from .cps5_eals import CPS5EALS, AlsOptions, AlsTrace, cps5_eals
from .cps5_jd import CPS5JD, Cps5JdOptions, Cps5Report, cps5_jd
from .ct1 import CT1FormatError, read_ct1, write_ct1
from .experiments import amari_pi, pi_of_estimate
from .icacpa import ICACPA, IcaCpaResult, ica_cpa, recover_sources
from .tensor_core import FactorSet, khatri_rao, synthesize_cp5

__all__ = [
    "AlsOptions",
    "AlsTrace",
    "CPS5EALS",
    "CPS5JD",
    "CT1FormatError",
    "Cps5JdOptions",
    "Cps5Report",
    "FactorSet",
    "ICACPA",
    "IcaCpaResult",
    "amari_pi",
    "cps5_eals",
    "cps5_jd",
    "ica_cpa",
    "khatri_rao",
    "pi_of_estimate",
    "read_ct1",
    "recover_sources",
    "synthesize_cp5",
    "write_ct1",
]
