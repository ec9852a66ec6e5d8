"""Monte Carlo laboratory for vertical reflection couplings of sub-Riemannian
Brownian motions on the Heisenberg group, SL(2), its universal cover and SU(2)."""
import numba as _numba

# TBB on this class of machine is often too old; prefer OpenMP, then the
# built-in work queue.
_numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

__version__ = "0.1.0"
