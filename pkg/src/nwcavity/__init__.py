"""Time-domain design and analysis of nanowire cavities on mirrors."""

import os as _os

# the bundled TBB is too old for numba; OpenMP avoids the probe warning
_os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

__version__ = "0.1.0"
