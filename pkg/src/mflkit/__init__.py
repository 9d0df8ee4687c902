"""Toolkit for magnetic-flux-leakage scan preprocessing and CNN defect classification."""

import os

# MFLKIT_THREADS caps BLAS parallelism. Must be applied before numpy is first
# imported, which is why it sits at the top of the package init.
_threads = os.environ.get("MFLKIT_THREADS")
if _threads:
    for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)
del _threads

__version__ = "0.1.0"
