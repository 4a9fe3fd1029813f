"""
BLAS/OpenMP thread pinning for concurrent sweeps.

When several sweep points or Monte Carlo chunks run on a thread pool, each
NumPy call must not spawn its own BLAS thread team as well.
"""
import logging
import os

logger = logging.getLogger(__name__)

THREAD_VARIABLES = ("OMP_NUM_THREADS", "MKL_NUM_THREADS", "OPENBLAS_NUM_THREADS")


def configure_threading(workers: int = 1) -> bool:
    """
    Pin native thread pools to one thread when more than one worker runs.

    Args:
        workers: Number of concurrent Python workers

    Returns:
        True if the environment was changed
    """
    if workers <= 1:
        return False
    for name in THREAD_VARIABLES:
        os.environ[name] = "1"
    logger.info(f"[Global Threading] {workers} workers; " + ", ".join(f"{n}=1" for n in THREAD_VARIABLES))
    return True
