"""Worker-thread budget shared by the parallel kernels.

The renderer parallelizes over disjoint tile ranges, so results are
bit-identical for any thread count. SPLATSTEREO_THREADS caps the pool.
"""

import os


def resolve_thread_count(requested: int | None = None) -> int:
    """Return the worker-thread count to use.

    Explicit ``requested`` wins, then the SPLATSTEREO_THREADS env var,
    then the machine's CPU count. Always at least 1.
    """
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("SPLATSTEREO_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)
