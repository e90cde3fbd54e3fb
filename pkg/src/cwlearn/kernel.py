"""Backend selection for the contention kernel.

The compiled extension is preferred; the pure-python twin is a drop-in
replacement producing bit-identical output (same RNG, same event order).
`benchmarks/bench_kernel.py` compares the two.
"""

try:
    from . import _ckernel as _backend
    COMPILED = True
except ImportError:
    from . import _pykernel as _backend
    COMPILED = False

BACKEND = "compiled" if COMPILED else "pure-python"

run_period = _backend.run_period


def backends():
    """Return {name: run_period} for every backend importable here."""
    from . import _pykernel
    out = {"pure-python": _pykernel.run_period}
    if COMPILED:
        out["compiled"] = _backend.run_period
    return out
