"""Backend selection for the pairwise kernel loops.

The compiled extension ``_kernels_ext`` is used when it imports; otherwise
the numpy fallback in ``_kernels_py``.  Set ``CARNOT_KERNELS=python`` to force
the fallback.  ``CARNOT_THREADS`` caps the OpenMP team of the compiled
backend (0 or unset means the OpenMP default).

Both backends reduce each row sequentially in source order, so results are
reproducible run to run for a fixed backend and thread count.
"""
import os

from . import _kernels_py

_impl = _kernels_py
if os.environ.get("CARNOT_KERNELS", "").lower() != "python":
    try:
        from . import _kernels_ext as _impl  # noqa: F811
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND


def threads() -> int:
    try:
        return max(0, int(os.environ.get("CARNOT_THREADS", "0")))
    except ValueError:
        return 0


def heis_index(spec) -> int:
    return spec.n if spec.is_heisenberg else 0


def pair_weights(spec, targets, sources, alpha, backend=None):
    impl = _pick(backend)
    if impl is _kernels_py:
        return impl.pair_weights(targets, sources, heis_index(spec), float(alpha))
    return impl.pair_weights(targets, sources, heis_index(spec), float(alpha), threads())


def difference_rows(spec, targets, tvals, sources, svals, alpha, p, backend=None):
    impl = _pick(backend)
    args = (targets, tvals, sources, svals, heis_index(spec), float(alpha), float(p))
    if impl is _kernels_py:
        return impl.difference_rows(*args)
    return impl.difference_rows(*args, threads())


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py
    if backend == "compiled":
        from . import _kernels_ext
        return _kernels_ext
    raise ValueError(f"unknown backend {backend!r}")
