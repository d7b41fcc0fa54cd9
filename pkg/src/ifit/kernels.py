"""Hot loops, compiled when the extension is built and pure Python otherwise.

Set ``IFIT_PURE_PYTHON=1`` to force the fallback even when the extension
is importable.
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if not os.environ.get("IFIT_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback

knn_tricube = _impl.knn_tricube
gillespie_mm = _impl.gillespie_mm
trait_dynamics = _impl.trait_dynamics
toad_paths = _impl.toad_paths

__all__ = ["BACKEND", "knn_tricube", "gillespie_mm", "trait_dynamics", "toad_paths"]
