"""Hot-loop kernels, compiled when available.

The Cython extension ``gridmesh._ckernels`` is used if it was built;
otherwise the numpy fallback in ``gridmesh._pykernels`` is used. Setting
``GRIDMESH_PURE_PYTHON=1`` forces the fallback.
"""

import os

from gridmesh import _pykernels

python_backend = _pykernels

if os.environ.get("GRIDMESH_PURE_PYTHON"):
    compiled_backend = None
else:
    try:
        from gridmesh import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

segment_hits = _impl.segment_hits
point_triangle_distance = _impl.point_triangle_distance
triangulate_cubes = _impl.triangulate_cubes

__all__ = [
    "BACKEND",
    "compiled_backend",
    "python_backend",
    "segment_hits",
    "point_triangle_distance",
    "triangulate_cubes",
]
