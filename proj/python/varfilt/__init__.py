"""Sequential filters with diagonal-plus-low-rank covariances.

The package is a thin wrapper over the compiled ``_core`` extension. When
installed (scikit-build-core places ``_core`` next to this file) the relative
import succeeds; during in-tree testing the extension lives in the CMake
build directory, pointed to by ``VARFILT_CORE_DIR``.
"""

try:
    from ._core import *  # noqa: F401,F403
    from ._core import __doc__ as _core_doc
except ImportError:
    import importlib.util as _ilu
    import os as _os

    _core_dir = _os.environ.get("VARFILT_CORE_DIR")
    if not _core_dir:
        raise
    _candidates = [
        _os.path.join(_core_dir, f)
        for f in sorted(_os.listdir(_core_dir))
        if f.startswith("_core") and (f.endswith(".so") or f.endswith(".pyd"))
    ]
    if not _candidates:
        raise
    _spec = _ilu.spec_from_file_location("varfilt._core", _candidates[0])
    _core = _ilu.module_from_spec(_spec)
    _spec.loader.exec_module(_core)
    _core_doc = _core.__doc__
    for _name in dir(_core):
        if not _name.startswith("_"):
            globals()[_name] = getattr(_core, _name)

__all__ = [
    "filter_names",
    "ep_project",
    "elbo_project",
    "l2_objective",
    "l2_project",
    "kl_gaussian",
    "kalman_update",
    "hinf_gain",
    "gamma_max",
    "run_filter",
    "sweep",
    "sweep_csv",
    "ellipse_points",
    "SingularityError",
    "CapacityError",
    "FeasibilityError",
]
