"""Hot-loop backend selection.

The compiled extension is used when it was built, otherwise the numpy
implementation. ``use_backend`` switches explicitly (tests, benchmarks).
"""

from __future__ import annotations

from . import _kernels_py

try:
    from . import _kernels  # type: ignore[attr-defined]
except ImportError:
    _kernels = None

BACKENDS = {"python": _kernels_py.ball_accumulate}
if _kernels is not None:
    BACKENDS["cython"] = _kernels.ball_accumulate

BACKEND = "cython" if _kernels is not None else "python"


def use_backend(name: str) -> None:
    global BACKEND
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} is not available (have {sorted(BACKENDS)})")
    BACKEND = name


def ball_accumulate(centers, points, fw, radii, lf, lv):
    return BACKENDS[BACKEND](centers, points, fw, radii, lf, lv)
