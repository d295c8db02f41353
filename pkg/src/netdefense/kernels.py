"""Kernel backend selection.

The compiled extension ``_ckernels`` is used when it was built; otherwise the
numpy implementation in ``_pykernels`` is used. ``use_backend`` switches at
runtime (tests and the benchmark run both).
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from types import ModuleType

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS: dict[str, ModuleType] = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

_active: ModuleType = _ckernels if _ckernels is not None else _pykernels
if _ckernels is None:
    log.debug("compiled kernels unavailable; using the numpy fallback")


def available() -> list[str]:
    return sorted(_BACKENDS)


def backend() -> ModuleType:
    return _active


def use_backend(name: str) -> None:
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available (have {available()})") from None


@contextmanager
def backend_set(name: str):
    prev = _active.NAME
    use_backend(name)
    try:
        yield
    finally:
        use_backend(prev)
