"""Kernel backend selection.

The compiled extension is used when it is importable; otherwise the
pure-Python implementations take over with identical semantics.  Set
``ABSTAINRL_KERNELS=python`` or ``ABSTAINRL_KERNELS=compiled`` to force a
backend (the latter raises if the extension was never built).
"""

from __future__ import annotations

import os
from types import ModuleType

from abstainrl import _pykernels

_forced = os.environ.get("ABSTAINRL_KERNELS", "").strip().lower()

_compiled: ModuleType | None
if _forced == "python":
    _compiled = None
else:
    try:
        from abstainrl import _ckernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        _compiled = None

if _forced == "compiled" and _compiled is None:
    raise ImportError(
        "ABSTAINRL_KERNELS=compiled was requested but the extension is not "
        "built; run `python setup.py build_ext --inplace`"
    )

_impl: ModuleType = _compiled if _compiled is not None else _pykernels

BACKEND: str = _impl.NAME

lcs_length = _impl.lcs_length
trigram_counts = _impl.trigram_counts
log_softmax = _impl.log_softmax
sample_categorical = _impl.sample_categorical


def available_backends() -> dict[str, ModuleType]:
    """Importable backends keyed by name; used by tests and the benchmark."""
    out: dict[str, ModuleType] = {"python": _pykernels}
    if _compiled is not None:
        out["compiled"] = _compiled
    else:
        try:
            from abstainrl import _ckernels  # type: ignore[attr-defined]

            out["compiled"] = _ckernels
        except ImportError:
            pass
    return out
