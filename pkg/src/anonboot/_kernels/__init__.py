"""Kernel backend selection: compiled extension when available, pure fallback.

Set ANONBOOT_KERNEL=pure (or =native) to force a backend. The selected
backend is exported as module-level functions plus the BACKEND name.
"""

import importlib
import os

_FORCED = os.environ.get("ANONBOOT_KERNEL", "").strip().lower()

if _FORCED == "pure":
    from . import pure as _backend
elif _FORCED == "native":
    from . import _native as _backend  # type: ignore[no-redef]
elif _FORCED:
    raise ImportError(f"unknown ANONBOOT_KERNEL value: {_FORCED!r}")
else:
    try:
        from . import _native as _backend  # type: ignore[no-redef]
    except ImportError:
        from . import pure as _backend

BACKEND = _backend.NAME

sha256 = _backend.sha256
hash256 = _backend.hash256
prng_block = _backend.prng_block
leading_zero_bits = _backend.leading_zero_bits
shuffle_indices = _backend.shuffle_indices
shuffle_prefix = _backend.shuffle_prefix
sample_indices = _backend.sample_indices
pow_scan = _backend.pow_scan
infiltration_cell = _backend.infiltration_cell


def get_backend(name: str):
    """Load a backend module by name ('pure' or 'native'); for benchmarks."""
    if name == "pure":
        return importlib.import_module("anonboot._kernels.pure")
    if name == "native":
        return importlib.import_module("anonboot._kernels._native")
    raise ValueError(f"unknown backend: {name!r}")


def available_backends() -> list[str]:
    names = []
    try:
        get_backend("native")
        names.append("native")
    except ImportError:
        pass
    names.append("pure")
    return names
