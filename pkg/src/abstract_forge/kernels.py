"""Kernel selection: compiled extension when built, numpy fallback otherwise.

Set ABSTRACT_FORGE_KERNELS=python to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

_impl = _kernels_py
if os.environ.get("ABSTRACT_FORGE_KERNELS", "").lower() != "python":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

IMPLEMENTATION: str = _impl.IMPLEMENTATION
split_hole = _impl.split_hole
take = _impl.take
weighted_sum = _impl.weighted_sum
spans_tasks = _impl.spans_tasks
constant_column = _impl.constant_column
equal_columns = _impl.equal_columns
