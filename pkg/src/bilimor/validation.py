"""Input coercion helpers shared by the estimators and the CLI."""

import numbers

import numpy as np

from .exceptions import InputError
from .system import BilinearSystem


def check_system(system, siso=False):
    """Coerce ``system`` to a :class:`BilinearSystem`.

    Accepts an existing system, a ``(A, N, B, C)`` tuple or a mapping with
    those keys.
    """
    if isinstance(system, BilinearSystem):
        result = system
    elif isinstance(system, dict):
        try:
            result = BilinearSystem(system["A"], system["N"], system["B"], system["C"])
        except KeyError as exc:
            raise InputError(f"system mapping lacks key {exc}") from None
    elif isinstance(system, (tuple, list)) and len(system) == 4:
        result = BilinearSystem(*system)
    else:
        raise InputError(f"cannot interpret {type(system).__name__} as a bilinear system")
    if siso and not result.is_siso:
        raise InputError("a single-input single-output system is required")
    return result


def check_order(order, n):
    if not isinstance(order, numbers.Integral) or isinstance(order, bool):
        raise InputError(f"order must be an integer, got {order!r}")
    if not 1 <= order <= n:
        raise InputError(f"order must satisfy 1 <= r <= n = {n}, got {order}")
    return int(order)


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise InputError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)
