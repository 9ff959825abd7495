"""Hot-loop kernels with backend selection.

The compiled extension is used when it was built; otherwise the pure-Python
module takes over. Both implement identical arithmetic.
"""
from types import ModuleType

from . import _kernels_py

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _kernels_py}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_active: ModuleType = _BACKENDS.get("compiled", _kernels_py)


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def active_backend() -> str:
    return "compiled" if _active is _ckernels and _ckernels is not None else "python"


def use_backend(name: str) -> None:
    """Switch every subsequent kernel call to backend ``name``."""
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"backend {name!r} unavailable; choose from {available_backends()}"
        ) from None


def get_backend(name: str) -> ModuleType:
    return _BACKENDS[name]


def birth_death_weights(birth, mu):
    return _active.birth_death_weights(birth, mu)


def run_loss_system(times, classes, uniforms, holding, accept, capacity,
                    first, batch_size, n_batches, record=False):
    return _active.run_loss_system(times, classes, uniforms, holding, accept,
                                   capacity, first, batch_size, n_batches, record)
