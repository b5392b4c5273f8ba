"""Named schemas and shapes available from the command line."""

from __future__ import annotations

from typing import Callable, Union

from .graph import Shape, star_shape, wigner_shape, zshape
from .schema import ChaosSchema, ellipsoid_schemas, khatri_rao_schema, tensor_pca_schemas

Builtin = Union[ChaosSchema, Shape]

_REGISTRY: dict[str, Callable[[], Builtin]] = {
    "khatri-rao-q2": lambda: khatri_rao_schema(2),
    "tensor-pca-1": lambda: tensor_pca_schemas()[0],
    "tensor-pca-2": lambda: tensor_pca_schemas()[1],
    "ellipsoid-phi": lambda: ellipsoid_schemas()[0],
    "ellipsoid-psi": lambda: ellipsoid_schemas()[1],
    "wigner": wigner_shape,
    "zshape": zshape,
    "star": star_shape,
}

BUILTIN_NAMES = tuple(_REGISTRY)
SCHEMA_BUILTINS = BUILTIN_NAMES[:5]
SHAPE_BUILTINS = BUILTIN_NAMES[5:]


def get_builtin(name: str) -> Builtin:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown builtin {name!r}; choose from {', '.join(BUILTIN_NAMES)}") from None
