"""Frozen dataclasses registered as jax pytrees.

Fields, frame fields and operators are small immutable objects whose array
parameters are pytree leaves.  Passing them through ``jax.jit`` therefore
compiles once per *structure*, not once per parameter value.
"""
from __future__ import annotations

import dataclasses

import jax


def static(**kwargs):
    """Dataclass field excluded from the pytree leaves (part of the jit key)."""
    metadata = dict(kwargs.pop("metadata", {}) or {})
    metadata["static"] = True
    return dataclasses.field(metadata=metadata, **kwargs)


def pytree(cls):
    cls = dataclasses.dataclass(frozen=True)(cls)
    return jax.tree_util.register_dataclass(cls)
