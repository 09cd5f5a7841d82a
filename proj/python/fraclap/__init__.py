"""Finite difference solvers for the integral fractional Laplacian."""

from ._fraclap import (
    CapExceeded,
    DomainError,
    Error,
    FormatError,
    FracParams,
    FractionalOperator,
    GridSpec,
    NonNestedGrids,
    QuadConfig,
    ShapeMismatch,
    Stencil,
    build_stencil,
    cell_weight_2d,
    cell_weight_3d,
    manufactured,
    mass,
    norm_const,
    poisson_solve,
    read_field,
    read_stencil,
    tail_weight_2d,
    tail_weight_3d,
    truncation_study,
    write_stencil,
)

__all__ = [name for name in dir() if not name.startswith("_")]
