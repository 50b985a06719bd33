"""A small guarded-command language for feature modules with variables."""

from .ast import (
    DslScopeError,
    DslSyntaxError,
    DslTypeError,
    ModelError,
    ModelRuntimeError,
    NormalizationError,
)
from .compose import compose_all_var, compose_var, encode_feature_module
from .elaborate import QuerySpec, System, elaborate, load_system, parse_override
from .evaluation import ProbUpdate, SymbolicTransition, Update, Variable, VarFeatureModule
from .join import join_system, join_var
from .parser import parse_expr, parse_feature_expr, parse_model, parse_syntax
from .printer import format_expr, format_model

__all__ = [
    "DslScopeError",
    "DslSyntaxError",
    "DslTypeError",
    "ModelError",
    "ModelRuntimeError",
    "NormalizationError",
    "ProbUpdate",
    "QuerySpec",
    "SymbolicTransition",
    "System",
    "Update",
    "VarFeatureModule",
    "Variable",
    "compose_all_var",
    "compose_var",
    "elaborate",
    "encode_feature_module",
    "format_expr",
    "format_model",
    "join_system",
    "join_var",
    "load_system",
    "parse_expr",
    "parse_feature_expr",
    "parse_model",
    "parse_override",
    "parse_syntax",
]
