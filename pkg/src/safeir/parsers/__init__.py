"""Text format for ProgramModules."""

from ..ir.instructions import SourceLocation
from .sir_parser import IRParseError, ModuleValidationError, parse_module, parse_shape, tokenize
from .sir_printer import format_instruction, format_signature, print_module

__all__ = [
    "IRParseError",
    "ModuleValidationError",
    "SourceLocation",
    "format_instruction",
    "format_signature",
    "parse_module",
    "parse_shape",
    "print_module",
    "tokenize",
]
