"""Root of the safeir exception hierarchy.

Each subsystem defines its own subclass next to the code that raises it
(ShapeError in ir.types, IRParseError in parsers, TypeFlowError in
analysis.type_flow, ...). Callers that only need "something in safeir went
wrong" catch SafeIRError.
"""


class SafeIRError(Exception):
    """Base class for all errors raised by safeir."""
    pass
