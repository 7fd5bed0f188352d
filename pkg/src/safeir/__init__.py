"""safeir: sanitizer check hoisting guided by pointer kinds on a small SSA IR."""

__version__ = "0.1.0"
