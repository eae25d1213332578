"""Batch figure generation for sidesense result files (view layer only)."""

from .figures import ContractError, FigureSpec, render

__version__ = "0.1.0"
