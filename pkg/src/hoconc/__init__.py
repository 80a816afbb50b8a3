"""Concolic testing for a small higher-order language."""

from .lang import Program, parse_program
from .search import BudgetExceeded, BugFound, Exhausted, SearchConfig, run

__all__ = ["BudgetExceeded", "BugFound", "Exhausted", "Program", "SearchConfig", "parse_program", "run"]
__version__ = "0.1.0"
