"""Boundary test generation from guarded state machines, clustering-based
suite reduction, and FR/NFR requirement sentence classification."""

__version__ = "0.1.0"
