"""
Fishery quota-control models, solvers and scenario runners
"""

__version__ = "0.1.0"
