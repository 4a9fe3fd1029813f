"""
MASSIVE design toolkit: budgets, closure solving, Monte Carlo campaigns and
fringe fitting for free-falling microdiamond spin interferometry.
"""
__version__ = "0.1.0"
