"""
Numeric helpers shared across labs.
"""

__version__ = "0.1.0"
