"""
GBC Mass Lab lessons package.
"""
