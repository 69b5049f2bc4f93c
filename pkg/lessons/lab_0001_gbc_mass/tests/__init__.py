"""
Tests for Lab 0001: Gauss-Bonnet-Chern Mass
"""
