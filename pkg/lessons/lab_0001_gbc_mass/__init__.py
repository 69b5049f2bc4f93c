"""
Lab 0001: Gauss-Bonnet-Chern Mass

Numerical engine for the ADM and Gauss-Bonnet-Chern masses of
asymptotically flat metrics and immersed submanifolds, with a pointwise
identity suite and a batch command-line front-end.
"""
