"""Saddle-point scaling exponents for QAOA on random k-SAT.

Submodules: ``mnsum`` (generalized multinomial sums), ``toy`` (Hamming-weight
squared toy model), ``sat`` (random k-SAT instances), ``qaoa`` (analytic QAOA
exponents and exact p = 1 probabilities), ``simulator`` (statevector
simulation and training), ``solvers`` (WalkSAT family), ``bench`` (benchmark
pipeline) and ``cli``.
"""

__version__ = "0.1.0"
