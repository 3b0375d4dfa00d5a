"""Quantum correlations in systems of indistinguishable fermions.

Subpackages cover the fixed-number Fock machinery (`fock`), dense SDP
solvers (`sdp`), state constructors and channels (`states`), the pair
concurrence for four modes (`concurrence`), sampled-constraint
entanglement witnesses (`witness`), geometric discord (`discord`), the
extended Hubbard chain (`hubbard`), and file formats plus CLI (`serialize`,
`cli`).
"""

__version__ = "0.1.0"
