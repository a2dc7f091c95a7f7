"""rpfcone: transfer-operator equilibrium states, Birkhoff-cone contraction
certificates and statistical diagnostics for non-uniformly expanding interval
and circle maps with Holder potentials."""

__version__ = "0.1.0"
