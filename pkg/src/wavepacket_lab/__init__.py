"""Numerical laboratory for angularly regular solutions of the wave equation.

Submodules:

- :mod:`~wavepacket_lab.specfun`: Bessel functions, Gauss rules, oscillatory quadrature;
- :mod:`~wavepacket_lab.harmonics`: spherical harmonics and sphere quadrature;
- :mod:`~wavepacket_lab.propagator`: unit-frequency data and the half-wave propagator;
- :mod:`~wavepacket_lab.wavepackets`: packet decomposition and packet asymptotics;
- :mod:`~wavepacket_lab.analysis`: space-time norms and estimate scans;
- :mod:`~wavepacket_lab.cli`: the ``wavepacket-lab`` experiment runner.
"""

__version__ = "0.1.0"
