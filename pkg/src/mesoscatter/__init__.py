"""Many-body scattering through chaotic cavities: exact amplitudes, random-matrix
moments, dephasing kernels and semiclassical diagram series."""

__version__ = "0.1.0"
