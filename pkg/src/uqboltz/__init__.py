"""Direct Fourier-spectral Boltzmann solver with generalized polynomial chaos in the kernel."""
__version__ = "0.1.0"
