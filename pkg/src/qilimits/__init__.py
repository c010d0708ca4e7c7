"""Performance limits of quantum-illumination transmitters: closed-form bounds,
exact truncated-Fock computations, and Gaussian covariance-matrix checks."""

__version__ = "0.1.0"
