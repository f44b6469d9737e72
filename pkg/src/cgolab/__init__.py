"""Complex geometrical optics laboratory.

Spectral CGO solvers for the attenuated Schrodinger equation and the
augmented 8x8 Maxwell system, Fourier-mode reconstruction from noisy
pairings, and the closed-form stability bounds they are compared to.
"""

__version__ = "0.1.0"
