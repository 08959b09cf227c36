"""Finite element laboratory for homogenization limits of drift-perturbed elliptic and Stokes problems."""

__version__ = "0.1.0"
