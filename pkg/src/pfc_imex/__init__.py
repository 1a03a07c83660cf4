"""Stabilized IMEX Runge-Kutta pseudospectral solver for the phase field crystal equation."""
