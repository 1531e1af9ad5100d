"""Dirichlet series and composition operators on H^2 and A_mu^2."""
