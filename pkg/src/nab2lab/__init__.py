"""Numerical laboratory for non-abelian 2-forms."""
