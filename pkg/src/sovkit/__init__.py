"""Separation-of-variables spectrum toolkit for trigonometric gl(n) chains."""
