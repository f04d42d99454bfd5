"""Surrogate fine-resolution commuter networks from perturbed census releases."""
