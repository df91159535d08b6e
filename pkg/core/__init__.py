"""Monocular 3D pedestrian localization and social-distancing verdicts."""
