"""Footstep-level navigation for bipedal walkers on the 3D-LIP model."""
