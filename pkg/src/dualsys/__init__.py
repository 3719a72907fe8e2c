"""Dual-system reinforcement learning with reliability-gated planning.

A model-free actor-critic learns alongside per-region latent world models
organized by a growing topology-preserving map.  A meta step chooses, per
decision, between the reactive policy and gradient-based planning through
the local models, gated on each region's recent learning progress, and can
augment replay with imagined latent rollouts.
"""

__version__ = "0.1.0"
