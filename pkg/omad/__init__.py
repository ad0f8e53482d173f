"""
Online off-policy multi-agent learning with per-agent diffusion policies,
an entropy lower bound on each policy and a shared categorical critic.
"""

__version__ = "0.1.0"
