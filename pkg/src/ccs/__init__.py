"""Capability-conditioned scaffolding: profile-aware intervention routing and its evaluation harness."""

__version__ = "0.1.0"
