"""Scheduling cooperative laser engagements and constellation reconfiguration
for space debris remediation."""

__version__ = "0.1.0"
