"""Service placement and flow-rule planning for SDN-controlled roadside-unit clouds."""

__version__ = "0.1.0"
