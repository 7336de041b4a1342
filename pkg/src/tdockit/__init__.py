"""tdockit: 3GPP TDoc corpus pipeline and working-group classification toolkit."""

__version__ = "0.1.0"
