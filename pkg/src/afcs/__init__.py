"""Binary compressive sensing with analog fountain codes."""
__version__ = "0.1.0"
