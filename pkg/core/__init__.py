"""Core modules for the OPERA toolkit."""
