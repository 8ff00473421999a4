"""Test suite for the OPERA toolkit."""
