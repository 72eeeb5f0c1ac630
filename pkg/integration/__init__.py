"""Integration tests for fairdag command-line workflows."""
