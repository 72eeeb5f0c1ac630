"""
Test fixtures and shared test utilities.

This module provides example graphs, small models and base test classes
for the test suite.
"""
