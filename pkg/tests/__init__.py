"""
Test suite for fairdag.

This package contains unit tests for graph queries, discrete and
linear-Gaussian models, fairness criteria, interventions and scenarios.
"""
