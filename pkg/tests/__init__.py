"""
Test package for the causal partition toolkit.
"""
