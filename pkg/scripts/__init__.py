"""
Batch experiment scripts.
"""
