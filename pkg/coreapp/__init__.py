"""
Causal discovery by partitioning: graphs, partitions, subset learners and merging.
"""
