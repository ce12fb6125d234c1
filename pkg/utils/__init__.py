"""
Shared utilities: environment config, logging, artifacts and the CLI.
"""
