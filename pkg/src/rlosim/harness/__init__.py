"""Scenario files, experiment orchestration, persistence and plotting."""
