"""Retainer-pool queueing analysis, sizing, task routing and simulation."""
