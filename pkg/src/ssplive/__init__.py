"""Liveness enforcement for Synchronized Sequential Processes nets."""
