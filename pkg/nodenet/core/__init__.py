"""Shared plumbing for the NodeNet apps."""
