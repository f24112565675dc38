"""Experimental and edge-case modules."""
