"""Tests package marker."""
