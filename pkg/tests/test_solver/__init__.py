"""Tests for solver module."""
