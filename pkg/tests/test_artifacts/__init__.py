"""Tests for artifacts module."""
