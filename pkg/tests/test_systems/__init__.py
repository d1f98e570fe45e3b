"""Tests for systems module."""
