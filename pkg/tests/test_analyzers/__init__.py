"""Tests for analyzers module."""
