"""cbvf test suite."""
