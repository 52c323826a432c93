"""Fixture generators, corruptions and a sampling oracle."""
