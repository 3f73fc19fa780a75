"""Tests for leontief-mech."""
