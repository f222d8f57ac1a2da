"""Test suite for the restkit package."""
