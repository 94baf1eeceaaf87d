"""Tests module for Tibia Boss API."""
