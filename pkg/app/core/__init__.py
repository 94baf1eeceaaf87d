"""Core module for formsim: settings, errors and rate limiting."""
