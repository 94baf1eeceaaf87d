"""Utilitários (journal de execuções com falha)."""
