# formsim
"""Simulação e verificação de controle de formação com informação binária."""

__version__ = "0.1.0"
