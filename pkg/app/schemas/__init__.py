"""Schemas das rotas da API."""
