"""Serviços do simulador: grafo, agentes, exossistemas, controle, integração e saídas."""
