"""Hierarquia de exceções do domínio."""


class FormsimError(Exception):
    """Base de todos os erros de configuração, validação e integração do formsim."""

    pass
