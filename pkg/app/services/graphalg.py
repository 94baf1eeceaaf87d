"""Grafo de comunicação, matriz de incidência e operadores de Kronecker sem materialização.

Convenção de índices: arquivos de cenário usam nós 1-based; internamente tudo é 0-based.
Cada aresta é um par (head, tail): head é a ponta positiva (+1 em B), tail a negativa (-1).
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from app.core.errors import FormsimError

logger = logging.getLogger(__name__)

# Tolerância relativa do teste de consistência por mínimos quadrados
CONSISTENCY_RTOL = 1e-9


class GraphError(FormsimError):
    """Exceção lançada para grafos inválidos ou vetores com dimensão incompatível."""

    pass


@dataclass(frozen=True)
class Graph:
    """Grafo não direcionado com orientação fixa das arestas."""

    n_nodes: int
    edges: Tuple[Tuple[int, int], ...]
    heads: np.ndarray = field(init=False, repr=False, compare=False)
    tails: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_nodes < 1:
            raise GraphError(f"n_nodes deve ser positivo (recebido {self.n_nodes})")

        edges = tuple((int(h), int(t)) for h, t in self.edges)
        for k, (head, tail) in enumerate(edges):
            for node in (head, tail):
                if not 0 <= node < self.n_nodes:
                    raise GraphError(
                        f"Aresta {k + 1}: nó {node + 1} fora do intervalo [1, {self.n_nodes}]"
                    )
            if head == tail:
                raise GraphError(f"Aresta {k + 1}: self-loop no nó {head + 1}")

        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "heads", np.array([h for h, _ in edges], dtype=np.intp))
        object.__setattr__(self, "tails", np.array([t for _, t in edges], dtype=np.intp))

    @classmethod
    def from_one_based(cls, n_nodes: int, edges: Iterable[Sequence[int]]) -> "Graph":
        """Constrói o grafo a partir de arestas 1-based (formato dos arquivos de cenário)."""
        return cls(n_nodes=n_nodes, edges=tuple((h - 1, t - 1) for h, t in edges))

    @classmethod
    def from_incidence(cls, incidence: np.ndarray) -> "Graph":
        """Reconstrói o grafo a partir de uma matriz de incidência densa N×M."""
        incidence = np.asarray(incidence)
        edges = []
        for k in range(incidence.shape[1]):
            column = incidence[:, k]
            heads = np.flatnonzero(column == 1)
            tails = np.flatnonzero(column == -1)
            if len(heads) != 1 or len(tails) != 1 or np.count_nonzero(column) != 2:
                raise GraphError(f"Coluna {k + 1} da matriz de incidência não tem um +1 e um -1")
            edges.append((int(heads[0]), int(tails[0])))
        return cls(n_nodes=incidence.shape[0], edges=tuple(edges))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def one_based_edges(self) -> list:
        return [[h + 1, t + 1] for h, t in self.edges]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=int)
        np.add.at(deg, self.heads, 1)
        np.add.at(deg, self.tails, 1)
        return deg

    def without_edges(self, indices: Iterable[int]) -> "Graph":
        """Retorna uma cópia sem as arestas de índices (0-based) informados."""
        drop = set(indices)
        kept = tuple(e for k, e in enumerate(self.edges) if k not in drop)
        return Graph(n_nodes=self.n_nodes, edges=kept)

    def to_networkx(self) -> nx.MultiGraph:
        # MultiGraph preserva arestas paralelas (ciclos de comprimento 2)
        g = nx.MultiGraph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_edges_from(self.edges)
        return g


@dataclass(frozen=True, eq=False)
class FormationSpec:
    """Posições relativas desejadas z_k* (uma linha por aresta) em R^p."""

    p: int
    z_star: np.ndarray

    def __post_init__(self):
        if self.p < 1:
            raise GraphError(f"Dimensão p deve ser positiva (recebido {self.p})")
        z_star = np.asarray(self.z_star, dtype=float)
        if z_star.ndim == 1:
            z_star = z_star.reshape(-1, self.p)
        if z_star.ndim != 2 or z_star.shape[1] != self.p:
            raise GraphError(f"z_star deve ter formato M×{self.p}, recebido {z_star.shape}")
        z_star.setflags(write=False)
        object.__setattr__(self, "z_star", z_star)

    @property
    def n_edges(self) -> int:
        return self.z_star.shape[0]

    def flat(self) -> np.ndarray:
        return self.z_star.reshape(-1)


@dataclass(frozen=True, eq=False)
class ConsistencyResult:
    """Resultado de check_formation_consistency."""

    consistent: bool
    witness: Optional[np.ndarray]
    residual: float


def build_incidence(graph: Graph) -> np.ndarray:
    """
    Monta a matriz de incidência densa N×M.

    Entrada (i, k) = +1 se i é a ponta positiva da aresta k, -1 se é a negativa, 0 caso contrário.
    """
    incidence = np.zeros((graph.n_nodes, graph.n_edges), dtype=int)
    columns = np.arange(graph.n_edges)
    incidence[graph.heads, columns] = 1
    incidence[graph.tails, columns] = -1
    return incidence


def edge_laplacian(graph: Graph) -> np.ndarray:
    incidence = build_incidence(graph)
    return incidence.T @ incidence


def is_connected(graph: Graph) -> bool:
    """Retorna True se o grafo não direcionado é conexo."""
    return nx.is_connected(graph.to_networkx())


def is_tree(graph: Graph) -> bool:
    """
    Retorna True se o grafo (conexo) não possui ciclos.

    Raises:
        GraphError: Se o grafo é desconexo (propriedade indefinida nesse caso)
    """
    g = graph.to_networkx()
    if not nx.is_connected(g):
        raise GraphError("is_tree requer um grafo conexo")
    return nx.is_tree(g)


def _check_length(name: str, vector: np.ndarray, expected: int) -> np.ndarray:
    vector = np.asarray(vector)
    if vector.ndim != 1 or vector.shape[0] != expected:
        raise GraphError(f"{name} deve ter comprimento {expected}, recebido {vector.shape}")
    return vector


def apply_BT_kron(graph: Graph, p: int, x: np.ndarray) -> np.ndarray:
    """
    Calcula z = (Bᵀ ⊗ I_p)·x aresta por aresta: z_k = x_head(k) - x_tail(k).

    Args:
        graph: Grafo de comunicação
        p: Dimensão do espaço ambiente
        x: Vetor empilhado de posições em R^{Np}

    Returns:
        Vetor empilhado de posições relativas em R^{Mp}
    """
    x = _check_length("x", x, graph.n_nodes * p).reshape(graph.n_nodes, p)
    return (x[graph.heads] - x[graph.tails]).reshape(-1)


def apply_B_kron(graph: Graph, p: int, w: np.ndarray) -> np.ndarray:
    """
    Calcula (B ⊗ I_p)·w por scatter-add sobre as arestas.

    Args:
        graph: Grafo de comunicação
        p: Dimensão do espaço ambiente
        w: Vetor empilhado em R^{Mp}

    Returns:
        Vetor empilhado em R^{Np}
    """
    w = _check_length("w", w, graph.n_edges * p).reshape(graph.n_edges, p)
    out = np.zeros((graph.n_nodes, p), dtype=np.result_type(w.dtype, int))
    np.add.at(out, graph.heads, w)
    np.subtract.at(out, graph.tails, w)
    return out.reshape(-1)


def check_formation_consistency(graph: Graph, spec: FormationSpec) -> ConsistencyResult:
    """
    Verifica se existe x* com (Bᵀ ⊗ I_p)·x* = z*.

    Usa mínimos quadrados por coordenada; a formação é consistente quando o resíduo
    não passa de 1e-9·(1 + ‖z*‖).

    Returns:
        ConsistencyResult com a testemunha x* (empilhada) quando consistente
    """
    if spec.n_edges != graph.n_edges:
        raise GraphError(
            f"z_star tem {spec.n_edges} vetores mas o grafo tem {graph.n_edges} arestas"
        )

    incidence_t = build_incidence(graph).T.astype(float)
    solution, *_ = np.linalg.lstsq(incidence_t, spec.z_star, rcond=None)
    residual = float(np.linalg.norm(incidence_t @ solution - spec.z_star))
    tolerance = CONSISTENCY_RTOL * (1.0 + float(np.linalg.norm(spec.z_star)))

    if residual > tolerance:
        logger.debug("Formação inconsistente: resíduo %.3e > %.3e", residual, tolerance)
        return ConsistencyResult(consistent=False, witness=None, residual=residual)

    return ConsistencyResult(consistent=True, witness=solution.reshape(-1), residual=residual)
