"""Exossistemas neutramente estáveis (Φ anti-simétrica): velocidade de referência e distúrbios."""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag, expm

from app.core.errors import FormsimError

logger = logging.getLogger(__name__)

SKEW_TOL = 1e-12
OBSERVABILITY_RTOL = 1e-10
# Precisão esperada do fallback expm (scaling-and-squaring)
EXPM_TOL = 1e-10


class ExosystemError(FormsimError):
    """Exceção lançada para exossistemas mal formados (frequência nula, ganho nulo, dimensões)."""

    pass


@dataclass(frozen=True)
class RotationBlocks:
    """Estrutura de blocos de Φ usada pela solução fechada: canais nulos e pares (a, b, ω)."""

    zero_index: Tuple[int, ...]
    first: Tuple[int, ...]
    second: Tuple[int, ...]
    omega: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class ExosystemSpec:
    """
    Exossistema ẇ = Φ·w com saída Γ·w.

    `kind` e `source` guardam a descrição original (constant, harmonic, mixed, matrix) para
    re-serialização do cenário.
    """

    Phi: np.ndarray
    Gamma: np.ndarray
    w0: np.ndarray
    kind: str = "matrix"
    source: dict = field(default_factory=dict, repr=False)
    blocks: Optional[RotationBlocks] = field(init=False, repr=False, default=None)

    def __post_init__(self):
        Phi = np.atleast_2d(np.asarray(self.Phi, dtype=float))
        Gamma = np.atleast_2d(np.asarray(self.Gamma, dtype=float))
        w0 = np.asarray(self.w0, dtype=float).reshape(-1)
        q = w0.shape[0]
        if Phi.shape != (q, q):
            raise ExosystemError(f"Phi deve ser {q}×{q}, recebido {Phi.shape}")
        if Gamma.shape[1] != q:
            raise ExosystemError(f"Gamma deve ter {q} colunas, recebido {Gamma.shape}")
        for array in (Phi, Gamma, w0):
            array.setflags(write=False)
        object.__setattr__(self, "Phi", Phi)
        object.__setattr__(self, "Gamma", Gamma)
        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "blocks", _detect_blocks(Phi))

    @property
    def q(self) -> int:
        return self.w0.shape[0]

    @property
    def p(self) -> int:
        return self.Gamma.shape[0]

    @property
    def skew(self) -> bool:
        return is_skew(self.Phi)

    @property
    def observable(self) -> bool:
        return is_observable(self.Gamma, self.Phi)


def _detect_blocks(Phi: np.ndarray) -> Optional[RotationBlocks]:
    """Reconhece Φ como soma direta de zeros e blocos [[0, ω], [-ω, 0]] em posições consecutivas."""
    q = Phi.shape[0]
    zero_index, first, second, omega = [], [], [], []
    k = 0
    while k < q:
        if not Phi[k].any() and not Phi[:, k].any():
            zero_index.append(k)
            k += 1
            continue
        if k + 1 >= q:
            return None
        w = Phi[k, k + 1]
        rows = Phi[[k, k + 1]]
        cols = Phi[:, [k, k + 1]]
        if (
            w == 0
            or Phi[k + 1, k] != -w
            or np.count_nonzero(rows) != 2
            or np.count_nonzero(cols) != 2
        ):
            return None
        first.append(k)
        second.append(k + 1)
        omega.append(float(w))
        k += 2
    return RotationBlocks(tuple(zero_index), tuple(first), tuple(second), tuple(omega))


def is_skew(Phi: np.ndarray, tol: float = SKEW_TOL) -> bool:
    Phi = np.atleast_2d(np.asarray(Phi, dtype=float))
    return bool(np.linalg.norm(Phi.T + Phi) <= tol)


def is_observable(Gamma: np.ndarray, Phi: np.ndarray) -> bool:
    """
    Verifica o posto da matriz de observabilidade [Γ; ΓΦ; …; ΓΦ^{q-1}].

    O posto é contado pelos valores singulares acima de 1e-10·σ_max.

    Raises:
        ExosystemError: Se as dimensões de Γ e Φ não são compatíveis
    """
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=float))
    Phi = np.atleast_2d(np.asarray(Phi, dtype=float))
    q = Phi.shape[0]
    if Phi.shape != (q, q) or Gamma.shape[1] != q:
        raise ExosystemError(f"Dimensões incompatíveis: Gamma {Gamma.shape}, Phi {Phi.shape}")

    rows = [Gamma]
    for _ in range(q - 1):
        rows.append(rows[-1] @ Phi)
    singular_values = np.linalg.svd(np.vstack(rows), compute_uv=False)
    if singular_values.size == 0 or singular_values[0] == 0.0:
        return False
    rank = int(np.sum(singular_values > OBSERVABILITY_RTOL * singular_values[0]))
    return rank == q


def make_constant(p: int, value: Sequence[float]) -> ExosystemSpec:
    """Sinal constante: Φ = 0, Γ = I_p, w0 = value."""
    if p < 1:
        raise ExosystemError(f"Dimensão p deve ser positiva (recebido {p})")
    value = np.asarray(value, dtype=float).reshape(-1)
    if value.shape != (p,):
        raise ExosystemError(f"value deve ter comprimento {p}, recebido {value.shape[0]}")
    return ExosystemSpec(
        Phi=np.zeros((p, p)),
        Gamma=np.eye(p),
        w0=value,
        kind="constant",
        source={"kind": "constant", "value": value.tolist()},
    )


def _rotation(omega: float) -> np.ndarray:
    return np.array([[0.0, omega], [-omega, 0.0]])


def make_harmonic(
    frequencies: Sequence[float],
    gain_rows: Sequence[Sequence[float]],
    w0: Optional[Sequence[float]] = None,
) -> ExosystemSpec:
    """
    Sinal harmônico por canal: Φ = blockdiag([[0, ω_ℓ], [-ω_ℓ, 0]]), Γ = blockdiag(linhas 1×2).

    Args:
        frequencies: Uma frequência não nula por canal de saída
        gain_rows: Uma linha de ganho 1×2 não nula por canal
        w0: Estado inicial em R^{2p} (zeros se omitido)

    Raises:
        ExosystemError: Frequência nula, linha de ganho nula ou dimensões inconsistentes
    """
    frequencies = [float(w) for w in frequencies]
    rows = [np.asarray(r, dtype=float).reshape(-1) for r in gain_rows]
    if not frequencies:
        raise ExosystemError("make_harmonic requer pelo menos um canal")
    if len(rows) != len(frequencies):
        raise ExosystemError(
            f"{len(frequencies)} frequências mas {len(rows)} linhas de ganho"
        )
    for channel, (omega, row) in enumerate(zip(frequencies, rows), start=1):
        if omega == 0.0:
            raise ExosystemError(f"Canal {channel}: frequência harmônica deve ser não nula")
        if row.shape != (2,):
            raise ExosystemError(f"Canal {channel}: linha de ganho deve ter 2 entradas")
        if not row.any():
            raise ExosystemError(f"Canal {channel}: linha de ganho nula torna o par não observável")

    q = 2 * len(frequencies)
    w0 = np.zeros(q) if w0 is None else np.asarray(w0, dtype=float).reshape(-1)
    return ExosystemSpec(
        Phi=block_diag(*[_rotation(w) for w in frequencies]),
        Gamma=block_diag(*[r.reshape(1, 2) for r in rows]),
        w0=w0,
        kind="harmonic",
        source={
            "kind": "harmonic",
            "frequencies": frequencies,
            "gain_rows": [r.tolist() for r in rows],
            "w0": w0.tolist(),
        },
    )


def make_mixed(channels: Sequence[dict], w0: Optional[Sequence[float]] = None) -> ExosystemSpec:
    """
    Concatenação bloco-diagonal de canais constante + harmônicos.

    Cada canal é um dict com `constant_gain` (opcional) e `harmonics`, lista de
    {"frequency": ω, "gain": [a, b]}. O canal ℓ contribui com um estado constante (se houver
    ganho) seguido de um bloco de rotação por harmônico, e com a linha [c, a₁, b₁, …] de Γ.

    Raises:
        ExosystemError: Canal vazio, frequência ou ganho nulo, ou canal não observável
    """
    if not channels:
        raise ExosystemError("make_mixed requer pelo menos um canal")

    phi_blocks, gamma_rows = [], []
    for index, channel in enumerate(channels, start=1):
        constant_gain = channel.get("constant_gain")
        harmonics = channel.get("harmonics", [])
        blocks, row = [], []
        if constant_gain is not None:
            if float(constant_gain) == 0.0:
                raise ExosystemError(f"Canal {index}: constant_gain nulo")
            blocks.append(np.zeros((1, 1)))
            row.append(float(constant_gain))
        for harmonic in harmonics:
            omega = float(harmonic["frequency"])
            gain = [float(v) for v in harmonic["gain"]]
            if omega == 0.0:
                raise ExosystemError(f"Canal {index}: frequência harmônica deve ser não nula")
            if len(gain) != 2 or not any(gain):
                raise ExosystemError(f"Canal {index}: ganho harmônico deve ser um par não nulo")
            blocks.append(_rotation(omega))
            row.extend(gain)
        if not blocks:
            raise ExosystemError(f"Canal {index} não declara componentes")

        channel_phi = block_diag(*blocks)
        channel_gamma = np.array([row])
        if not is_observable(channel_gamma, channel_phi):
            raise ExosystemError(
                f"Canal {index}: par (Γ, Φ) não observável (frequências repetidas?)"
            )
        phi_blocks.append(channel_phi)
        gamma_rows.append(channel_gamma)

    Phi = block_diag(*phi_blocks)
    w0 = np.zeros(Phi.shape[0]) if w0 is None else np.asarray(w0, dtype=float).reshape(-1)
    return ExosystemSpec(
        Phi=Phi,
        Gamma=block_diag(*gamma_rows),
        w0=w0,
        kind="mixed",
        source={"kind": "mixed", "channels": [dict(c) for c in channels], "w0": w0.tolist()},
    )


def make_matrix(Phi, Gamma, w0) -> ExosystemSpec:
    """Exossistema declarado por matrizes explícitas (Φ, Γ, w0)."""
    spec = ExosystemSpec(Phi=Phi, Gamma=Gamma, w0=w0, kind="matrix")
    object.__setattr__(
        spec,
        "source",
        {
            "kind": "matrix",
            "Phi": spec.Phi.tolist(),
            "Gamma": spec.Gamma.tolist(),
            "w0": spec.w0.tolist(),
        },
    )
    return spec


def stack_exosystems(specs: Sequence[ExosystemSpec]) -> ExosystemSpec:
    """Empilha exossistemas independentes num único sistema bloco-diagonal."""
    if not specs:
        raise ExosystemError("Nenhum exossistema para empilhar")
    return ExosystemSpec(
        Phi=block_diag(*[s.Phi for s in specs]),
        Gamma=block_diag(*[s.Gamma for s in specs]),
        w0=np.concatenate([s.w0 for s in specs]),
        kind="stacked",
    )


def exo_solution(spec: ExosystemSpec, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Avalia w(t) = e^{Φt}·w0 e a saída Γ·w(t).

    Para Φ formada por zeros e blocos de rotação a solução é fechada (cos/sin); caso
    contrário usa scipy.linalg.expm, com precisão esperada de 1e-10.

    Args:
        spec: Exossistema
        t: Instante (t ≥ 0)

    Returns:
        Tupla (w(t), Γ·w(t))

    Raises:
        ExosystemError: Se t < 0
    """
    if t < 0:
        raise ExosystemError(f"exo_solution requer t ≥ 0 (recebido {t})")

    blocks = spec.blocks
    if blocks is None:
        w = expm(spec.Phi * t) @ spec.w0
    else:
        w = spec.w0.copy()
        if blocks.first:
            a = list(blocks.first)
            b = list(blocks.second)
            angle = np.asarray(blocks.omega) * t
            c, s = np.cos(angle), np.sin(angle)
            a0, b0 = spec.w0[a], spec.w0[b]
            w[a] = c * a0 + s * b0
            w[b] = -s * a0 + c * b0
    return w, spec.Gamma @ w
