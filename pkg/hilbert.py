"""
Tensor-product Hilbert spaces of multi-level sites (atoms) and the
embedding of single-site and two-site operators into the full space.

Basis ordering is lexicographic with the leftmost site most significant,
so |r0> on two {0,1,r} atoms is index 2*3 + 0 = 6. Sites are addressed
0-based. Labels may be passed as any sequence of level names; a plain
string such as "r00" works whenever every level name is one character.
"""
import logging
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

import settings
from errors import DimensionError

logger = logging.getLogger(__name__)

# Dense complex square matrix on a ProductBasis.
ComplexOperator = np.ndarray

Labels = Union[str, Sequence[str]]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


# =========================
# Types
# =========================
@dataclass(frozen=True)
class LevelScheme:
    labels: Tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        if not labels:
            raise DimensionError("A site needs at least one level.")
        if len(set(labels)) != len(labels):
            raise DimensionError(f"Level labels must be unique within a site, got {labels}.")
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise DimensionError(f"Unknown level {label!r}; this site has {self.labels}.")


@dataclass(frozen=True)
class ProductBasis:
    sites: Tuple[LevelScheme, ...]
    dim: int = field(init=False)

    def __post_init__(self):
        sites = tuple(s if isinstance(s, LevelScheme) else LevelScheme(tuple(s)) for s in self.sites)
        if not sites:
            raise DimensionError("A product basis needs at least one site.")
        dim = int(np.prod([s.size for s in sites]))
        cap = settings.max_dim()
        if dim > cap:
            raise DimensionError(f"Basis dimension {dim} exceeds the configured cap {cap} (URP_MAX_DIM).")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "dim", dim)

    @classmethod
    def uniform(cls, n_sites: int, labels: Sequence[str]) -> "ProductBasis":
        return cls(tuple(LevelScheme(tuple(labels)) for _ in range(n_sites)))

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(s.size for s in self.sites)


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(np.asarray(self.amplitudes).ravel())
        if not np.all(np.isfinite(amps)):
            raise DimensionError("State amplitudes must be finite.")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-12:
            raise DimensionError(f"PureState must be normalized, got norm {norm:.15f}.")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        rho = _frozen(self.entries)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise DimensionError(f"Density matrix must be square, got shape {rho.shape}.")
        if not np.all(np.isfinite(rho)):
            raise DimensionError("Density matrix entries must be finite.")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise DimensionError("Density matrix is not Hermitian.")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-10:
            raise DimensionError(f"Density matrix trace is {tr:.12f}, expected 1.")
        lowest = np.linalg.eigvalsh(rho)[0]
        if lowest < -1e-8:
            raise DimensionError(f"Density matrix has negative eigenvalue {lowest:.3e}.")
        object.__setattr__(self, "entries", rho)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


# =========================
# Index <-> labels
# =========================
def basis_index(basis: ProductBasis, labels: Labels) -> int:
    labels = list(labels)
    if len(labels) != basis.n_sites:
        raise DimensionError(f"Expected {basis.n_sites} labels, got {len(labels)}: {labels}.")
    index = 0
    for site, label in zip(basis.sites, labels):
        index = index * site.size + site.index(label)
    return index


def labels_of(basis: ProductBasis, index: int) -> Tuple[str, ...]:
    if not 0 <= index < basis.dim:
        raise DimensionError(f"Index {index} out of range [0, {basis.dim}).")
    digits = np.unravel_index(index, basis.shape)
    return tuple(site.labels[d] for site, d in zip(basis.sites, digits))


def ket(basis: ProductBasis, labels: Labels) -> PureState:
    amps = np.zeros(basis.dim, dtype=complex)
    amps[basis_index(basis, labels)] = 1.0
    return PureState(amps)


def superpose(basis: ProductBasis, amplitudes: Mapping[str, complex]) -> PureState:
    """Normalized superposition of basis kets, e.g. {"000": 1, "111": 1j}."""
    amps = np.zeros(basis.dim, dtype=complex)
    for labels, a in amplitudes.items():
        amps[basis_index(basis, labels)] += a
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise DimensionError("Superposition has zero norm.")
    return PureState(amps / norm)


def mixture(basis: ProductBasis, weights: Mapping[str, float]) -> DensityMatrix:
    """Diagonal mixture of basis kets, e.g. {"11": 0.2, "00": 0.3, ...}."""
    rho = np.zeros((basis.dim, basis.dim), dtype=complex)
    for labels, w in weights.items():
        i = basis_index(basis, labels)
        rho[i, i] += w
    return DensityMatrix(rho)


def to_density(psi: PureState) -> DensityMatrix:
    return DensityMatrix(projector(psi))


# =========================
# Operators
# =========================
def dagger(a: ComplexOperator) -> ComplexOperator:
    return np.asarray(a).conj().T


def projector(psi: Union[PureState, np.ndarray]) -> ComplexOperator:
    v = psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi, dtype=complex)
    return np.outer(v, v.conj())


def kron(a: ComplexOperator, b: ComplexOperator) -> ComplexOperator:
    a = np.asarray(a)
    b = np.asarray(b)
    dim = a.shape[0] * b.shape[0]
    cap = settings.max_dim()
    if dim > cap:
        raise DimensionError(f"kron dimension {dim} exceeds the configured cap {cap} (URP_MAX_DIM).")
    return np.kron(a, b)


def _local(site: LevelScheme, bra_level: str, ket_level: str) -> np.ndarray:
    m = np.zeros((site.size, site.size), dtype=complex)
    m[site.index(bra_level), site.index(ket_level)] = 1.0
    return m


def _check_site(basis: ProductBasis, site: int) -> None:
    if not 0 <= site < basis.n_sites:
        raise DimensionError(f"Site {site} out of range [0, {basis.n_sites}).")


def site_operator(basis: ProductBasis, site: int, bra_level: str, ket_level: str) -> ComplexOperator:
    """|bra_level><ket_level| on one site, identity on all the others."""
    _check_site(basis, site)
    mats = [
        _local(s, bra_level, ket_level) if k == site else np.eye(s.size, dtype=complex)
        for k, s in enumerate(basis.sites)
    ]
    return reduce(kron, mats)


def pair_projector(basis: ProductBasis, site_i: int, level_a: str, site_j: int, level_b: str) -> ComplexOperator:
    _check_site(basis, site_i)
    _check_site(basis, site_j)
    if site_i == site_j:
        raise DimensionError(f"Pair projector needs two distinct sites, got {site_i} twice.")
    return site_operator(basis, site_i, level_a, level_a) @ site_operator(basis, site_j, level_b, level_b)


def sum_over_sites(basis: ProductBasis, bra_level: str, ket_level: str, signs: Iterable[float] = None) -> ComplexOperator:
    """Sum_i s_i |bra><ket|_i with optional per-site signs/weights."""
    signs = list(signs) if signs is not None else [1.0] * basis.n_sites
    return sum(s * site_operator(basis, i, bra_level, ket_level) for i, s in enumerate(signs))


def pair_sum(basis: ProductBasis, level_a: str, level_b: str) -> ComplexOperator:
    """Sum over pairs j > i of the projector |ab>_ij<ab|."""
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    for i in range(basis.n_sites):
        for j in range(i + 1, basis.n_sites):
            out += pair_projector(basis, i, level_a, j, level_b)
    return out


def transition(basis: ProductBasis, bra: Labels, ket_labels: Labels) -> ComplexOperator:
    """Composite-ket operator |bra><ket| on the full space, e.g. ("r0", "10")."""
    op = np.zeros((basis.dim, basis.dim), dtype=complex)
    op[basis_index(basis, bra), basis_index(basis, ket_labels)] = 1.0
    return op


# =========================
# Subspaces
# =========================
def reachable_indices(operators: Iterable[ComplexOperator], seeds: Iterable[int], tol: float = 1e-14) -> List[int]:
    """
    Basis indices reachable from the seed states when following the nonzero
    pattern of the operators (an entry op[a, b] is an edge b -> a).
    """
    operators = [np.asarray(op) for op in operators]
    if not operators:
        return sorted(set(seeds))
    dim = operators[0].shape[0]
    pattern = np.zeros((dim, dim), dtype=bool)
    for op in operators:
        if op.shape != (dim, dim):
            raise DimensionError(f"Operator shape {op.shape} does not match {(dim, dim)}.")
        pattern |= np.abs(op.T) > tol
    graph = csr_matrix(pattern.astype(float))

    found = set()
    for s in seeds:
        if s in found:
            continue
        order = breadth_first_order(graph, int(s), directed=True, return_predecessors=False)
        found.update(int(i) for i in order)
    logger.debug("reachable subspace: %d of %d states", len(found), dim)
    return sorted(found)


def compress(op: ComplexOperator, indices: Sequence[int]) -> ComplexOperator:
    idx = np.asarray(indices, dtype=int)
    return np.asarray(op)[np.ix_(idx, idx)]


def ground_indices(basis: ProductBasis, ground_levels: Sequence[str]) -> List[int]:
    """Indices of all basis states in which every site sits in one of ground_levels."""
    out = []
    for i in range(basis.dim):
        if all(label in ground_levels for label in labels_of(basis, i)):
            out.append(i)
    return out


def inner(a: PureState, b: PureState) -> complex:
    """<a|b>."""
    if a.dim != b.dim:
        raise DimensionError(f"State dimensions differ: {a.dim} vs {b.dim}.")
    return complex(np.vdot(a.amplitudes, b.amplitudes))
