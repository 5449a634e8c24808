"""Tensor-factor linear algebra on small complex Hilbert spaces.

Operators are plain ``numpy`` arrays. States carry an explicit
:class:`FactoredSpace` so that partial traces and bipartite cuts are
addressed by factor label rather than by axis position.

Flattening convention: amplitudes are indexed mixed-radix over the factors
in ``FactoredSpace`` order, first factor varying slowest (C order).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, EmptySupportError, LabelError, ValidationError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
NORM_TOL = 1e-12
ORTHONORMAL_TOL = 1e-10
EIG_HERMITIAN_TOL = 1e-8

# eigenvalues at or below this (after clipping negatives) contribute 0 to S
ENTROPY_CLIP = 1e-12
SUPPORT_TOL = 1e-10

LN2 = math.log(2.0)


@dataclass(frozen=True)
class FactoredSpace:
    """Ordered list of labelled tensor factors."""

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        factors = tuple((str(lab), int(d)) for lab, d in self.factors)
        object.__setattr__(self, "factors", factors)
        if not factors:
            raise ValidationError("a space needs at least one factor", "factors")
        labels = [lab for lab, _ in factors]
        if len(set(labels)) != len(labels):
            raise LabelError(f"duplicate factor labels in {labels}")
        if any(d < 1 for _, d in factors):
            raise DimensionError(f"factor dimensions must be >= 1, got {factors}")

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> "FactoredSpace":
        return cls(tuple(pairs))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"unknown factor label {label!r}; space has {self.labels}") from None

    def dim_of(self, labels: Iterable[str]) -> int:
        return math.prod(self.dims[self.index(lab)] for lab in labels)

    def sub(self, labels: Iterable[str]) -> "FactoredSpace":
        """Subspace of the listed factors, kept in this space's order."""
        wanted = set(labels)
        for lab in wanted:
            self.index(lab)
        return FactoredSpace(tuple(f for f in self.factors if f[0] in wanted))

    def reorder(self, new_order: Sequence[str]) -> "FactoredSpace":
        return FactoredSpace(tuple(self.factors[self.index(lab)] for lab in new_order))

    def __add__(self, other: "FactoredSpace") -> "FactoredSpace":
        return FactoredSpace(self.factors + other.factors)


@dataclass(frozen=True)
class BipartiteCut:
    """Partition of a space's factor labels into two nonempty sides."""

    side_a: tuple[str, ...]
    side_b: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "side_a", tuple(self.side_a))
        object.__setattr__(self, "side_b", tuple(self.side_b))
        if not self.side_a or not self.side_b:
            raise LabelError("both sides of a cut must be nonempty")
        if set(self.side_a) & set(self.side_b):
            raise LabelError(f"cut sides overlap: {self.side_a} | {self.side_b}")

    @classmethod
    def parse(cls, text: str) -> "BipartiteCut":
        """Parse ``"A,A':B,B'"`` into a cut."""
        try:
            left, right = text.split(":")
        except ValueError:
            raise LabelError(f"cut must look like 'A1,A2:B1,B2', got {text!r}") from None
        return cls(tuple(s for s in left.split(",") if s), tuple(s for s in right.split(",") if s))

    @classmethod
    def first_factor(cls, space: FactoredSpace) -> "BipartiteCut":
        """The cut separating the first factor from the rest."""
        return cls(space.labels[:1], space.labels[1:])

    def check(self, space: FactoredSpace) -> None:
        for lab in self.side_a + self.side_b:
            space.index(lab)
        if set(self.side_a) | set(self.side_b) != set(space.labels):
            raise LabelError(
                f"cut {self.side_a}|{self.side_b} does not cover factors {space.labels}")

    def __str__(self):
        return ",".join(self.side_a) + ":" + ",".join(self.side_b)


def _as_complex(a) -> np.ndarray:
    return np.array(a, dtype=np.complex128)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Positive semidefinite unit-trace operator on a factored space."""

    space: FactoredSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = _as_complex(self.matrix)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        n = self.space.dim
        if m.shape != (n, n):
            raise DimensionError(f"density matrix shape {m.shape} does not match space dim {n}")
        herm = np.max(np.abs(m - m.conj().T))
        if herm > HERMITIAN_TOL:
            raise ValidationError(f"density matrix not Hermitian (residual {herm:.3e})", "hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"density matrix trace {tr.real:.12g} != 1", "unit_trace")
        lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
        if lo < -PSD_TOL:
            raise ValidationError(f"density matrix not PSD (min eigenvalue {lo:.3e})", "psd")

    @classmethod
    def from_pure(cls, psi: "PureState") -> "DensityMatrix":
        v = psi.vector
        return cls(psi.space, np.outer(v, v.conj()))

    @classmethod
    def from_subspace(cls, s: "Subspace") -> "DensityMatrix":
        """Normalized projector onto ``s``."""
        return cls(s.space, s.projector() / s.k)

    @classmethod
    def maximally_mixed(cls, space: FactoredSpace) -> "DensityMatrix":
        return cls(space, np.eye(space.dim) / space.dim)

    @property
    def dim(self) -> int:
        return self.space.dim


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit vector on a factored space."""

    space: FactoredSpace
    vector: np.ndarray

    def __post_init__(self):
        v = _as_complex(self.vector).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)
        if v.shape != (self.space.dim,):
            raise DimensionError(f"vector length {v.size} does not match space dim {self.space.dim}")
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValidationError(f"state norm {nrm:.15g} != 1", "norm")

    @classmethod
    def normalized(cls, space: FactoredSpace, vector) -> "PureState":
        v = _as_complex(vector).reshape(-1)
        return cls(space, v / np.linalg.norm(v))

    @classmethod
    def basis(cls, space: FactoredSpace, *digits: int) -> "PureState":
        """Computational basis state ``|digits>``."""
        v = np.zeros(space.dim, dtype=np.complex128)
        v[np.ravel_multi_index(digits, space.dims)] = 1.0
        return cls(space, v)

    def projector(self) -> DensityMatrix:
        return DensityMatrix.from_pure(self)


@dataclass(frozen=True, eq=False)
class Subspace:
    """Subspace of a factored space given by orthonormal basis columns."""

    space: FactoredSpace
    basis: np.ndarray

    def __post_init__(self):
        b = _as_complex(self.basis)
        if b.ndim == 1:
            b = b[:, None]
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)
        d, k = b.shape
        if d != self.space.dim:
            raise DimensionError(f"basis has {d} rows, space dim is {self.space.dim}")
        if not 1 <= k <= d:
            raise DimensionError(f"subspace dimension {k} outside [1, {d}]")
        err = np.max(np.abs(b.conj().T @ b - np.eye(k)))
        if err > ORTHONORMAL_TOL:
            raise ValidationError(f"basis columns not orthonormal (residual {err:.3e})", "orthonormal")

    @classmethod
    def span(cls, space: FactoredSpace, vectors) -> "Subspace":
        """Orthonormalize ``vectors`` (columns) into a subspace."""
        a = _as_complex(vectors)
        if a.ndim == 1:
            a = a[:, None]
        u, s, _ = np.linalg.svd(a, full_matrices=False)
        rank = int(np.sum(s > SUPPORT_TOL * max(s[0], 1e-300)))
        if rank == 0:
            raise EmptySupportError("cannot span a subspace from zero vectors")
        return cls(space, u[:, :rank])

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def state(self, coords) -> PureState:
        c = _as_complex(coords)
        return PureState.normalized(self.space, self.basis @ c)

    def contains(self, other: "Subspace", tol: float = 1e-8) -> bool:
        """True when every basis vector of ``other`` lies in this subspace."""
        resid = other.basis - self.basis @ (self.basis.conj().T @ other.basis)
        return bool(np.max(np.abs(resid), initial=0.0) <= tol)


def kron(a, b) -> np.ndarray:
    """Kronecker product; the left operand indexes the slower factor."""
    return np.kron(_as_complex(a), _as_complex(b))


def _keep_labels(space: FactoredSpace, keep) -> list[str]:
    if isinstance(keep, str):
        keep = (keep,)
    keep = list(keep)
    for lab in keep:
        space.index(lab)
    if not keep:
        raise LabelError("must keep at least one factor")
    return [lab for lab in space.labels if lab in set(keep)]


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduce ``rho`` onto the factors named in ``keep``."""
    space = rho.space
    kept = _keep_labels(space, keep)
    k_ax = [space.index(lab) for lab in kept]
    t_ax = [i for i in range(len(space.dims)) if i not in k_ax]
    n = len(space.dims)
    dk = space.dim_of(kept)
    dt = space.dim // dk
    t = rho.matrix.reshape(space.dims + space.dims)
    t = t.transpose(k_ax + t_ax + [n + i for i in k_ax] + [n + i for i in t_ax])
    red = np.einsum("ajbj->ab", t.reshape(dk, dt, dk, dt))
    return DensityMatrix(space.sub(kept), 0.5 * (red + red.conj().T))


def bipartite_matrix(psi: PureState, side_a) -> np.ndarray:
    """Coefficient matrix of ``psi`` with rows on ``side_a`` and columns on the rest."""
    space = psi.space
    kept = _keep_labels(space, side_a)
    k_ax = [space.index(lab) for lab in kept]
    t_ax = [i for i in range(len(space.dims)) if i not in k_ax]
    dk = space.dim_of(kept)
    t = psi.vector.reshape(space.dims).transpose(k_ax + t_ax)
    return t.reshape(dk, space.dim // dk)


def reduced_state(psi: PureState, keep) -> DensityMatrix:
    """``tr`` over the complement of ``keep`` of ``|psi><psi|``."""
    m = bipartite_matrix(psi, keep)
    red = m @ m.conj().T
    return DensityMatrix(psi.space.sub(_keep_labels(psi.space, keep)), 0.5 * (red + red.conj().T))


def hermitian_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvector matrix of a Hermitian matrix."""
    a = _as_complex(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    resid = np.max(np.abs(a - a.conj().T), initial=0.0)
    if resid > EIG_HERMITIAN_TOL:
        raise ValidationError(f"matrix not Hermitian (residual {resid:.3e})", "hermitian")
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    return w, v


def entropy_of_spectrum(probs) -> float:
    """``-sum p log2 p`` with tiny and negative entries treated as exact zeros."""
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    p = p[p > ENTROPY_CLIP]
    return float(max(-np.sum(p * np.log2(p)), 0.0)) + 0.0


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Von Neumann entropy in bits."""
    return entropy_of_spectrum(np.linalg.eigvalsh(rho.matrix))


def entanglement_entropy(psi: PureState, cut: BipartiteCut) -> float:
    """Entropy of entanglement of ``psi`` across ``cut``, in bits."""
    cut.check(psi.space)
    s = np.linalg.svd(bipartite_matrix(psi, cut.side_a), compute_uv=False)
    return entropy_of_spectrum(s ** 2)


def bits_to_nats(x):
    return np.asarray(x) * LN2 if np.ndim(x) else float(x) * LN2


def nats_to_bits(x):
    return np.asarray(x) / LN2 if np.ndim(x) else float(x) / LN2


def support(rho: DensityMatrix, tol: float = SUPPORT_TOL) -> Subspace:
    """Span of eigenvectors with eigenvalue above ``tol * lambda_max``."""
    w, v = hermitian_eig(rho.matrix)
    lam_max = w[-1]
    if lam_max <= 0.0:
        raise EmptySupportError("operator has no positive eigenvalue")
    keep = w > tol * lam_max
    # descending eigenvalue order keeps the dominant direction first
    return Subspace(rho.space, v[:, keep][:, ::-1])


def project_onto(rho: DensityMatrix, s: Subspace) -> DensityMatrix:
    """``P rho P / tr(P rho P)`` for the projector onto ``s``."""
    p = s.projector()
    m = p @ rho.matrix @ p
    return DensityMatrix(rho.space, m / np.trace(m).real)


def _perm_axes(space: FactoredSpace, new_order: Sequence[str]) -> list[int]:
    new_order = list(new_order)
    if sorted(new_order) != sorted(space.labels) or len(new_order) != len(space.labels):
        raise LabelError(f"{new_order} is not a permutation of {list(space.labels)}")
    return [space.index(lab) for lab in new_order]


def regroup(x, new_order: Sequence[str]):
    """Permute tensor factors of a state, density matrix or subspace."""
    axes = _perm_axes(x.space, new_order)
    space = x.space.reorder(new_order)
    dims = x.space.dims
    if isinstance(x, PureState):
        return PureState(space, x.vector.reshape(dims).transpose(axes).reshape(-1))
    if isinstance(x, DensityMatrix):
        n = len(dims)
        t = x.matrix.reshape(dims + dims).transpose(axes + [n + a for a in axes])
        return DensityMatrix(space, t.reshape(space.dim, space.dim))
    if isinstance(x, Subspace):
        t = x.basis.reshape(dims + (x.k,)).transpose(axes + [len(dims)])
        return Subspace(space, t.reshape(space.dim, x.k))
    raise TypeError(f"cannot regroup {type(x).__name__}")


def tensor(x, y):
    """Tensor product of two states/density matrices/subspaces of the same kind."""
    space = x.space + y.space
    if isinstance(x, PureState) and isinstance(y, PureState):
        return PureState(space, np.kron(x.vector, y.vector))
    if isinstance(x, DensityMatrix) and isinstance(y, DensityMatrix):
        return DensityMatrix(space, np.kron(x.matrix, y.matrix))
    if isinstance(x, Subspace) and isinstance(y, Subspace):
        return Subspace(space, np.kron(x.basis, y.basis))
    raise TypeError(f"cannot tensor {type(x).__name__} with {type(y).__name__}")


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Half the trace norm of ``a - b``."""
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a.matrix - b.matrix))))


def mix(p: float, a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    if a.space != b.space:
        raise LabelError("cannot mix states on different spaces")
    return DensityMatrix(a.space, p * a.matrix + (1.0 - p) * b.matrix)


def relabel(x, mapping):
    """Rename factors; ``mapping`` is a dict or a suffix appended to every label."""
    if isinstance(mapping, str):
        mapping = {lab: lab + mapping for lab in x.space.labels}
    space = FactoredSpace(tuple((mapping.get(lab, lab), d) for lab, d in x.space.factors))
    if isinstance(x, PureState):
        return PureState(space, x.vector)
    if isinstance(x, DensityMatrix):
        return DensityMatrix(space, x.matrix)
    if isinstance(x, Subspace):
        return Subspace(space, x.basis)
    raise TypeError(f"cannot relabel {type(x).__name__}")


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Weighted pure-state decomposition ``sum_i p_i |pi_i><pi_i|``."""

    members: tuple[tuple[float, PureState], ...]

    def __post_init__(self):
        members = tuple((float(p), s) for p, s in self.members)
        object.__setattr__(self, "members", members)
        if not members:
            raise ValidationError("an ensemble needs at least one member", "members")
        if any(p < 0.0 or p > 1.0 + 1e-12 for p, _ in members):
            raise ValidationError("ensemble weights must lie in [0, 1]", "weights")
        total = sum(p for p, _ in members)
        if abs(total - 1.0) > 1e-10:
            raise ValidationError(f"ensemble weights sum to {total:.12g}", "weights")

    @property
    def space(self) -> FactoredSpace:
        return self.members[0][1].space

    def density(self) -> np.ndarray:
        return sum(p * np.outer(s.vector, s.vector.conj()) for p, s in self.members)

    def average_entanglement(self, cut: BipartiteCut) -> float:
        return float(sum(p * entanglement_entropy(s, cut) for p, s in self.members))
