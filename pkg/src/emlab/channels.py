"""CPTP maps in Kraus and Stinespring form.

A channel ``K -> H_out`` is stored as its Kraus operators. Its Stinespring
isometry ``V = sum_k |k>_env (x) A_k`` embeds ``K`` into ``env (x) out``; the
image of ``V`` is the dual subspace, and pure inputs ``phi`` map to pure
states ``V phi`` whose entanglement across ``env|out`` equals the output
entropy ``S(Lambda(phi))``.

Convention: the channel output lives on the ``out`` factor and the ``env``
factor is traced. Swapping the roles changes nothing entropic, since both
reductions of a pure state share their nonzero spectrum.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, LabelError, ValidationError
from .sampling import haar_isometry
from .tensor_core import DensityMatrix, FactoredSpace, Subspace, regroup

COMPLETENESS_TOL = 1e-10
ISOMETRY_TOL = 1e-10
KRAUS_TRIM = 1e-12

FAMILIES = ("identity", "depolarizing", "werner_holevo", "completely_depolarizing",
            "random_isometry")


def _trim(ops):
    kept = [a for a in ops if np.linalg.norm(a) > KRAUS_TRIM]
    return kept or list(ops[:1])


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Trace-preserving completely positive map given by Kraus operators."""

    in_dim: int
    out_dim: int
    kraus_ops: tuple

    def __post_init__(self):
        ops = tuple(np.array(a, dtype=np.complex128) for a in self.kraus_ops)
        if not ops:
            raise ValidationError("a channel needs at least one Kraus operator", "kraus_ops")
        for a in ops:
            if a.shape != (self.out_dim, self.in_dim):
                raise DimensionError(
                    f"Kraus operator shape {a.shape} != ({self.out_dim}, {self.in_dim})")
            a.setflags(write=False)
        object.__setattr__(self, "kraus_ops", ops)
        resid = self.completeness_residual()
        if resid > COMPLETENESS_TOL:
            raise ValidationError(
                f"Kraus operators are not trace preserving: max|sum A^dag A - I| = {resid:.3e}",
                "completeness")

    @classmethod
    def from_ops(cls, ops: Sequence) -> "KrausChannel":
        ops = [np.atleast_2d(np.asarray(a, dtype=np.complex128)) for a in ops]
        out_dim, in_dim = ops[0].shape
        return cls(in_dim, out_dim, tuple(_trim(ops)))

    @property
    def n_kraus(self) -> int:
        return len(self.kraus_ops)

    def completeness_residual(self) -> float:
        acc = sum(a.conj().T @ a for a in self.kraus_ops)
        return float(np.max(np.abs(acc - np.eye(self.in_dim))))

    def stacked(self) -> np.ndarray:
        """Kraus operators as an array of shape ``(n_kraus, out_dim, in_dim)``."""
        return np.stack(self.kraus_ops)

    def __call__(self, m: np.ndarray) -> np.ndarray:
        """Apply to a raw operator."""
        a = self.stacked()
        return np.einsum("kij,jl,kml->im", a, m, a.conj(), optimize=True)


def apply(ch: KrausChannel, rho: DensityMatrix, out_space: FactoredSpace | None = None) -> DensityMatrix:
    """``sum_k A_k rho A_k^dag``.

    The output keeps ``rho.space`` when the channel preserves dimension,
    otherwise it lives on a single factor labelled ``out``.
    """
    if rho.dim != ch.in_dim:
        raise DimensionError(f"channel expects input dim {ch.in_dim}, got {rho.dim}")
    if out_space is None:
        out_space = rho.space if ch.out_dim == ch.in_dim else FactoredSpace.of(("out", ch.out_dim))
    out = ch(rho.matrix)
    return DensityMatrix(out_space, 0.5 * (out + out.conj().T))


@dataclass(frozen=True, eq=False)
class StinespringIsometry:
    """Isometry ``K -> env (x) out`` on a two-factor space; ``env_label`` is traced."""

    space: FactoredSpace
    isometry: np.ndarray
    env_label: str

    def __post_init__(self):
        v = np.array(self.isometry, dtype=np.complex128)
        v.setflags(write=False)
        object.__setattr__(self, "isometry", v)
        if len(self.space.factors) != 2:
            raise DimensionError("a Stinespring space has exactly two factors")
        self.space.index(self.env_label)
        if v.ndim != 2 or v.shape[0] != self.space.dim:
            raise DimensionError(f"isometry shape {v.shape} does not match space dim {self.space.dim}")
        err = np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1])))
        if err > ISOMETRY_TOL:
            raise ValidationError(f"V^dag V != I (residual {err:.3e})", "isometry")

    @property
    def in_dim(self) -> int:
        return self.isometry.shape[1]

    @property
    def out_label(self) -> str:
        return next(lab for lab in self.space.labels if lab != self.env_label)

    @property
    def env_dim(self) -> int:
        return self.space.dim_of([self.env_label])

    @property
    def out_dim(self) -> int:
        return self.space.dim_of([self.out_label])

    def env_first(self) -> np.ndarray:
        """Isometry as an ``(env_dim, out_dim, in_dim)`` array."""
        t = self.isometry.reshape(self.space.dims + (self.in_dim,))
        if self.space.labels[0] != self.env_label:
            t = t.transpose(1, 0, 2)
        return t

    def apply(self, m: np.ndarray) -> np.ndarray:
        """``tr_env (V m V^dag)`` for a raw input operator."""
        t = self.env_first()
        return np.einsum("kij,jl,kml->im", t, m, t.conj(), optimize=True)


def stinespring(ch: KrausChannel, env_label: str = "env", out_label: str = "out") -> StinespringIsometry:
    """Dilation ``V = sum_k |k> (x) A_k`` with the environment as first factor."""
    space = FactoredSpace.of((env_label, ch.n_kraus), (out_label, ch.out_dim))
    v = ch.stacked().reshape(ch.n_kraus * ch.out_dim, ch.in_dim)
    return StinespringIsometry(space, v, env_label)


def channel_from_isometry(v: StinespringIsometry) -> KrausChannel:
    """Kraus operators ``A_k = (<k|_env (x) I) V``, dropping numerically zero ones."""
    t = v.env_first()
    return KrausChannel.from_ops(list(t))


def dual_subspace(v: StinespringIsometry) -> Subspace:
    """Image of the isometry inside ``env (x) out``."""
    return Subspace(v.space, v.isometry)


def channel_from_subspace(s: Subspace, traced_label: str) -> KrausChannel:
    """Channel whose Stinespring image is ``s`` with ``traced_label`` as environment."""
    if len(s.space.factors) != 2:
        raise DimensionError("channel_from_subspace needs a two-factor space")
    if traced_label not in s.space.labels:
        raise LabelError(f"traced label {traced_label!r} not in {s.space.labels}")
    return channel_from_isometry(StinespringIsometry(s.space, s.basis, traced_label))


def tensor_channels(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    """``a (x) b`` with Kraus set ``{A_i (x) B_j}`` (``i`` slow)."""
    ops = [np.kron(x, y) for x in a.kraus_ops for y in b.kraus_ops]
    return KrausChannel(a.in_dim * b.in_dim, a.out_dim * b.out_dim, tuple(ops))


# ---------------------------------------------------------------- families

def identity_channel(d: int) -> KrausChannel:
    return KrausChannel(d, d, (np.eye(d),))


def unitary_channel(u) -> KrausChannel:
    u = np.asarray(u, dtype=np.complex128)
    return KrausChannel(u.shape[1], u.shape[0], (u,))


def weyl_operators(d: int) -> list[np.ndarray]:
    """``X^a Z^b`` for ``a, b in range(d)``, ``(0, 0)`` first."""
    x = np.roll(np.eye(d), 1, axis=0)
    z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b)
            for a in range(d) for b in range(d)]


def depolarizing(d: int, p: float) -> KrausChannel:
    """``rho -> (1 - p) rho + p tr(rho) I / d``."""
    if d < 2:
        raise ValidationError(f"depolarizing needs d >= 2, got {d}", "params")
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"depolarizing needs 0 <= p <= 1, got {p}", "params")
    if d == 2:
        paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]),
                  np.diag([1.0, -1.0])]
    else:
        paulis = weyl_operators(d)
    w0 = np.sqrt(max(1.0 - p * (d * d - 1) / (d * d), 0.0))
    w = np.sqrt(p) / d
    ops = [w0 * paulis[0]] + [w * u for u in paulis[1:]]
    return KrausChannel(d, d, tuple(_trim(ops)))


def completely_depolarizing(d: int) -> KrausChannel:
    ops = []
    for i in range(d):
        for j in range(d):
            a = np.zeros((d, d))
            a[i, j] = 1.0 / np.sqrt(d)
            ops.append(a)
    return KrausChannel(d, d, tuple(ops))


def werner_holevo(d: int) -> KrausChannel:
    """``rho -> (I tr(rho) - rho^T) / (d - 1)``.

    Kraus operators ``(|i><j| - |j><i|) / sqrt(d - 1)`` for ``i < j``, so the
    dilation image is an antisymmetric subspace of ``env (x) out``.
    """
    if d < 2:
        raise ValidationError(f"werner_holevo needs d >= 2, got {d}", "params")
    ops = []
    for i in range(d):
        for j in range(i + 1, d):
            a = np.zeros((d, d))
            a[i, j] = 1.0
            a[j, i] = -1.0
            ops.append(a / np.sqrt(d - 1))
    return KrausChannel(d, d, tuple(ops))


def random_isometry_channel(in_dim: int, env_dim: int, out_dim: int, seed) -> KrausChannel:
    """Channel dilated by a Haar-random isometry ``C^in -> C^env (x) C^out``."""
    if env_dim * out_dim < in_dim:
        raise ValidationError(
            f"need env_dim * out_dim >= in_dim, got {env_dim}*{out_dim} < {in_dim}", "params")
    space = FactoredSpace.of(("env", env_dim), ("out", out_dim))
    v = haar_isometry(env_dim * out_dim, in_dim, seed)
    return channel_from_isometry(StinespringIsometry(space, v, "env"))


@dataclass(frozen=True)
class ChannelFamilySpec:
    family: str
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown channel family {self.family!r}; known: {FAMILIES}", "family")


def make_family(spec: ChannelFamilySpec) -> KrausChannel:
    p = spec.params
    try:
        if spec.family == "identity":
            return identity_channel(int(p.get("d", 2)))
        if spec.family == "depolarizing":
            return depolarizing(int(p.get("d", 2)), float(p["p"]))
        if spec.family == "completely_depolarizing":
            return completely_depolarizing(int(p.get("d", 2)))
        if spec.family == "werner_holevo":
            return werner_holevo(int(p.get("d", 3)))
        if spec.family == "random_isometry":
            seed = 0 if spec.seed is None else spec.seed
            return random_isometry_channel(int(p["in"]), int(p["env"]), int(p["out"]), seed)
    except KeyError as exc:
        raise ValidationError(f"family {spec.family!r} missing parameter {exc}", "params") from None
    raise AssertionError(spec.family)


def dilation_roundtrip_error(ch: KrausChannel, v: StinespringIsometry) -> float:
    """Max entrywise gap between ``apply`` and ``tr_env V rho V^dag`` on the matrix-unit basis."""
    err = 0.0
    for i in range(ch.in_dim):
        for j in range(ch.in_dim):
            e = np.zeros((ch.in_dim, ch.in_dim), dtype=np.complex128)
            e[i, j] = 1.0
            err = max(err, float(np.max(np.abs(ch(e) - v.apply(e)))))
    return err


def regroup_dilation_space(v: StinespringIsometry, order) -> StinespringIsometry:
    """Same isometry with its two factors listed in ``order``."""
    s = regroup(dual_subspace(v), order)
    return StinespringIsometry(s.space, s.basis, v.env_label)
