"""Fourier analysis on F_p^n and the sorted-spectrum bookkeeping built on it.

Convention: fhat(a) = sum_m f(m) w^(a.m) with w = exp(2*pi*i/p) and a.m the
coordinate dot product mod p.  Inversion is f(m) = F^(-1) sum_a fhat(a) w^(-a.m).
The fast path reshapes to a (p,)*n cube and transforms one axis per coordinate;
a naive O(F^2) evaluator written straight from the definition serves as the
independent oracle.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .field import FieldParams, check_same_params

IMAG_TOLERANCE = 1e-9


@lru_cache(maxsize=64)
def _root_powers(p: int) -> np.ndarray:
    """w^j for j in [0, p), from the exact angle 2*pi/p."""
    out = np.exp(2j * np.pi * np.arange(p) / p)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class DenseFunction:
    """A real-valued function on F_p^n, stored densely by element index."""

    params: FieldParams
    values: np.ndarray

    @classmethod
    def make(cls, params: FieldParams, values, unit_range: bool = False) -> "DenseFunction":
        arr = np.array(values, dtype=np.float64).reshape(-1)
        if arr.shape != (params.F,):
            raise ValueError(f"expected {params.F} values, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("function values must be finite")
        if unit_range:
            if arr.min() < -1e-9 or arr.max() > 1 + 1e-9:
                raise ValueError(
                    f"values outside [0, 1]: min={arr.min()}, max={arr.max()}"
                )
            np.clip(arr, 0.0, 1.0, out=arr)
        arr.setflags(write=False)
        return cls(params, arr)

    @classmethod
    def constant(cls, params: FieldParams, value: float) -> "DenseFunction":
        return cls.make(params, np.full(params.F, float(value)))

    def mean(self) -> float:
        return float(self.values.mean())

    def cube(self) -> np.ndarray:
        """The values reshaped to a (p,)*n cube; axis j holds digit n-1-j."""
        p, n = self.params.p, self.params.n
        return self.values.reshape((p,) * n)

    def translate(self, d: int) -> "DenseFunction":
        """The function m -> f(m + d)."""
        return DenseFunction.make(self.params, translated_values(self.params, self.values, d))

    def to_json_dict(self) -> dict:
        return {"p": self.params.p, "n": self.params.n, "values": self.values.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, data: dict) -> "DenseFunction":
        params = FieldParams(int(data["p"]), int(data["n"]))
        return cls.make(params, data["values"])

    @classmethod
    def from_json(cls, text: str) -> "DenseFunction":
        return cls.from_json_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "value"])
        for i, v in enumerate(self.values):
            writer.writerow([i, repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, params: FieldParams, text: str) -> "DenseFunction":
        values = np.zeros(params.F)
        seen = np.zeros(params.F, dtype=bool)
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if [h.strip().lower() for h in header[:2]] != ["index", "value"]:
            raise ValueError("expected CSV header 'index,value'")
        for row in reader:
            if not row:
                continue
            i = int(row[0])
            values[i] = float(row[1])
            seen[i] = True
        if not seen.all():
            missing = int(np.flatnonzero(~seen)[0])
            raise ValueError(f"CSV is missing index {missing}")
        return cls.make(params, values)


def translated_values(params: FieldParams, values: np.ndarray, d: int) -> np.ndarray:
    """values of m -> f(m + d), via one cyclic roll per coordinate."""
    if d == 0:
        return np.array(values, dtype=np.float64)
    digits = params.digits_of(d)
    cube = np.asarray(values).reshape((params.p,) * params.n)
    shift = tuple(-int(x) for x in digits[::-1])
    return np.roll(cube, shift=shift, axis=tuple(range(params.n))).reshape(-1)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier coefficients plus the sorted order and its tail energies.

    order sorts |coeffs| descending with ties broken by ascending index, so
    the rank of every coefficient is deterministic.  tails[i] is the energy
    strictly below rank i: tails[0] = total energy, tails[F] = 0, and
    sigma_k = tails[k] is the energy outside the top-k coefficients.
    """

    params: FieldParams
    coeffs: np.ndarray
    order: np.ndarray
    tails: np.ndarray

    @classmethod
    def from_coeffs(cls, params: FieldParams, coeffs: np.ndarray) -> "Spectrum":
        arr = np.array(coeffs, dtype=np.complex128).reshape(-1)
        if arr.shape != (params.F,):
            raise ValueError(f"expected {params.F} coefficients, got {arr.shape}")
        arr.setflags(write=False)
        mags = np.abs(arr)
        order = np.lexsort((np.arange(params.F), -mags))
        order.setflags(write=False)
        sorted_sq = mags[order] ** 2
        tails = np.zeros(params.F + 1)
        tails[:-1] = sorted_sq[::-1].cumsum()[::-1]
        tails.setflags(write=False)
        return cls(params, arr, order, tails)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.coeffs)

    def sigma(self, k: int) -> float:
        """Energy outside the top-k coefficients."""
        if not 0 <= k <= self.params.F:
            raise ValueError(f"k={k} outside [0, {self.params.F}]")
        return float(self.tails[k])

    def top_places(self, k: int) -> np.ndarray:
        """Indices of the k largest coefficients (ties by ascending index)."""
        if not 1 <= k <= self.params.F:
            raise ValueError(f"k={k} outside [1, {self.params.F}]")
        return self.order[:k].copy()

    def quasinorm(self, t: float) -> float:
        """(sum_a |fhat(a)|^t)^(1/t); a quasinorm for 0 < t < 1."""
        if t <= 0:
            raise ValueError(f"quasinorm exponent must be positive, got {t}")
        return float(np.power(self.magnitudes, t).sum() ** (1.0 / t))

    def to_csv(self) -> str:
        """Columns index, re, im, magnitude, rank (rank 1 = largest)."""
        ranks = np.empty(self.params.F, dtype=np.int64)
        ranks[self.order] = np.arange(1, self.params.F + 1)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "re", "im", "magnitude", "rank"])
        mags = self.magnitudes
        for i in range(self.params.F):
            c = self.coeffs[i]
            writer.writerow(
                [i, repr(float(c.real)), repr(float(c.imag)), repr(float(mags[i])), int(ranks[i])]
            )
        return buf.getvalue()


def dft(f: DenseFunction) -> Spectrum:
    """fhat(a) = sum_m f(m) w^(a.m), one axis transform per coordinate."""
    coeffs = np.fft.ifftn(f.cube()) * f.params.F
    return Spectrum.from_coeffs(f.params, coeffs.reshape(-1))


def dft_naive(f: DenseFunction, block: int = 256) -> np.ndarray:
    """O(F^2) evaluation straight from the definition; the transform oracle."""
    params = f.params
    D = params.digit_table()
    roots = _root_powers(params.p)
    out = np.empty(params.F, dtype=np.complex128)
    for start in range(0, params.F, block):
        rows = D[start : start + block]
        exps = (rows @ D.T) % params.p
        out[start : start + block] = roots[exps] @ f.values
    return out


def idft(params: FieldParams, coeffs: np.ndarray) -> DenseFunction:
    """f(m) = F^(-1) sum_a fhat(a) w^(-a.m); the imaginary residue must vanish."""
    cube = np.asarray(coeffs, dtype=np.complex128).reshape((params.p,) * params.n)
    values = np.fft.fftn(cube).reshape(-1) / params.F
    residue = float(np.abs(values.imag).max()) if params.F else 0.0
    if residue > IMAG_TOLERANCE:
        raise ValueError(f"imaginary residue {residue} exceeds {IMAG_TOLERANCE}")
    return DenseFunction.make(params, values.real)


def parseval_gap(f: DenseFunction, spectrum: Spectrum | None = None) -> float:
    """Relative gap |sum|fhat|^2 - F*sum f^2| / max(F*sum f^2, 1)."""
    spectrum = spectrum if spectrum is not None else dft(f)
    lhs = float((spectrum.magnitudes**2).sum())
    rhs = f.params.F * float((f.values**2).sum())
    return abs(lhs - rhs) / max(rhs, 1.0)


def difference_set(params: FieldParams, places: np.ndarray) -> np.ndarray:
    """Sorted indices {a - b : a, b in places} (includes 0 when places is nonempty)."""
    idx = np.asarray(places, dtype=np.int64)
    D = params.digit_table()[idx]
    diffs = (D[:, None, :] - D[None, :, :]) % params.p
    flat = params.indices_of(diffs.reshape(-1, params.n))
    return np.unique(flat)
