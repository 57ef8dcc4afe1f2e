"""Heavy-tailed additive noise models.

Random streams come from numpy's PCG64 bit generator seeded through
``SeedSequence``, which is specified bit-for-bit and therefore reproducible
across platforms.

Scale conventions
-----------------
gaussian   ``scale`` is the standard deviation.
sas        ``scale`` is the dispersion ``gamma`` in ``exp(j*mu*x - gamma*|x|**alpha)``.
cauchy     ``scale`` is ``gamma`` (half width at half maximum).
student_t  ``scale`` multiplies a standard t variate with ``nu`` degrees of freedom.
laplace    ``scale`` is ``b``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

FAMILIES = ("gaussian", "sas", "cauchy", "student_t", "laplace")


class UnsupportedDensityError(NotImplementedError):
    """No closed-form density exists for the requested parameters."""


@dataclass(frozen=True)
class NoiseSpec:
    family: str = "gaussian"
    location: float = 0.0
    scale: float = 1.0
    alpha: float = 2.0
    nu: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}; expected one of {FAMILIES}")
        if not math.isfinite(self.location):
            raise ValueError("location must be finite")
        if not self.scale > 0 or not math.isfinite(self.scale):
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")

    def to_dict(self):
        return asdict(self)


def derive_seed(base_seed, *keys) -> int:
    """Mix a base seed with integer keys into a new 64-bit seed.

    Used to give every (repetition, timestep) pair an independent stream
    that can be replayed in isolation.
    """
    ss = np.random.SeedSequence([int(base_seed) & (2**64 - 1), *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def sas_standard(alpha, size, rng):
    """Chambers-Mallows-Stuck draw with characteristic function ``exp(-|x|**alpha)``."""
    phi = rng.uniform(-np.pi / 2, np.pi / 2, size)
    w = rng.standard_exponential(size)
    if alpha == 1.0:
        return np.tan(phi)
    return (np.sin(alpha * phi) / np.cos(phi) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * phi) / w) ** ((1.0 - alpha) / alpha))


def sample(spec: NoiseSpec, n, rng_seed) -> np.ndarray:
    """Draw ``n`` i.i.d. values; identical seeds give identical output."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else make_rng(rng_seed)
    if spec.family == "sas":
        # dispersion gamma corresponds to scale gamma**(1/alpha) of the standard variate
        return spec.location + spec.scale ** (1.0 / spec.alpha) * sas_standard(spec.alpha, n, rng)
    return spec.location + spec.scale * _standard_draw(spec, n, rng)


def _standard_draw(spec, n, rng):
    if spec.family == "gaussian":
        return rng.standard_normal(n)
    if spec.family == "cauchy":
        return rng.standard_cauchy(n)
    if spec.family == "student_t":
        return rng.standard_t(spec.nu, n)
    if spec.family == "laplace":
        return rng.laplace(0.0, 1.0, n)
    raise AssertionError(spec.family)


def _closed_form_family(spec):
    if spec.family != "sas":
        return spec.family, spec.scale
    if spec.alpha == 2.0:
        return "gaussian", math.sqrt(2.0 * spec.scale)
    if spec.alpha == 1.0:
        return "cauchy", spec.scale
    raise UnsupportedDensityError(
        f"SaS with alpha={spec.alpha} has no closed-form density; "
        "use characteristic_function instead")


def pdf(spec: NoiseSpec, t):
    """Closed-form density. SaS is supported only at alpha 1 and 2."""
    family, scale = _closed_form_family(spec)
    z = (np.asarray(t, dtype=float) - spec.location) / scale
    if family == "gaussian":
        out = np.exp(-0.5 * z * z) / (scale * math.sqrt(2 * math.pi))
    elif family == "cauchy":
        out = 1.0 / (math.pi * scale * (1.0 + z * z))
    elif family == "laplace":
        out = np.exp(-np.abs(z)) / (2.0 * scale)
    else:
        nu = spec.nu
        c = math.exp(math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2)) / math.sqrt(nu * math.pi)
        out = c * (1.0 + z * z / nu) ** (-(nu + 1) / 2) / scale
    return out[()] if np.ndim(out) == 0 else out


def cdf(spec: NoiseSpec, t):
    """Closed-form distribution function; same support rules as :func:`pdf`."""
    family, scale = _closed_form_family(spec)
    z = (np.asarray(t, dtype=float) - spec.location) / scale
    if family == "gaussian":
        out = special.ndtr(z)
    elif family == "cauchy":
        out = 0.5 + np.arctan(z) / math.pi
    elif family == "laplace":
        out = np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0)), 1 - 0.5 * np.exp(-np.maximum(z, 0)))
    else:
        out = special.stdtr(spec.nu, z)
    return out[()] if np.ndim(out) == 0 else out


def characteristic_function(spec: NoiseSpec, x):
    """``exp(j*location*x - scale*|x|**alpha)`` for a SaS spec."""
    if spec.family != "sas":
        raise ValueError("characteristic_function is defined here for the sas family only")
    x = np.asarray(x, dtype=float)
    out = np.exp(1j * spec.location * x - spec.scale * np.abs(x) ** spec.alpha)
    return out[()] if np.ndim(out) == 0 else out


def empirical_cf(samples, x):
    samples = np.asarray(samples, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.array([np.mean(np.exp(1j * xi * samples)) for xi in x])
