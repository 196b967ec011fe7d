"""Parametric stationary kernel families and their closed-form summaries.

Every family is parametrized by an intensity `rho` plus shape/scale
parameters; existence requires the spectral density to stay below one,
which caps the intensity at `rho_max`.  All functions here are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate
from scipy.special import j1 as _bessel_j1

from ._special import bessel_k, log_bessel_k, matern_correlation
from .errors import (
    InvalidModel,
    UnsupportedClosedForm,
    UnsupportedFamily,
    ZeroIntensity,
)

GAUSSIAN = "gaussian"
WHITTLE_MATERN = "whittlematern"
CAUCHY = "cauchy"
CIRCULAR = "circular"
POWER_EXPONENTIAL = "powerexp"
GENERALIZED_GAMMA = "gengamma"

FAMILIES = (
    GAUSSIAN,
    WHITTLE_MATERN,
    CAUCHY,
    CIRCULAR,
    POWER_EXPONENTIAL,
    GENERALIZED_GAMMA,
)

_ALIASES = {
    "gaussian": GAUSSIAN,
    "gauss": GAUSSIAN,
    "whittlematern": WHITTLE_MATERN,
    "whittle-matern": WHITTLE_MATERN,
    "matern": WHITTLE_MATERN,
    "wm": WHITTLE_MATERN,
    "cauchy": CAUCHY,
    "circular": CIRCULAR,
    "powerexponentialspectral": POWER_EXPONENTIAL,
    "powerexponential": POWER_EXPONENTIAL,
    "powerexp": POWER_EXPONENTIAL,
    "generalizedgammaspectral": GENERALIZED_GAMMA,
    "generalizedgamma": GENERALIZED_GAMMA,
    "gengamma": GENERALIZED_GAMMA,
}

# fields each family actually uses besides rho/dim
_USES = {
    GAUSSIAN: ("alpha",),
    WHITTLE_MATERN: ("alpha", "nu"),
    CAUCHY: ("alpha", "nu"),
    CIRCULAR: ("delta",),
    POWER_EXPONENTIAL: ("alpha", "nu"),
    GENERALIZED_GAMMA: ("alpha", "nu", "gamma_"),
}

#: pcf(r0) = 0.99 fixes the range-of-correlation convention
PCF_AT_RANGE = 0.99


def canonical_family(name: str) -> str:
    key = str(name).strip().lower().replace("_", "").replace(" ", "")
    if key not in _ALIASES:
        raise UnsupportedFamily(f"unknown kernel family {name!r}")
    return _ALIASES[key]


@dataclass(frozen=True)
class KernelModel:
    """A stationary kernel family tag plus parameters (rho, alpha, nu, delta).

    Fields a family does not use stay None ("absent"); `gamma_` is the extra
    first shape parameter of the generalized-gamma spectral family.
    `nu=inf` for the power-exponential family is the indicator spectral
    density (the sinc / jinc-like most repulsive case).
    """

    family: str
    rho: float
    alpha: float | None = None
    nu: float | None = None
    delta: float | None = None
    gamma_: float | None = None
    dim: int = 2

    def __post_init__(self):
        object.__setattr__(self, "family", canonical_family(self.family))
        object.__setattr__(self, "rho", float(self.rho))

    def with_(self, **kw) -> "KernelModel":
        return replace(self, **kw)

    @property
    def is_isotropic(self) -> bool:
        return True


def gaussian_model(rho, alpha, dim=2) -> KernelModel:
    return KernelModel(GAUSSIAN, rho, alpha=alpha, dim=dim)


def whittle_matern_model(rho, alpha, nu, dim=2) -> KernelModel:
    return KernelModel(WHITTLE_MATERN, rho, alpha=alpha, nu=nu, dim=dim)


def cauchy_model(rho, alpha, nu, dim=2) -> KernelModel:
    return KernelModel(CAUCHY, rho, alpha=alpha, nu=nu, dim=dim)


def circular_model(rho, delta) -> KernelModel:
    return KernelModel(CIRCULAR, rho, delta=delta, dim=2)


def power_exponential_model(rho, alpha, nu, dim=2) -> KernelModel:
    return KernelModel(POWER_EXPONENTIAL, rho, alpha=alpha, nu=nu, dim=dim)


def generalized_gamma_model(rho, alpha, nu, gamma, dim=2) -> KernelModel:
    return KernelModel(GENERALIZED_GAMMA, rho, alpha=alpha, nu=nu, gamma_=gamma, dim=dim)


def most_repulsive_model(rho, dim=2) -> KernelModel:
    """Indicator spectral density with intensity rho (sinc for d=1, jinc-like d=2)."""
    m = KernelModel(POWER_EXPONENTIAL, rho, alpha=1.0, nu=math.inf, dim=dim)
    return m.with_(alpha=alpha_max(m))


# ---------------------------------------------------------------------------
# validity

@dataclass(frozen=True)
class Violation:
    name: str
    message: str
    admissible: tuple | None = None


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple
    rho_max: float | None = None

    def raise_if_invalid(self):
        if not self.ok:
            msgs = "; ".join(v.message for v in self.violations)
            raise InvalidModel(msgs)


def _param_violations(model: KernelModel) -> list:
    out = []
    if model.dim not in (1, 2):
        out.append(Violation("dim", f"dim must be 1 or 2, got {model.dim}", (1, 2)))
    if model.family == CIRCULAR and model.dim != 2:
        out.append(Violation("dim", "circular family is defined for d=2 only", (2, 2)))
    if not (model.rho >= 0.0 and np.isfinite(model.rho)):
        out.append(Violation("rho", f"rho must be >= 0, got {model.rho}", (0.0, math.inf)))
    uses = _USES[model.family]
    for name in ("alpha", "nu", "delta", "gamma_"):
        val = getattr(model, name)
        if name in uses:
            if val is None:
                out.append(Violation(name, f"{model.family} requires parameter {name}"))
            elif not val > 0.0:
                out.append(Violation(name, f"{name} must be > 0, got {val}", (0.0, math.inf)))
        elif val is not None:
            out.append(Violation(name, f"{model.family} does not use parameter {name}"))
    if model.family == POWER_EXPONENTIAL and model.nu is not None and math.isnan(model.nu):
        out.append(Violation("nu", "nu must be positive or inf"))
    return out


def validate(model: KernelModel, strict: bool = False) -> ValidationReport:
    """Check parameter ranges and the existence bound rho <= rho_max.

    Returns a structured report and never raises; `strict=True` additionally
    demands rho < rho_max (needed for density/likelihood work).
    """
    violations = _param_violations(model)
    bound = None
    if not violations:
        bound = rho_max(model)
        if model.rho > bound * (1.0 + 1e-12):
            violations.append(
                Violation(
                    "rho",
                    f"rho = {model.rho:.6g} exceeds rho_max = {bound:.6g}",
                    (0.0, bound),
                )
            )
        elif strict and model.rho >= bound * (1.0 - 1e-12):
            violations.append(
                Violation(
                    "rho",
                    f"likelihood work needs rho < rho_max = {bound:.6g} strictly",
                    (0.0, bound),
                )
            )
    return ValidationReport(ok=not violations, violations=tuple(violations), rho_max=bound)


# ---------------------------------------------------------------------------
# spectral density and existence bound

def _gengamma_norm(alpha, nu, gamma, d):
    """Normalizing constant c = int f(|x|) dx for the generalized-gamma f."""
    return (
        d * math.pi ** (d / 2.0) * math.gamma(gamma + (d - 1.0) / nu)
        / (math.gamma(d / 2.0 + 1.0) * math.gamma(gamma))
        * alpha ** (1.0 - d)
    )


def rho_max(model: KernelModel) -> float:
    """Largest intensity for which the model exists (spectral bound phi <= 1)."""
    d = model.dim
    f = model.family
    if f == GAUSSIAN:
        return (math.sqrt(math.pi) * model.alpha) ** (-d)
    if f == WHITTLE_MATERN:
        return math.gamma(model.nu) / (
            math.gamma(model.nu + d / 2.0) * (2.0 * math.sqrt(math.pi) * model.alpha) ** d
        )
    if f == CAUCHY:
        return math.gamma(model.nu + d / 2.0) / (
            math.gamma(model.nu) * (math.sqrt(math.pi) * model.alpha) ** d
        )
    if f == CIRCULAR:
        return 4.0 / (math.pi * model.delta**2)
    if f == POWER_EXPONENTIAL:
        nu, alpha = model.nu, model.alpha
        if math.isinf(nu):
            return math.pi ** (d / 2.0) / (math.gamma(d / 2.0 + 1.0) * alpha**d)
        return (
            d * math.pi ** (d / 2.0) * math.gamma(d / nu)
            / (math.gamma(d / 2.0 + 1.0) * nu * alpha**d)
        )
    if f == GENERALIZED_GAMMA:
        nu, alpha, gam = model.nu, model.alpha, model.gamma_
        if gam * nu < 1.0:
            return 0.0
        t = gam - 1.0 / nu
        # 0^0 = 1 at the power-exponential boundary gamma*nu = 1
        denom = t**t if t > 0 else 1.0
        return (
            d * math.pi ** (d / 2.0) * math.gamma(gam + (d - 1.0) / nu) * math.exp(t)
            / (math.gamma(d / 2.0 + 1.0) * nu * denom * alpha**d)
        )
    raise UnsupportedFamily(f)


def alpha_max(model_or_family, rho=None, nu=None, dim=2, gamma=None) -> float:
    """Largest scale alpha with rho <= rho_max; inverse of rho_max in alpha.

    rho_max scales exactly as alpha^(-d) for every non-circular family, so the
    inversion is closed-form.  Circular has no alpha (its range bound is
    delta <= 2/sqrt(pi*rho)).
    """
    if isinstance(model_or_family, KernelModel):
        m = model_or_family
        if rho is None:
            rho = m.rho
        probe = m.with_(alpha=1.0) if m.family != CIRCULAR else m
    else:
        family = canonical_family(model_or_family)
        if family == CIRCULAR:
            probe = KernelModel(family, rho if rho is not None else 1.0, delta=1.0, dim=2)
        else:
            probe = KernelModel(family, 0.0, alpha=1.0, nu=nu, gamma_=gamma, dim=dim)
    if probe.family == CIRCULAR:
        raise UnsupportedFamily(
            "circular family has no alpha; its range bound is delta_max = 2/sqrt(pi*rho)"
        )
    if not rho or rho <= 0:
        raise ValueError("alpha_max requires rho > 0")
    unit_bound = rho_max(probe)
    if unit_bound == 0.0:
        return 0.0
    return (unit_bound / rho) ** (1.0 / probe.dim)


def delta_max(rho) -> float:
    """Largest circular range at intensity rho (rho * delta^2 <= 4/pi)."""
    return 2.0 / math.sqrt(math.pi * rho)


def spectral_density_radial(model: KernelModel, r):
    """phi as a function of the spectral radius |x| (vectorized)."""
    r = np.asarray(r, dtype=float)
    d = model.dim
    f = model.family
    rho = model.rho
    if rho == 0.0:
        return np.zeros_like(r)
    if f == GAUSSIAN:
        a = model.alpha
        return rho * (math.sqrt(math.pi) * a) ** d * np.exp(-((math.pi * a) ** 2) * r * r)
    if f == WHITTLE_MATERN:
        a, nu = model.alpha, model.nu
        amp = (
            rho
            * math.gamma(nu + d / 2.0)
            / math.gamma(nu)
            * (2.0 * math.sqrt(math.pi) * a) ** d
        )
        return amp * (1.0 + (2.0 * math.pi * a) ** 2 * r * r) ** (-(nu + d / 2.0))
    if f == CAUCHY:
        a, nu = model.alpha, model.nu
        # phi is the Matern correlation shape scaled to phi(0) = rho/rho_max
        return (rho / rho_max(model)) * matern_correlation(nu, 2.0 * math.pi * a * r)
    if f == CIRCULAR:
        delta = model.delta
        out = np.full(r.shape, rho * math.pi * delta**2 / 4.0)
        pos = r > 0
        out[pos] = (rho / math.pi) * (_bessel_j1(math.pi * delta * r[pos]) / r[pos]) ** 2
        return out
    if f == POWER_EXPONENTIAL:
        a, nu = model.alpha, model.nu
        if math.isinf(nu):
            amp = rho * math.gamma(d / 2.0 + 1.0) * a**d / math.pi ** (d / 2.0)
            return np.where(a * r <= 1.0, amp, 0.0)
        amp = (
            rho * math.gamma(d / 2.0 + 1.0) * nu * a**d
            / (d * math.pi ** (d / 2.0) * math.gamma(d / nu))
        )
        return amp * np.exp(-((a * r) ** nu))
    if f == GENERALIZED_GAMMA:
        a, nu, gam = model.alpha, model.nu, model.gamma_
        amp = (
            rho * math.gamma(d / 2.0 + 1.0) * nu * a**d
            / (d * math.pi ** (d / 2.0) * math.gamma(gam + (d - 1.0) / nu))
        )
        ar = a * r
        with np.errstate(divide="ignore", invalid="ignore"):
            val = amp * ar ** (gam * nu - 1.0) * np.exp(-(ar**nu))
        if gam * nu == 1.0:
            val = np.where(r == 0, amp, val)
        elif gam * nu > 1.0:
            val = np.where(r == 0, 0.0, val)
        else:
            val = np.where(r == 0, np.inf, val)
        return val
    raise UnsupportedFamily(f)


def spectral_density(model: KernelModel, x):
    """Spectral density phi(x) at d-vectors x (scalar for a single vector)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != model.dim:
        raise ValueError(f"expected {model.dim}-vectors")
    out = spectral_density_radial(model, np.linalg.norm(pts, axis=1))
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# kernel in the spatial domain

def kernel_value_radial(model: KernelModel, r):
    """C0 as a function of distance (vectorized); UnsupportedClosedForm if none."""
    r = np.asarray(r, dtype=float)
    d = model.dim
    f = model.family
    rho = model.rho
    if f == GAUSSIAN:
        return rho * np.exp(-((r / model.alpha) ** 2))
    if f == WHITTLE_MATERN:
        return rho * matern_correlation(model.nu, r / model.alpha)
    if f == CAUCHY:
        return rho * (1.0 + (r / model.alpha) ** 2) ** (-(model.nu + d / 2.0))
    if f == CIRCULAR:
        t = np.clip(r / model.delta, 0.0, None)
        inside = t < 1.0
        out = np.zeros_like(r)
        ti = t[inside]
        out[inside] = rho * (2.0 / math.pi) * (np.arccos(ti) - ti * np.sqrt(1.0 - ti * ti))
        return out
    if f == POWER_EXPONENTIAL:
        a, nu = model.alpha, model.nu
        if nu == 2.0:  # Gaussian model reparametrized (alpha_gauss = alpha/pi)
            return rho * np.exp(-((math.pi * r / a) ** 2))
        if math.isinf(nu):  # indicator spectral density: sinc / jinc-like kernel
            amp = rho * math.gamma(d / 2.0 + 1.0) * a**d / math.pi ** (d / 2.0)
            out = np.full(r.shape, rho, dtype=float)
            pos = r > 0
            rp = r[pos]
            if d == 1:
                out[pos] = amp * np.sin(2.0 * math.pi * rp / a) / (math.pi * rp)
            else:
                out[pos] = amp * (1.0 / a) * _bessel_j1(2.0 * math.pi * rp / a) / rp
            return out
        raise UnsupportedClosedForm(
            "power-exponential kernel has no closed form for nu not in {2, inf}; "
            "use the spectral lattice (module spectral)"
        )
    raise UnsupportedClosedForm(
        f"{f} kernel has no closed form; use the spectral lattice (module spectral)"
    )


def kernel_value(model: KernelModel, u):
    """Stationary kernel C0(u) at d-vectors u; C0(0) = rho and |C0| <= rho."""
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    pts = np.atleast_2d(u)
    if pts.shape[1] != model.dim:
        raise ValueError(f"expected {model.dim}-vectors")
    out = kernel_value_radial(model, np.linalg.norm(pts, axis=1))
    return float(out[0]) if single else out


def has_closed_form_kernel(model: KernelModel) -> bool:
    try:
        kernel_value_radial(model, np.array([0.1]))
        return True
    except UnsupportedClosedForm:
        return False


def pcf(model: KernelModel, r):
    """Isotropic pair correlation g0(r) = 1 - (C0(r)/rho)^2, with g0(0) = 0."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    rr = np.atleast_1d(r)
    if model.rho == 0.0:
        out = np.zeros_like(rr)
    else:
        corr = kernel_value_radial(model, rr) / model.rho
        out = 1.0 - corr * corr
    out = np.where(rr == 0.0, 0.0, out)
    return float(out[0]) if scalar else out


def K_function(model: KernelModel, r, quad_tol: float = 1e-9):
    """Ripley K(r) = 2*pi * int_0^r t g0(t) dt for d = 2.

    Closed form for the Gaussian and Cauchy families; adaptive quadrature
    (absolute tolerance `quad_tol`) elsewhere.
    """
    if model.dim != 2:
        raise UnsupportedFamily("K_function is defined for d = 2")
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    rr = np.atleast_1d(r).astype(float)
    if np.any(rr < 0):
        raise ValueError("r must be >= 0")
    f = model.family
    if f == GAUSSIAN:
        a = model.alpha
        out = math.pi * rr**2 - (math.pi * a**2 / 2.0) * (1.0 - np.exp(-2.0 * rr**2 / a**2))
    elif f == CAUCHY:
        a, nu = model.alpha, model.nu
        p = 2.0 * nu + model.dim - 1.0
        out = math.pi * rr**2 - (math.pi * a**2 / p) * (1.0 - (a**2 / (a**2 + rr**2)) ** p)
    else:
        # accumulate segment-by-segment over the sorted grid
        order = np.argsort(rr)
        sorted_r = rr[order]
        vals = np.empty_like(sorted_r)
        prev_r, prev_k = 0.0, 0.0
        breaks = [model.delta] if f == CIRCULAR else []
        for i, radius in enumerate(sorted_r):
            if radius > prev_r:
                pts = [b for b in breaks if prev_r < b < radius]
                seg, _ = integrate.quad(
                    lambda t: t * pcf(model, t),
                    prev_r,
                    radius,
                    epsabs=quad_tol / (2.0 * math.pi),
                    epsrel=1e-12,
                    limit=200,
                    points=pts or None,
                )
                prev_k += 2.0 * math.pi * seg
            vals[i] = prev_k
            prev_r = radius
        out = np.empty_like(rr)
        out[order] = vals
    out = np.where(rr == 0.0, 0.0, out)
    return float(out[0]) if scalar else out


def L_function(model: KernelModel, r):
    """Variance-stabilized L(r) = sqrt(K(r)/pi); L(r) = r for Poisson."""
    K = K_function(model, r)
    return np.sqrt(np.maximum(K, 0.0) / math.pi)


def range_of_correlation(model: KernelModel) -> float:
    """Distance r0 with g0(r0) = 0.99 (correlation magnitude 0.1); linear in alpha."""
    f = model.family
    a = model.alpha
    if f == GAUSSIAN:
        return a * math.sqrt(math.log(10.0))
    if f == WHITTLE_MATERN:
        return a * math.sqrt(8.0 * model.nu)
    if f == CAUCHY:
        # from [1+(r/alpha)^2]^-(2nu+d) = 0.01; reduces to the d=2 display
        expo = 2.0 * model.nu + model.dim
        return a * math.sqrt(0.01 ** (-1.0 / expo) - 1.0)
    raise UnsupportedFamily(
        f"range of correlation is tabulated for gaussian/whittlematern/cauchy, not {f}"
    )


def repulsiveness_mu(model: KernelModel, rel_tol: float = 1e-6) -> float:
    """mu = (1/rho) * int phi(x)^2 dx in [0, 1]; 1 only for indicator phi.

    Adaptive quadrature of phi^2 with radial reduction; rho = 0 gives 0.
    """
    if model.rho == 0.0:
        return 0.0
    report = validate(model)
    report.raise_if_invalid()
    d = model.dim

    def integrand(r):
        v = spectral_density_radial(model, np.asarray([r]))[0]
        w = 2.0 * math.pi * r if d == 2 else 2.0
        return w * v * v

    f = model.family
    if f == POWER_EXPONENTIAL and math.isinf(model.nu):
        upper = 1.0 / model.alpha
        val, _ = integrate.quad(integrand, 0.0, upper, epsrel=rel_tol, limit=200)
    elif f == CIRCULAR:
        # J1 tail oscillates; integrate far enough that the r^-5 envelope is dust
        upper = 400.0 / (math.pi * model.delta)
        val, _ = integrate.quad(
            integrand, 0.0, upper, epsrel=rel_tol, limit=4000
        )
    else:
        val, _ = integrate.quad(integrand, 0.0, np.inf, epsrel=rel_tol, limit=400)
    return val / model.rho


def palm_kernel(model: KernelModel, x, u, v) -> float:
    """Reduced Palm kernel det[C](u,x; v,x) / C(x,x) = C0(u-v) - C0(u-x)C0(x-v)/rho."""
    if model.rho == 0.0:
        raise ZeroIntensity("palm kernel undefined at rho = 0")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c_uv = kernel_value(model, u - v)
    c_ux = kernel_value(model, u - x)
    c_xv = kernel_value(model, x - v)
    return float(c_uv - c_ux * c_xv / model.rho)


# ---------------------------------------------------------------------------
# text / JSON model specifications

_SPEC_KEYS = {"family", "rho", "alpha", "nu", "delta", "gamma", "dim"}


def model_from_dict(data: dict) -> KernelModel:
    unknown = set(data) - _SPEC_KEYS
    if unknown:
        raise ValueError(f"unknown model keys: {sorted(unknown)}")
    if "family" not in data or "rho" not in data:
        raise ValueError("model spec requires at least family and rho")

    def num(key):
        if key not in data or data[key] is None:
            return None
        v = data[key]
        if isinstance(v, str) and v.strip().lower() in ("inf", "infinity"):
            return math.inf
        return float(v)

    return KernelModel(
        family=canonical_family(data["family"]),
        rho=float(data["rho"]),
        alpha=num("alpha"),
        nu=num("nu"),
        delta=num("delta"),
        gamma_=num("gamma"),
        dim=int(data.get("dim", 2)),
    )


def model_to_dict(model: KernelModel) -> dict:
    out = {"family": model.family, "rho": model.rho, "dim": model.dim}
    for key, attr in (("alpha", "alpha"), ("nu", "nu"), ("delta", "delta"), ("gamma", "gamma_")):
        val = getattr(model, attr)
        if val is not None:
            out[key] = val
    return out


def parse_model_spec(text: str) -> KernelModel:
    """Parse 'family=gaussian rho=100 alpha=0.05 dim=2' (or its JSON mirror)."""
    text = text.strip()
    if text.startswith("{"):
        return model_from_dict(json.loads(text))
    data = {}
    for tok in text.split():
        if "=" not in tok:
            raise ValueError(f"expected key=value pairs, got {tok!r}")
        key, val = tok.split("=", 1)
        key = key.strip().lower()
        if key not in _SPEC_KEYS:
            raise ValueError(f"unknown model key {key!r}")
        data[key] = val
    return model_from_dict(data)
