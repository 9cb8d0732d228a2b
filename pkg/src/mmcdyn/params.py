"""Converter parameters: validation, per-unit bases, config file I/O.

The configuration format is flat ``key = value`` text (``#`` comments allowed).
Keys carry their unit in the name so files are self-describing:

    u1n_kv, fn_hz, n_sm, c_arm_uf, r_arm_ohm, l_arm_mh, r_f_ohm, l_f_mh,
    v_dc_kv, kp_sigma, tau_i_sigma_s, kp_delta, tau_i_delta_s, s_base_mva

plus the optional base overrides ``v_base_ac_kv`` and ``v_base_dc_kv``.
Internally everything is stored in SI units.
"""

import math
import os
from dataclasses import dataclass


class ParamError(ValueError):
    """Raised for missing/unknown/invalid configuration entries."""


@dataclass(frozen=True)
class MmcParams:
    """Physical and control constants plus per-unit bases (all SI).

    ``r_eq_ac``/``l_eq_ac`` are the equivalent ac-side impedances seen by the
    grid current (filter plus half an arm): r_f + r_arm/2 and l_f + l_arm/2.
    """

    u1n_ac_voltage: float   # V, line-to-line RMS
    f_nominal: float        # Hz
    n_submodules: int       # sub-modules per arm (informational)
    c_arm: float            # F, arm equivalent capacitance
    r_arm: float            # ohm
    l_arm: float            # H
    r_f: float              # ohm, ac filter resistance
    l_f: float              # H, ac filter inductance
    v_dc_nominal: float     # V
    kp_sigma: float         # pu, CCSC proportional gain
    tau_i_sigma: float      # s, CCSC integral time constant
    kp_delta: float         # pu, grid-current proportional gain
    tau_i_delta: float      # s, grid-current integral time constant
    s_base: float           # VA
    v_base_ac: float        # V, peak phase voltage
    v_base_dc: float        # V
    r_eq_ac: float          # ohm, derived: r_f + r_arm/2
    l_eq_ac: float          # H, derived: l_f + l_arm/2

    def __post_init__(self):
        positive = ("u1n_ac_voltage", "f_nominal", "c_arm", "r_arm", "l_arm",
                    "r_f", "l_f", "v_dc_nominal", "kp_sigma", "tau_i_sigma",
                    "kp_delta", "tau_i_delta", "s_base", "v_base_ac",
                    "v_base_dc")
        for name in positive:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)
                    and value > 0):
                raise ParamError("%s must be positive, got %r" % (name, value))
        if self.n_submodules <= 0:
            raise ParamError("n_submodules must be positive, got %r"
                             % (self.n_submodules,))
        if self.r_eq_ac != self.r_f + self.r_arm / 2:
            raise ParamError("r_eq_ac must equal r_f + r_arm/2")
        if self.l_eq_ac != self.l_f + self.l_arm / 2:
            raise ParamError("l_eq_ac must equal l_f + l_arm/2")

    # ---- derived scalars -------------------------------------------------

    @property
    def omega(self):
        """Nominal angular frequency, rad/s."""
        return 2.0 * math.pi * self.f_nominal

    @property
    def i_base_ac(self):
        """Current base (peak phase), A: s_base = (3/2) v_base_ac i_base_ac."""
        return 2.0 * self.s_base / (3.0 * self.v_base_ac)

    @property
    def z_base_ac(self):
        """AC impedance base, ohm."""
        return self.v_base_ac / self.i_base_ac


def make_params(u1n_ac_voltage, f_nominal, n_submodules, c_arm, r_arm, l_arm,
                r_f, l_f, v_dc_nominal, kp_sigma, tau_i_sigma, kp_delta,
                tau_i_delta, s_base, v_base_ac=None, v_base_dc=None):
    """Build a validated MmcParams, computing derived fields and defaults.

    v_base_ac defaults to the peak phase voltage of u1n (line-to-line RMS);
    v_base_dc defaults to v_dc_nominal.
    """
    if v_base_ac is None:
        v_base_ac = u1n_ac_voltage * math.sqrt(2.0 / 3.0)
    if v_base_dc is None:
        v_base_dc = v_dc_nominal
    return MmcParams(
        u1n_ac_voltage=u1n_ac_voltage, f_nominal=f_nominal,
        n_submodules=int(n_submodules), c_arm=c_arm, r_arm=r_arm, l_arm=l_arm,
        r_f=r_f, l_f=l_f, v_dc_nominal=v_dc_nominal, kp_sigma=kp_sigma,
        tau_i_sigma=tau_i_sigma, kp_delta=kp_delta, tau_i_delta=tau_i_delta,
        s_base=s_base, v_base_ac=v_base_ac, v_base_dc=v_base_dc,
        r_eq_ac=r_f + r_arm / 2, l_eq_ac=l_f + l_arm / 2)


# (config key, SI field, scale from file unit to SI)
_KEYS = [
    ("u1n_kv",        "u1n_ac_voltage", 1e3),
    ("fn_hz",         "f_nominal",      1.0),
    ("n_sm",          "n_submodules",   1.0),
    ("c_arm_uf",      "c_arm",          1e-6),
    ("r_arm_ohm",     "r_arm",          1.0),
    ("l_arm_mh",      "l_arm",          1e-3),
    ("r_f_ohm",       "r_f",            1.0),
    ("l_f_mh",        "l_f",            1e-3),
    ("v_dc_kv",       "v_dc_nominal",   1e3),
    ("kp_sigma",      "kp_sigma",       1.0),
    ("tau_i_sigma_s", "tau_i_sigma",    1.0),
    ("kp_delta",      "kp_delta",       1.0),
    ("tau_i_delta_s", "tau_i_delta",    1.0),
    ("s_base_mva",    "s_base",         1e6),
]
_OPTIONAL_KEYS = [
    ("v_base_ac_kv", "v_base_ac", 1e3),
    ("v_base_dc_kv", "v_base_dc", 1e3),
]
_ALL_KEYS = {k for k, _, _ in _KEYS} | {k for k, _, _ in _OPTIONAL_KEYS}


def _parse_kv(text):
    """Parse flat 'key = value' text into an ordered dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParamError("line %d: expected 'key = value', got %r"
                             % (lineno, raw.strip()))
        key, value = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise ParamError("duplicate key %r" % key)
        out[key] = value
    return out


def loads_params(text):
    """Parse configuration text into a validated MmcParams."""
    raw = _parse_kv(text)
    unknown = sorted(set(raw) - _ALL_KEYS)
    if unknown:
        raise ParamError("unknown key(s): %s" % ", ".join(unknown))
    kwargs = {}
    for key, field, scale in _KEYS:
        if key not in raw:
            raise ParamError("missing key %r" % key)
        try:
            value = float(raw[key])
        except ValueError:
            raise ParamError("key %r: cannot parse %r as a number"
                             % (key, raw[key])) from None
        kwargs[field] = value * scale
    for key, field, scale in _OPTIONAL_KEYS:
        if key in raw:
            try:
                kwargs[field] = float(raw[key]) * scale
            except ValueError:
                raise ParamError("key %r: cannot parse %r as a number"
                                 % (key, raw[key])) from None
    try:
        return make_params(**kwargs)
    except ParamError:
        raise
    except (TypeError, ValueError) as exc:
        raise ParamError(str(exc)) from None


def load_params(path):
    """Load and validate an MmcParams from a config file path."""
    with open(path, "r", encoding="utf-8") as handle:
        return loads_params(handle.read())


def _inv_scale(value, scale):
    """Return y with y*scale == value bitwise (nudges y by 1 ulp if needed)."""
    y = value / scale
    if y * scale == value:
        return y
    for cand in (math.nextafter(y, math.inf), math.nextafter(y, -math.inf)):
        if cand * scale == value:
            return cand
    return y


def dumps_params(p):
    """Serialize to config text; round-trips bit-identically via loads_params."""
    lines = []
    for key, field, scale in _KEYS:
        if field == "n_submodules":
            lines.append("%s = %d" % (key, getattr(p, field)))
        else:
            lines.append("%s = %s" % (key, repr(_inv_scale(getattr(p, field),
                                                           scale))))
    for key, field, scale in _OPTIONAL_KEYS:
        lines.append("%s = %s" % (key, repr(_inv_scale(getattr(p, field),
                                                       scale))))
    return "\n".join(lines) + "\n"


def save_params(p, path):
    """Write an MmcParams to a config file."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(dumps_params(p))


_PU_BASE = {
    "ac-voltage": lambda p: p.v_base_ac,
    "dc-voltage": lambda p: p.v_base_dc,
    "current": lambda p: p.i_base_ac,
    "power": lambda p: p.s_base,
}


def pu_base(kind, p):
    """Return the SI base value for a per-unit kind."""
    try:
        return _PU_BASE[kind](p)
    except KeyError:
        raise ParamError("unknown per-unit kind %r (expected one of %s)"
                         % (kind, ", ".join(sorted(_PU_BASE)))) from None


def to_per_unit(value, kind, p):
    """Convert an SI value to per-unit for the given kind."""
    return value / pu_base(kind, p)


def from_per_unit(value, kind, p):
    """Convert a per-unit value back to SI for the given kind."""
    return value * pu_base(kind, p)


def default_config_dir():
    """Directory searched for config/scenario files given by bare name.

    Set via the MMCDYN_CONFIG_DIR environment variable; falls back to the
    packaged data directory.
    """
    env = os.environ.get("MMCDYN_CONFIG_DIR")
    if env:
        return env
    return os.path.join(os.path.dirname(__file__), "data")


def resolve_config_path(name):
    """Resolve a params/scenario argument to an existing file path.

    An existing path wins; otherwise the name is looked up in
    default_config_dir().
    """
    if os.path.exists(name):
        return name
    candidate = os.path.join(default_config_dir(), name)
    if os.path.exists(candidate):
        return candidate
    raise FileNotFoundError("no such config file: %s (also tried %s)"
                            % (name, candidate))
