"""Analog front-end budget: voltage divider loss, ADC LSB and minimum detectable signal.

All quantities are SI doubles (ohms, volts); nothing here carries units.
"""

from dataclasses import dataclass

from ._config import load_config
from .exceptions import ConfigError

DEFAULT_Z_IN_OHM = 1e12
DEFAULT_Z_SOURCE_OHM = 1e6
DEFAULT_V_REF = 4.5
DEFAULT_ADC_BITS = 24
GAIN_SETTINGS = (1, 2, 4, 6, 8, 12, 24)
CMRR_DB = 110.0


@dataclass(frozen=True)
class ImpedanceBreakdown:
    z_s_ohm: float
    z_se_ohm: float
    z_e_ohm: float

    @property
    def total(self):
        return self.z_s_ohm + self.z_se_ohm + self.z_e_ohm


@dataclass(frozen=True)
class HwBudget:
    z_in_ohm: float = DEFAULT_Z_IN_OHM
    z_source_ohm: float = DEFAULT_Z_SOURCE_OHM
    v_ref_volt: float = DEFAULT_V_REF
    adc_bits: int = DEFAULT_ADC_BITS
    gain: float = 1.0
    z_breakdown: ImpedanceBreakdown = None

    def __post_init__(self):
        if self.z_breakdown is not None:
            parts = (self.z_breakdown.z_s_ohm, self.z_breakdown.z_se_ohm, self.z_breakdown.z_e_ohm)
            if min(parts) <= 0:
                raise ConfigError("impedance components must be positive")
            total = self.z_breakdown.total
            if abs(total - self.z_source_ohm) > 1e-9 * max(total, self.z_source_ohm):
                raise ConfigError(f"z_source_ohm {self.z_source_ohm} != sum of components {total}")
        if self.z_in_ohm <= 0 or self.z_source_ohm <= 0:
            raise ConfigError("impedances must be positive")
        if not 1 <= self.adc_bits <= 32 or int(self.adc_bits) != self.adc_bits:
            raise ConfigError(f"adc_bits must be an integer in [1, 32], got {self.adc_bits}")
        if self.gain < 1:
            raise ConfigError("gain must be >= 1")
        if self.v_ref_volt <= 0:
            raise ConfigError("v_ref_volt must be positive")

    @classmethod
    def from_components(cls, z_s_ohm, z_se_ohm, z_e_ohm, **kwargs):
        parts = ImpedanceBreakdown(z_s_ohm, z_se_ohm, z_e_ohm)
        return cls(z_source_ohm=parts.total, z_breakdown=parts, **kwargs)


def v_out(v_brain, budget):
    """Signal reaching the front end after the source/input impedance divider."""
    return v_brain * budget.z_in_ohm / (budget.z_in_ohm + budget.z_source_ohm)


def loss_ratio(budget):
    """Fraction of the source signal lost across the source impedance."""
    return budget.z_source_ohm / (budget.z_in_ohm + budget.z_source_ohm)


def lsb(budget):
    return budget.v_ref_volt / 2 ** budget.adc_bits


def v_min(budget):
    """Smallest input step the system resolves: LSB referred back through gain and loss."""
    return lsb(budget) / (budget.gain * (1.0 - loss_ratio(budget)))


def budget_table(base, gains=GAIN_SETTINGS):
    """One row per gain setting with loss, LSB and V_min."""
    rows = []
    for g in gains:
        b = HwBudget(base.z_in_ohm, base.z_source_ohm, base.v_ref_volt, base.adc_bits, g, base.z_breakdown)
        rows.append({
            "gain": g,
            "loss_ratio": loss_ratio(b),
            "loss_percent": 100.0 * loss_ratio(b),
            "lsb_volt": lsb(b),
            "v_min_volt": v_min(b),
        })
    return rows


def budget_from_config(source):
    """Read ``z_in_ohm``, ``z_source_ohm`` (or ``z_s_ohm``/``z_se_ohm``/``z_e_ohm``),
    ``v_ref_volt``, ``adc_bits`` and ``gain`` from a key=value config."""
    cfg = load_config(source)
    kwargs = {k: cfg[k] for k in ("z_in_ohm", "v_ref_volt", "adc_bits", "gain") if k in cfg}
    if "adc_bits" in kwargs:
        kwargs["adc_bits"] = int(kwargs["adc_bits"])
    if all(k in cfg for k in ("z_s_ohm", "z_se_ohm", "z_e_ohm")):
        return HwBudget.from_components(cfg["z_s_ohm"], cfg["z_se_ohm"], cfg["z_e_ohm"], **kwargs)
    if "z_source_ohm" in cfg:
        kwargs["z_source_ohm"] = cfg["z_source_ohm"]
    return HwBudget(**kwargs)


def format_budget_table(rows):
    lines = [f"{'gain':>5} {'V_out loss':>14} {'LSB (V)':>12} {'V_min (V)':>12}"]
    for r in rows:
        lines.append(f"{r['gain']:>5} {r['loss_percent']:>13.6g}% {r['lsb_volt']:>12.4e} {r['v_min_volt']:>12.4e}")
    return "\n".join(lines)
