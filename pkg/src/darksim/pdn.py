from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, List, Tuple

import numpy as np

from .errors import ModelError

logger = logging.getLogger(__name__)


class Topology(str, Enum):
    GATED = "gated"
    BYPASSED = "bypassed"


class Spacing(str, Enum):
    LOG = "log"
    LINEAR = "linear"


@dataclass(frozen=True)
class PdnStage:
    """One ladder section: series R-L followed by an optional shunt decoupling capacitor."""

    series_resistance: float
    series_inductance: float = 0.0
    shunt_cap: float = 0.0
    cap_esr: float = 0.0
    cap_esl: float = 0.0

    def __post_init__(self) -> None:
        values = (self.series_resistance, self.series_inductance, self.shunt_cap, self.cap_esr, self.cap_esl)
        if any(v < 0 for v in values):
            raise ModelError(f"PDN stage values must be non-negative: {self}")
        if self.shunt_cap == 0 and (self.cap_esr != 0 or self.cap_esl != 0):
            raise ModelError("A stage without shunt capacitance cannot carry cap ESR/ESL")


@dataclass(frozen=True)
class CoreBranch:
    gate_resistance: float
    die_grid_resistance: float
    mim_cap: float = 0.0
    mim_esr: float = 0.0

    def __post_init__(self) -> None:
        if min(self.gate_resistance, self.die_grid_resistance, self.mim_cap, self.mim_esr) < 0:
            raise ModelError(f"Core branch values must be non-negative: {self}")

    @property
    def series_resistance(self) -> float:
        return self.gate_resistance + self.die_grid_resistance


@dataclass(frozen=True)
class PdnNetwork:
    """VR -> board -> package -> die ladder with the core branches hanging off the last stage.

    The load node is core 0's node. In the bypassed topology the cores are a single merged branch.
    """

    vr_output_resistance: float
    stages: Tuple[PdnStage, ...]
    cores: Tuple[CoreBranch, ...]
    topology: Topology = Topology.GATED

    def __post_init__(self) -> None:
        object.__setattr__(self, "stages", tuple(self.stages))
        object.__setattr__(self, "cores", tuple(self.cores))
        if self.vr_output_resistance < 0:
            raise ModelError("VR output resistance must be non-negative")
        if not self.stages:
            raise ModelError("A PDN needs at least one stage")
        if not self.cores:
            raise ModelError("A PDN needs at least one core branch")
        if self.topology is Topology.GATED:
            if any(c.gate_resistance <= 0 for c in self.cores):
                raise ModelError("Gated topology requires a positive power-gate resistance on every core")
        else:
            if len(self.cores) != 1 or self.cores[0].gate_resistance != 0:
                raise ModelError("Bypassed topology holds exactly one merged branch with zero gate resistance")


@dataclass(frozen=True, eq=False)
class ImpedanceProfile:
    frequencies: np.ndarray
    magnitudes: np.ndarray
    phases: np.ndarray

    def __post_init__(self) -> None:
        if len(self.frequencies) and np.any(np.diff(self.frequencies) <= 0):
            raise ModelError("Profile frequencies must be strictly increasing")
        if np.any(self.magnitudes <= 0):
            raise ModelError("Profile magnitudes must be positive")

    @classmethod
    def from_samples(cls, frequencies: np.ndarray, impedances: np.ndarray) -> "ImpedanceProfile":
        return cls(
            frequencies=np.asarray(frequencies, dtype=float),
            magnitudes=np.abs(impedances),
            phases=np.angle(impedances),
        )

    def __len__(self) -> int:
        return len(self.frequencies)

    def samples(self) -> Iterator[Tuple[float, float, float]]:
        for f, mag, phase in zip(self.frequencies, self.magnitudes, self.phases):
            yield float(f), float(mag), float(phase)


def _cap_impedance(omega: np.ndarray, cap: float, esr: float, esl: float) -> np.ndarray:
    return esr + 1j * (omega * esl - 1.0 / (omega * cap))


def _parallel(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    total = a + b
    if np.any(total == 0):
        raise ModelError("Singular network: parallel impedances cancel")
    return a * b / total


def _ladder(network: PdnNetwork, freqs: np.ndarray) -> np.ndarray:
    omega = 2.0 * np.pi * freqs
    z = np.full(omega.shape, network.vr_output_resistance, dtype=complex)
    for stage in network.stages:
        z = z + (stage.series_resistance + 1j * omega * stage.series_inductance)
        if stage.shunt_cap > 0:
            z = _parallel(z, _cap_impedance(omega, stage.shunt_cap, stage.cap_esr, stage.cap_esl))

    load, *others = network.cores
    # Other cores load the die node only through their MIM capacitance.
    for branch in others:
        if branch.mim_cap > 0:
            z = _parallel(z, branch.series_resistance + _cap_impedance(omega, branch.mim_cap, branch.mim_esr, 0.0))

    z = z + load.series_resistance
    if load.mim_cap > 0:
        z = _parallel(z, _cap_impedance(omega, load.mim_cap, load.mim_esr, 0.0))

    if np.any(z == 0):
        raise ModelError("Singular network: zero driving-point impedance")
    return z


def impedance_at(network: PdnNetwork, f: float) -> complex:
    """Driving-point impedance at the core load node."""
    if not f > 0:
        raise ModelError(f"Frequency must be positive, got {f}")
    return complex(_ladder(network, np.array([f], dtype=float))[0])


def impedance_sweep(
    network: PdnNetwork,
    f_min: float = 1e3,
    f_max: float = 1e9,
    points: int = 400,
    spacing: Spacing = Spacing.LOG,
) -> ImpedanceProfile:
    if not 0 < f_min < f_max:
        raise ModelError(f"Sweep bounds must satisfy 0 < f_min < f_max (got {f_min}, {f_max})")
    if points < 2:
        raise ModelError("A sweep needs at least two points")

    if Spacing(spacing) is Spacing.LOG:
        freqs = np.geomspace(f_min, f_max, points)
    else:
        freqs = np.linspace(f_min, f_max, points)
    return ImpedanceProfile.from_samples(freqs, _ladder(network, freqs))


def bypass(network: PdnNetwork) -> PdnNetwork:
    """Short every gated core domain and the ungated domain into one merged branch."""
    if network.topology is Topology.BYPASSED:
        raise ModelError("Network is already bypassed")

    grids = [c.die_grid_resistance for c in network.cores]
    merged_grid = 0.0 if any(g == 0 for g in grids) else 1.0 / sum(1.0 / g for g in grids)

    with_mim = [c for c in network.cores if c.mim_cap > 0]
    merged_mim = sum(c.mim_cap for c in with_mim)
    if not with_mim or any(c.mim_esr == 0 for c in with_mim):
        merged_esr = 0.0
    else:
        merged_esr = 1.0 / sum(1.0 / c.mim_esr for c in with_mim)

    merged = CoreBranch(gate_resistance=0.0, die_grid_resistance=merged_grid, mim_cap=merged_mim, mim_esr=merged_esr)
    logger.debug(
        "Bypassed %d core branches into grid=%.3g ohm, mim=%.3g F", len(network.cores), merged_grid, merged_mim
    )
    return replace(network, cores=(merged,), topology=Topology.BYPASSED)


def dc_resistance(network: PdnNetwork) -> float:
    stages = sum(s.series_resistance for s in network.stages)
    return network.vr_output_resistance + stages + network.cores[0].series_resistance


def peak_impedance(profile: ImpedanceProfile) -> Tuple[float, float]:
    if len(profile) == 0:
        raise ModelError("Cannot take the peak of an empty profile")
    idx = int(np.argmax(profile.magnitudes))
    return float(profile.frequencies[idx]), float(profile.magnitudes[idx])


def nodal_impedance_at(network: PdnNetwork, f: float) -> complex:
    """Same driving-point impedance from a dense complex nodal solve.

    Zero-impedance elements become MNA short rows, so the matrix stays regular when a
    series element or a resonant shunt vanishes.
    """
    if not f > 0:
        raise ModelError(f"Frequency must be positive, got {f}")
    omega = 2.0 * np.pi * f
    ground = -1
    elements: List[Tuple[int, int, complex]] = []

    node = 0
    elements.append((node, ground, complex(network.vr_output_resistance)))
    for stage in network.stages:
        nxt = node + 1
        elements.append((node, nxt, complex(stage.series_resistance, omega * stage.series_inductance)))
        if stage.shunt_cap > 0:
            elements.append(
                (nxt, ground, complex(stage.cap_esr, omega * stage.cap_esl - 1.0 / (omega * stage.shunt_cap)))
            )
        node = nxt

    die = node
    load_node = die + 1
    for i, branch in enumerate(network.cores):
        core_node = die + 1 + i
        elements.append((die, core_node, complex(branch.series_resistance)))
        if branch.mim_cap > 0:
            elements.append((core_node, ground, complex(branch.mim_esr, -1.0 / (omega * branch.mim_cap))))

    n_nodes = die + 1 + len(network.cores)
    shorts = [(a, b) for a, b, z in elements if z == 0]
    size = n_nodes + len(shorts)
    y = np.zeros((size, size), dtype=complex)

    for a, b, z in elements:
        if z == 0:
            continue
        admittance = 1.0 / z
        y[a, a] += admittance
        if b != ground:
            y[b, b] += admittance
            y[a, b] -= admittance
            y[b, a] -= admittance

    for k, (a, b) in enumerate(shorts):
        row = n_nodes + k
        y[a, row] += 1.0
        y[row, a] += 1.0
        if b != ground:
            y[b, row] -= 1.0
            y[row, b] -= 1.0

    rhs = np.zeros(size, dtype=complex)
    rhs[load_node] = 1.0
    try:
        v = np.linalg.solve(y, rhs)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"Singular network at {f:g} Hz") from exc
    return complex(v[load_node])


def target_impedance(vdd: float, ripple_fraction: float, delta_i: float) -> float:
    """Classic flat target: allowed ripple voltage over the worst-case current step."""
    if vdd <= 0 or ripple_fraction <= 0 or delta_i <= 0:
        raise ModelError("Target impedance needs positive vdd, ripple fraction and current step")
    return vdd * ripple_fraction / delta_i


def violations_above(profile: ImpedanceProfile, z_target: float) -> List[Tuple[float, float]]:
    mask = profile.magnitudes > z_target
    return [(float(f), float(m)) for f, m in zip(profile.frequencies[mask], profile.magnitudes[mask])]
