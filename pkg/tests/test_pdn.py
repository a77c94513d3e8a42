from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from darksim.errors import ModelError
from darksim.pdn import (
    CoreBranch,
    ImpedanceProfile,
    PdnNetwork,
    PdnStage,
    Spacing,
    Topology,
    bypass,
    dc_resistance,
    impedance_at,
    impedance_sweep,
    nodal_impedance_at,
    peak_impedance,
    target_impedance,
    violations_above,
)


def _make_rc_network() -> PdnNetwork:
    return PdnNetwork(
        vr_output_resistance=0.0,
        stages=(PdnStage(series_resistance=1e-3),),
        cores=(CoreBranch(gate_resistance=1e-3, die_grid_resistance=0.0, mim_cap=1e-6),),
    )


def test_resistive_network_matches_dc_resistance() -> None:
    network = PdnNetwork(
        vr_output_resistance=0.5e-3,
        stages=(PdnStage(series_resistance=0.3e-3), PdnStage(series_resistance=0.6e-3)),
        cores=(CoreBranch(gate_resistance=2e-3, die_grid_resistance=0.8e-3),) * 2,
    )

    z = impedance_at(network, 1e6)

    assert z.real == pytest.approx(dc_resistance(network))
    assert z.imag == pytest.approx(0.0, abs=1e-15)
    assert dc_resistance(network) == pytest.approx(4.2e-3)


def test_rc_network_matches_closed_form() -> None:
    network = _make_rc_network()
    f = 10e3
    z_cap = 1.0 / (1j * 2 * math.pi * f * 1e-6)
    expected = (2e-3 * z_cap) / (2e-3 + z_cap)

    assert impedance_at(network, f) == pytest.approx(expected, rel=1e-12)


def test_ladder_and_nodal_solve_agree(reference_platform) -> None:
    network = reference_platform.network
    for net in (network, bypass(network)):
        for f in (1e3, 4.7e4, 1e6, 3.3e7, 1e9):
            ladder = impedance_at(net, f)
            nodal = nodal_impedance_at(net, f)
            assert abs(ladder - nodal) / abs(nodal) < 1e-9


def _random_network(rng: np.random.Generator) -> PdnNetwork:
    stages = []
    for _ in range(int(rng.integers(1, 9))):
        has_cap = bool(rng.random() < 0.7)
        stages.append(
            PdnStage(
                series_resistance=float(rng.uniform(0.1e-3, 1e-3)),
                series_inductance=float(rng.uniform(1e-12, 1e-9)),
                shunt_cap=float(rng.uniform(1e-7, 1e-3)) if has_cap else 0.0,
                cap_esr=float(rng.uniform(0.1e-3, 2e-3)) if has_cap else 0.0,
                cap_esl=float(rng.uniform(0.0, 1e-12)) if has_cap else 0.0,
            )
        )
    cores = tuple(
        CoreBranch(
            gate_resistance=float(rng.uniform(0.5e-3, 3e-3)),
            die_grid_resistance=float(rng.uniform(0.0, 1e-3)),
            mim_cap=float(rng.uniform(1e-9, 1e-8)),
            mim_esr=float(rng.uniform(0.5e-3, 2e-3)),
        )
        for _ in range(int(rng.integers(1, 5)))
    )
    return PdnNetwork(vr_output_resistance=float(rng.uniform(0.1e-3, 1e-3)), stages=tuple(stages), cores=cores)


def test_ladder_matches_nodal_solve_on_random_networks() -> None:
    rng = np.random.default_rng(2024)
    for _ in range(50):
        network = _random_network(rng)
        for net in (network, bypass(network)):
            for f in (1e3, 1e5, 1e7, 1e9):
                assert impedance_at(net, f) == pytest.approx(nodal_impedance_at(net, f), rel=1e-9)
            assert abs(impedance_at(net, 1.0)) == pytest.approx(dc_resistance(net), rel=1e-3)


def test_nodal_solve_handles_zero_series_elements() -> None:
    network = PdnNetwork(
        vr_output_resistance=0.0,
        stages=(PdnStage(series_resistance=0.0, shunt_cap=1e-6, cap_esr=1e-3),),
        cores=(CoreBranch(gate_resistance=1e-3, die_grid_resistance=0.0, mim_cap=1e-9),),
    )

    assert nodal_impedance_at(network, 1e5) == pytest.approx(impedance_at(network, 1e5), rel=1e-9)


def test_bypass_merges_core_branches(reference_platform) -> None:
    bypassed = bypass(reference_platform.network)

    assert bypassed.topology is Topology.BYPASSED
    assert len(bypassed.cores) == 1
    merged = bypassed.cores[0]
    assert merged.gate_resistance == 0.0
    assert merged.die_grid_resistance == pytest.approx(0.2e-3)
    assert merged.mim_cap == pytest.approx(20e-9)
    assert merged.mim_esr == pytest.approx(0.25e-3)
    assert bypassed.stages == reference_platform.network.stages


def test_bypassed_dc_resistance_equals_load_line(reference_platform) -> None:
    r_dc = dc_resistance(bypass(reference_platform.network))

    assert r_dc == pytest.approx(reference_platform.guardband.load_line.r_ll, rel=0.05)


def test_bypass_lowers_peak_impedance_about_twofold(reference_platform) -> None:
    network = reference_platform.network
    _, z_gated = peak_impedance(impedance_sweep(network))
    _, z_bypassed = peak_impedance(impedance_sweep(bypass(network)))

    assert 1.8 <= z_gated / z_bypassed <= 2.2


def test_bypassed_never_exceeds_gated(reference_platform) -> None:
    network = reference_platform.network

    gated = impedance_sweep(network, 1e3, 1e9, 100)
    bypassed = impedance_sweep(bypass(network), 1e3, 1e9, 100)

    assert np.all(bypassed.magnitudes <= gated.magnitudes)


def _perturbed(network: PdnNetwork, rng: np.random.Generator) -> PdnNetwork:
    def scale() -> float:
        return float(rng.uniform(0.8, 1.2))

    stages = tuple(
        replace(
            s,
            series_resistance=s.series_resistance * scale(),
            series_inductance=s.series_inductance * scale(),
            shunt_cap=s.shunt_cap * scale(),
        )
        for s in network.stages
    )
    cores = tuple(
        replace(c, gate_resistance=c.gate_resistance * scale(), mim_cap=c.mim_cap * scale()) for c in network.cores
    )
    return replace(network, stages=stages, cores=cores)


def test_dominance_and_passivity_on_perturbed_networks(reference_platform) -> None:
    rng = np.random.default_rng(7)
    for _ in range(20):
        network = _perturbed(reference_platform.network, rng)
        gated = impedance_sweep(network, 1e3, 1e9, 60)
        bypassed = impedance_sweep(bypass(network), 1e3, 1e9, 60)

        assert np.all(bypassed.magnitudes <= gated.magnitudes)
        for net in (network, bypass(network)):
            for f in (1e3, 1e6, 1e8):
                assert impedance_at(net, f).real >= 0
                assert nodal_impedance_at(net, f) == pytest.approx(impedance_at(net, f), rel=1e-9)


def test_bypass_twice_is_rejected(reference_platform) -> None:
    with pytest.raises(ModelError):
        bypass(bypass(reference_platform.network))


def test_gated_topology_requires_gate_resistance() -> None:
    with pytest.raises(ModelError):
        PdnNetwork(
            vr_output_resistance=0.0,
            stages=(PdnStage(series_resistance=1e-3),),
            cores=(CoreBranch(gate_resistance=0.0, die_grid_resistance=1e-3),),
        )


def test_stage_without_cap_rejects_esr() -> None:
    with pytest.raises(ModelError):
        PdnStage(series_resistance=1e-3, cap_esr=1e-3)


def test_sweep_spacing_and_bounds() -> None:
    network = _make_rc_network()

    log_profile = impedance_sweep(network, 1e3, 1e6, 4, Spacing.LOG)
    linear_profile = impedance_sweep(network, 1e3, 1e6, 4, Spacing.LINEAR)

    assert log_profile.frequencies == pytest.approx([1e3, 1e4, 1e5, 1e6])
    assert linear_profile.frequencies == pytest.approx([1e3, 334e3, 667e3, 1e6])
    assert len(log_profile) == 4


@pytest.mark.parametrize(("f_min", "f_max", "points"), [(0.0, 1e6, 10), (1e6, 1e3, 10), (1e3, 1e6, 1)])
def test_sweep_rejects_bad_ranges(f_min: float, f_max: float, points: int) -> None:
    with pytest.raises(ModelError):
        impedance_sweep(_make_rc_network(), f_min, f_max, points)


def test_impedance_at_rejects_non_positive_frequency() -> None:
    with pytest.raises(ModelError):
        impedance_at(_make_rc_network(), 0.0)


def test_peak_and_violations() -> None:
    profile = ImpedanceProfile(
        frequencies=np.array([1e3, 1e4, 1e5]),
        magnitudes=np.array([1e-3, 3e-3, 2e-3]),
        phases=np.zeros(3),
    )

    assert peak_impedance(profile) == (1e4, 3e-3)
    assert violations_above(profile, 1.5e-3) == [(1e4, 3e-3), (1e5, 2e-3)]


def test_profile_requires_increasing_frequencies() -> None:
    with pytest.raises(ModelError):
        ImpedanceProfile(frequencies=np.array([1e4, 1e3]), magnitudes=np.ones(2), phases=np.zeros(2))


def test_target_impedance() -> None:
    assert target_impedance(1.0, 0.05, 50.0) == pytest.approx(1e-3)
    with pytest.raises(ModelError):
        target_impedance(1.0, 0.0, 50.0)
