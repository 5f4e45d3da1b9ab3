"""Scenario execution: conventional oracle vs bundle pipeline, check by check.

Every check produces one record (id, max residual, tolerance, pass/fail,
grid location of the worst residual).  A numerical failure inside a check is
surfaced as a failed record, never as a silent pass.  Scenarios share no
mutable state, so suites can run them in any order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Dict, List, Tuple

import numpy as np

from .bundle import (
    MorphismAlongPath,
    SectionAlongPath,
    bundle_adjoint_map,
    lift_operator_on_grid,
    lift_trajectory,
    module_combine,
    morphism_as_section_operator,
    section_operator_as_morphism,
)
from .dynamics import PropagatorGrid, Trajectory, conjugate_by, propagate_states
from .hilbert import max_abs
from .pictures import PictureTransform, is_integral_of_motion
from .report import CheckRecord, ScenarioReport
from .scenario import ScenarioConfig
from .transport import (
    EvolutionTransport,
    MatrixBundleHamiltonian,
    check_transport_axioms,
    integrate_bundle_schrodinger,
)

__all__ = ["run_scenario", "ScenarioArtifacts", "build_artifacts"]


@dataclass
class ScenarioArtifacts:
    """Everything a check needs, computed once per scenario."""

    cfg: ScenarioConfig
    propagators: PropagatorGrid
    trajectory: Trajectory
    lifted: SectionAlongPath
    bundle_generator: MatrixBundleHamiltonian
    bundle_section: SectionAlongPath
    transport: EvolutionTransport
    frames: np.ndarray            # l(t_k)
    inverse_frames: np.ndarray    # l(t_k)^-1
    lifted_observables: Dict[str, MorphismAlongPath]
    rho0: np.ndarray
    rho_conventional: np.ndarray  # (N, n, n)
    density_lifted: np.ndarray    # (N, n, n)
    density_transported: np.ndarray  # (N, n, n)
    transported_section: SectionAlongPath

    @property
    def times(self) -> np.ndarray:
        return self.cfg.times


def build_artifacts(cfg: ScenarioConfig) -> ScenarioArtifacts:
    times = cfg.times
    t0 = float(times[0])
    l = cfg.trivialization
    l.validate_on_grid(times)

    propagators = PropagatorGrid(cfg.hamiltonian, times, cfg.constants)
    states = propagate_states(propagators.step_matrices, cfg.initial_state)
    trajectory = Trajectory(times, states)
    lifted = lift_trajectory(l, times, states)

    bundle_generator = MatrixBundleHamiltonian(
        cfg.hamiltonian, l, times, cfg.constants,
        include_derivative_term=not cfg.faults.get("drop_trivialization_derivative", False))
    bundle_section = integrate_bundle_schrodinger(
        bundle_generator, lifted.values[0], t0, float(times[-1]), cfg.step)

    transport = EvolutionTransport(propagators, l)
    frames = transport.frames
    inverse_frames = transport.inverse_frames

    lifted_observables = {
        name: lift_operator_on_grid(l, times, stack) for name, stack in cfg.observables
    }

    if cfg.initial_density is not None:
        rho0 = cfg.initial_density
    else:
        psi0 = cfg.initial_state
        rho0 = np.outer(psi0, psi0.conj()) / np.vdot(psi0, psi0).real
    rho_conventional = conjugate_by(propagators.prefixes, rho0, propagators.inverse_prefixes)
    density_lifted = np.linalg.solve(frames, rho_conventional @ frames)
    p0 = np.linalg.solve(frames[0], rho0 @ frames[0])
    density_transported = conjugate_by(
        transport.matrices_from(t0), p0, transport.matrices_into(t0))

    transported_values = np.einsum("kij,j->ki", transport.matrices_from(t0), lifted.values[0])
    transported_section = SectionAlongPath(times, transported_values)

    return ScenarioArtifacts(
        cfg=cfg, propagators=propagators, trajectory=trajectory, lifted=lifted,
        bundle_generator=bundle_generator, bundle_section=bundle_section,
        transport=transport, frames=frames, inverse_frames=inverse_frames,
        lifted_observables=lifted_observables, rho0=rho0,
        rho_conventional=rho_conventional, density_lifted=density_lifted,
        density_transported=density_transported, transported_section=transported_section)


# --- helpers ----------------------------------------------------------------

def _worst(times: np.ndarray, per_time: np.ndarray) -> Tuple[float, float]:
    idx = int(np.argmax(per_time))
    return float(per_time[idx]), float(times[idx])


def _apply(mats: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    return np.einsum("kij,kj->ki", mats, vecs)


def _pair(us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    return np.einsum("ki,ki->k", us.conj(), vs)


def _fibre_means(frames: np.ndarray, morphisms: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Grid field of fibre mean values <Psi|A Psi>_t / <Psi|Psi>_t."""
    y = _apply(frames, values)
    z = _apply(frames, _apply(morphisms, values))
    return _pair(y, z) / _pair(y, y).real


def _coarse_indices(n_times: int, count: int = 9) -> np.ndarray:
    return np.unique(np.round(np.linspace(0, n_times - 1, count)).astype(int))


def _sample_triples(times: np.ndarray, seed: int) -> List[Tuple[float, float, float]]:
    idx = _coarse_indices(times.size)
    triples = [tuple(times[list(c)]) for c in combinations_with_replacement(idx, 3)]
    rng = np.random.default_rng([seed, 0x73])
    for _ in range(40):
        picks = np.sort(rng.integers(0, times.size, size=3))
        triples.append(tuple(times[picks]))
    return [(float(r), float(s), float(t)) for (r, s, t) in triples]


# --- individual checks --------------------------------------------------------

def _check_state_equivalence(art: ScenarioArtifacts, tol: float,
                             series: Dict[str, np.ndarray]) -> CheckRecord:
    residual = np.max(np.abs(art.bundle_section.values - art.lifted.values), axis=1)
    series["state_equivalence_residual"] = residual
    worst, at = _worst(art.times, residual)
    return CheckRecord("state_equivalence", worst, tol, worst <= tol, at)


def _check_norm_drift(art: ScenarioArtifacts, tol: float,
                      series: Dict[str, np.ndarray]) -> CheckRecord:
    norms = art.trajectory.norm_sq()
    series["norm_sq"] = norms
    drift = np.abs(norms - norms[0])
    worst, at = _worst(art.times, drift)
    return CheckRecord("norm_drift", worst, tol, worst <= tol, at)


def _check_transport_axioms(art: ScenarioArtifacts, which: str, tol: float) -> CheckRecord:
    triples = _sample_triples(art.times, art.cfg.seed)
    report = check_transport_axioms(art.transport, triples, tol)
    if which == "transport_identity":
        worst, at = report.max_identity_deviation, report.worst_identity_time
        return CheckRecord("transport_identity", worst, tol, worst <= tol, at,
                           detail=f"{len(triples)} sampled triples")
    worst = report.max_composition_deviation
    at = report.worst_composition_triple[2]
    return CheckRecord("transport_composition", worst, tol, worst <= tol, at,
                       detail=f"worst triple {report.worst_composition_triple}")


def _check_mean_value_invariance(art: ScenarioArtifacts, tol: float,
                                 series: Dict[str, np.ndarray]) -> CheckRecord:
    psi = art.trajectory.states
    worst, worst_at, worst_obs = -1.0, None, ""
    for name, stack in art.cfg.observables:
        conv = _pair(psi, _apply(stack, psi)) / _pair(psi, psi).real
        bundle = _fibre_means(art.frames, art.lifted_observables[name].matrices,
                              art.lifted.values)
        series[f"mean_conventional:{name}"] = conv.real
        series[f"mean_bundle:{name}"] = bundle.real
        dev, at = _worst(art.times, np.abs(conv - bundle))
        if dev > worst:
            worst, worst_at, worst_obs = dev, at, name
    return CheckRecord("mean_value_invariance", worst, tol, worst <= tol, worst_at,
                       detail=f"worst observable: {worst_obs}")


def _check_hermiticity_correspondence(art: ScenarioArtifacts, tol: float) -> CheckRecord:
    frames, inv = art.frames, art.inverse_frames
    worst, worst_at, worst_obs = -1.0, None, ""
    for name, stack in art.cfg.observables:
        lifted = art.lifted_observables[name].matrices
        sandwich = (frames @ lifted) @ inv
        bundle_adj = (inv @ np.swapaxes(sandwich.conj(), -2, -1)) @ frames
        adjoints = np.swapaxes(stack.conj(), -2, -1)
        lift_of_adj = np.linalg.solve(frames, adjoints @ frames)
        per_time = np.max(np.abs(bundle_adj - lift_of_adj), axis=(1, 2))
        dev, at = _worst(art.times, per_time)
        if dev > worst:
            worst, worst_at, worst_obs = dev, at, name
    return CheckRecord("hermiticity_correspondence", worst, tol, worst <= tol, worst_at,
                       detail=f"worst observable: {worst_obs}")


def _check_unitary_bundle_map(art: ScenarioArtifacts, tol: float) -> CheckRecord:
    times = art.times
    idx = _coarse_indices(times.size)
    l = art.cfg.trivialization
    worst, worst_at = -1.0, None
    for i in idx:
        for j in idx:
            s, t = float(times[i]), float(times[j])
            forward = art.transport.matrix_by_index(i, j)   # fibre(t) -> fibre(s)
            adj = bundle_adjoint_map(l, s, t, forward)      # fibre(s) -> fibre(t)
            dev = max_abs(adj - art.transport.matrix_by_index(j, i))
            if dev > worst:
                worst, worst_at = dev, t
    return CheckRecord("unitary_bundle_map", worst, tol, worst <= tol, worst_at)


def _picture_data(art: ScenarioArtifacts):
    t0 = float(art.times[0])
    into_t0 = art.transport.matrices_into(t0)
    from_t0 = art.transport.matrices_from(t0)
    psi_t = art.transported_section.values
    psi_h = _apply(into_t0, psi_t)
    v = PictureTransform.random_unitary(art.times, art.cfg.dimension, art.cfg.seed,
                                        reference_time=t0)
    return t0, into_t0, from_t0, psi_t, psi_h, v


def _check_picture_invariance(art: ScenarioArtifacts, tol: float,
                              series: Dict[str, np.ndarray]) -> CheckRecord:
    t0, into_t0, from_t0, psi_t, psi_h, v = _picture_data(art)
    frames = art.frames
    frame0 = np.broadcast_to(frames[0], frames.shape)
    worst, worst_at, worst_obs = -1.0, None, ""
    for name, _ in art.cfg.observables:
        a_lift = art.lifted_observables[name].matrices
        schro = _fibre_means(frames, a_lift, psi_t)
        a_h = (into_t0 @ a_lift) @ from_t0
        heis = _fibre_means(frame0, a_h, psi_h)
        psi_v = _apply(v.matrices, psi_t)
        a_v = np.linalg.solve(
            np.swapaxes(v.matrices.conj(), -2, -1),
            np.swapaxes((v.matrices @ a_lift).conj(), -2, -1))
        a_v = np.swapaxes(a_v.conj(), -2, -1)
        x1 = np.linalg.solve(v.matrices, psi_v[..., None])[..., 0]
        x2 = np.linalg.solve(v.matrices, _apply(a_v, psi_v)[..., None])[..., 0]
        y = _apply(frames, x1)
        z = _apply(frames, x2)
        general = _pair(y, z) / _pair(y, y).real
        series[f"mean_heisenberg:{name}"] = heis.real
        dev = np.maximum(np.abs(schro - heis), np.abs(schro - general))
        d, at = _worst(art.times, dev)
        if d > worst:
            worst, worst_at, worst_obs = d, at, name
    return CheckRecord("picture_invariance", worst, tol, worst <= tol, worst_at,
                       detail=f"worst observable: {worst_obs}")


def _check_heisenberg_constancy(art: ScenarioArtifacts, tol: float) -> CheckRecord:
    _, _, _, psi_t, psi_h, _ = _picture_data(art)
    per_time = np.max(np.abs(psi_h - psi_t[0]), axis=1)
    worst, at = _worst(art.times, per_time)
    return CheckRecord("heisenberg_constancy", worst, tol, worst <= tol, at)


def _check_density_consistency(art: ScenarioArtifacts, tol: float,
                               series: Dict[str, np.ndarray]) -> CheckRecord:
    per_time = np.max(np.abs(art.density_transported - art.density_lifted), axis=(1, 2))
    series["density_residual"] = per_time
    worst, at = _worst(art.times, per_time)
    return CheckRecord("density_consistency", worst, tol, worst <= tol, at)


def _check_density_purity(art: ScenarioArtifacts, tol: float) -> CheckRecord:
    p = art.density_transported
    per_time = np.max(np.abs(p @ p - p), axis=(1, 2))
    worst, at = _worst(art.times, per_time)
    return CheckRecord("density_purity", worst, tol, worst <= tol, at)


def _check_fibre_trace(art: ScenarioArtifacts, tol: float) -> CheckRecord:
    traces = np.trace(art.density_transported, axis1=1, axis2=2)
    per_time = np.abs(traces - np.trace(art.rho0))
    worst, at = _worst(art.times, per_time)
    return CheckRecord("fibre_trace_preservation", worst, tol, worst <= tol, at)


def _check_module_dualities(art: ScenarioArtifacts, tol: float) -> CheckRecord:
    times = art.times[_coarse_indices(art.times.size)]
    n = art.cfg.dimension
    rng = np.random.default_rng([art.cfg.seed, 0x4D])
    worst = 0.0
    roundtrip_exact = True
    for _ in range(5):
        phi = SectionAlongPath(times, rng.normal(size=(times.size, n))
                               + 1j * rng.normal(size=(times.size, n)))
        psi = SectionAlongPath(times, rng.normal(size=(times.size, n))
                               + 1j * rng.normal(size=(times.size, n)))
        f = rng.normal(size=times.size) + 1j * rng.normal(size=times.size)
        g = rng.normal(size=times.size) + 1j * rng.normal(size=times.size)
        lhs = module_combine(f + g, phi, f - g, psi)
        rhs = module_combine(f, module_combine(1.0, phi, 1.0, psi),
                             g, module_combine(1.0, phi, -1.0, psi))
        worst = max(worst, max_abs(lhs.values - rhs.values))
        fg_phi = module_combine(f * g, phi, 0.0, psi)
        f_gphi = module_combine(f, module_combine(g, phi, 0.0, psi), 0.0, psi)
        worst = max(worst, max_abs(fg_phi.values - f_gphi.values))
        one_phi = module_combine(np.ones(times.size), phi, np.zeros(times.size), psi)
        if not np.array_equal(one_phi.values, phi.values):
            roundtrip_exact = False

        mats = rng.normal(size=(times.size, n, n)) + 1j * rng.normal(size=(times.size, n, n))
        morphism = MorphismAlongPath(times, mats)
        recovered = section_operator_as_morphism(
            lambda sec: morphism_as_section_operator(morphism, sec), times, n)
        if not np.array_equal(recovered.matrices, morphism.matrices):
            roundtrip_exact = False
    detail = "round trips exact" if roundtrip_exact else "round trips NOT exact"
    passed = worst <= tol and roundtrip_exact
    return CheckRecord("module_dualities", worst, tol, passed, None, detail=detail)


def _check_integrals_of_motion(art: ScenarioArtifacts, tol: float) -> CheckRecord:
    outcomes = []
    all_match = True
    worst = 0.0
    for cand in art.cfg.integral_candidates:
        report = is_integral_of_motion(
            cand.family, art.cfg.hamiltonian, art.transport, art.cfg.trivialization,
            art.times, tol, art.cfg.constants)
        match = report.certified == cand.expected and report.criteria_agree
        all_match = all_match and match
        if cand.expected:
            worst = max(worst, report.commutator_residual,
                        report.transport_residual or 0.0)
        outcomes.append(
            f"{cand.name}: certified={report.certified} expected={cand.expected} "
            f"residual={report.commutator_residual:.3e}")
    return CheckRecord("integrals_of_motion", worst, tol, all_match and worst <= tol,
                       None, detail="; ".join(outcomes))


def _check_physics_closed_form(art: ScenarioArtifacts, tol: float,
                               series: Dict[str, np.ndarray]) -> CheckRecord:
    spec = art.cfg.physics_check or {}
    omega = float(spec.get("omega", np.pi))
    states = art.trajectory.states
    flip = np.abs(states[:, 1]) ** 2 / art.trajectory.norm_sq()
    target = np.sin(omega * (art.times - art.times[0]) / 2.0) ** 2
    series["flip_probability"] = flip
    series["flip_probability_closed_form"] = target
    worst, at = _worst(art.times, np.abs(flip - target))
    return CheckRecord("physics_closed_form", worst, tol, worst <= tol, at,
                       detail=f"rabi flip vs sin^2({omega:g} t / 2)")


_CHECK_TABLE = {
    "state_equivalence": lambda art, tol, series: _check_state_equivalence(art, tol, series),
    "norm_drift": lambda art, tol, series: _check_norm_drift(art, tol, series),
    "transport_identity": lambda art, tol, series: _check_transport_axioms(
        art, "transport_identity", tol),
    "transport_composition": lambda art, tol, series: _check_transport_axioms(
        art, "transport_composition", tol),
    "mean_value_invariance": lambda art, tol, series: _check_mean_value_invariance(
        art, tol, series),
    "hermiticity_correspondence": lambda art, tol, series: _check_hermiticity_correspondence(
        art, tol),
    "unitary_bundle_map": lambda art, tol, series: _check_unitary_bundle_map(art, tol),
    "picture_invariance": lambda art, tol, series: _check_picture_invariance(art, tol, series),
    "heisenberg_constancy": lambda art, tol, series: _check_heisenberg_constancy(art, tol),
    "density_consistency": lambda art, tol, series: _check_density_consistency(
        art, tol, series),
    "density_purity": lambda art, tol, series: _check_density_purity(art, tol),
    "fibre_trace_preservation": lambda art, tol, series: _check_fibre_trace(art, tol),
    "module_dualities": lambda art, tol, series: _check_module_dualities(art, tol),
    "integrals_of_motion": lambda art, tol, series: _check_integrals_of_motion(art, tol),
    "physics_closed_form": lambda art, tol, series: _check_physics_closed_form(
        art, tol, series),
}


def run_scenario(cfg: ScenarioConfig) -> ScenarioReport:
    """Run the conventional oracle, the bundle pipeline, and all requested checks."""
    started = time.perf_counter()
    series: Dict[str, np.ndarray] = {}
    records: List[CheckRecord] = []
    try:
        art = build_artifacts(cfg)
    except Exception as exc:  # surface as a failed record, never a silent pass
        records.append(CheckRecord("setup", float("inf"), 0.0, False, None,
                                   detail=f"{type(exc).__name__}: {exc}"))
        return ScenarioReport(cfg.name, records, cfg.echo, {},
                              time.perf_counter() - started)

    series["time"] = cfg.times.copy()
    for check_id in cfg.checks:
        tol = cfg.tolerances[check_id]
        try:
            records.append(_CHECK_TABLE[check_id](art, tol, series))
        except Exception as exc:
            records.append(CheckRecord(check_id, float("inf"), tol, False, None,
                                       detail=f"{type(exc).__name__}: {exc}"))
    timeseries = {key: np.asarray(value, dtype=float).tolist()
                  for key, value in series.items()}
    return ScenarioReport(cfg.name, records, cfg.echo, timeseries,
                          time.perf_counter() - started)
