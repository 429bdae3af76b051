"""Acceptance criteria 1-8, one test per criterion with a PASS/FAIL line each."""
from __future__ import annotations

import time

import numpy as np
from conftest import rescale_model
from oracles import grid_minimize_3, incremental_objective

from crawler_ris.continuum import ContinuumModel, converged_cycle_displacement
from crawler_ris.dissipation import (DissipationSpec, R_value, check_star, eval_R, psi,
                                     psi_regularity, reduce_shape)
from crawler_ris.model import CrawlerModel, assemble, chi
from crawler_ris.oracle import (continuum_homogeneous, strategy_model, strategy_result,
                                three_point_regime, two_point_constant, two_point_model)
from crawler_ris.solver import SolverConfig, energy_balance, simulate, step, stress_violation
from crawler_ris.stasis import NONNEG, NONPOS, box_vertices_on_section, build_geometry
from crawler_ris.timeprog import TimeProgram

ZERO_TOL = 1e-9


def _error(sim: float, exact: float) -> float:
    """Relative error, or absolute error when the reference is zero."""
    return abs(sim - exact) / abs(exact) if exact != 0 else abs(sim - exact)


def _steady_displacement(model, spu, x0="relaxed", cycles=2):
    traj = simulate(model, SolverConfig(steps_per_unit_time=spu), x0, 0.0, float(cycles))
    return traj, traj.displacement(cycles - 1.0, float(cycles))


def test_criterion_1_two_point_constant_friction(record_criterion):
    cases = [(1.0, 2.0, 1.0, 3.0), (1.0, 1.0, 2.0, 3.0), (2.0, 1.5, 0.5, 2.0),
             (1.0, 3.0, 1.0, 1.5), (0.5, 1.0, 4.0, 3.0)]
    worst_err, worst_time, sides = 0.0, 0.0, set()
    for k, mm, mp, dL in cases:
        exact = two_point_constant(k, mm, mp, dL).per_cycle_displacement
        sides.add(exact != 0)
        t0 = time.perf_counter()
        _, disp = _steady_displacement(two_point_model(k, mm, mp, dL), 10_000)
        worst_time = max(worst_time, time.perf_counter() - t0)
        err = _error(disp, exact)
        worst_err = max(worst_err, err if exact else err / ZERO_TOL * 1e-3)
    ok = worst_err <= 1e-3 and worst_time < 1.0 and sides == {True, False}
    record_criterion(1, ok, f"worst error {worst_err:.2e}, slowest case {worst_time:.3f}s")
    assert ok


def test_criterion_2_strategies(record_criterion):
    grid = [0.5, 1.5, 2.5, 3.5, 5.0]
    k = mu = 1.0
    worst_err, worst_onset, checked = 0.0, 0.0, 0
    t0 = time.perf_counter()
    for which in "ABC":
        for r in grid:
            L_max = r * mu / k
            ref = strategy_result(which, k, mu, L_max)
            if ref.boundary:
                continue
            traj, disp = _steady_displacement(strategy_model(which, k, mu, L_max), 10_000)
            exact = ref.per_cycle_displacement
            err = _error(disp, exact)
            worst_err = max(worst_err, err if exact else err / ZERO_TOL * 1e-3)
            onsets = np.array([o["t"] for o in traj.slip_onsets() if 1.0 <= o["t"] < 2.0])
            for ts in ref.switch_times.values():
                d = np.min(np.abs(onsets - (1.0 + ts))) if onsets.size else np.inf
                worst_onset = max(worst_onset, d)
                checked += 1
    elapsed = time.perf_counter() - t0
    ok = worst_err <= 1e-3 and worst_onset <= 1e-4 and elapsed < 5.0 and checked > 0
    record_criterion(2, ok, f"worst error {worst_err:.2e}, worst onset offset {worst_onset:.2e} "
                            f"({checked} switch times), total {elapsed:.2f}s")
    assert ok


def test_criterion_3_continuum(record_criterion):
    cfg = SolverConfig(steps_per_unit_time=1000)
    above = [(1.0, 1.0, 2.5, 1.0, 2.0), (1.0, 1.0, 1.7, 1.0, 3.0), (2.0, 1.0, 4.0, 1.0, 1.5)]
    below = [(1.0, 1.0, 2.0, 1.0, 0.8)]
    t0 = time.perf_counter()
    rel, zero = [], []
    for k, l, mm, mp, de in above + below:
        assert (de > mp * l / k) == ((k, l, mm, mp, de) in above)
        c = ContinuumModel.homogeneous(k, l, mm, mp, TimeProgram.triangle(0.0, de), 200)
        disp = converged_cycle_displacement(c, cfg, [200])[0]
        exact = continuum_homogeneous(k, l, mm, mp, de)
        (rel if exact else zero).append(_error(disp, exact))
    elapsed = time.perf_counter() - t0
    ok = max(rel) <= 0.01 and max(zero) <= ZERO_TOL and elapsed < 30.0
    record_criterion(3, ok, f"relative errors {[f'{e:.2e}' for e in rel]}, "
                            f"below threshold {max(zero):.1e}, {elapsed:.1f}s")
    assert ok


def test_criterion_4_stasis_geometry(record_criterion):
    r = np.random.default_rng(2024)
    mismatches, pairs = [], 0
    while pairs < 20:
        mm, mp = r.uniform(0.2, 5.0, 2)
        ratio = mm / mp
        if abs(ratio - 2) < 0.05 or abs(ratio - 0.5) < 0.0125:
            continue
        pairs += 1
        geo = build_geometry(DissipationSpec.constant(mm, mp, 3), 0.0)
        one_way = three_point_regime(mm, mp) == "one-way"
        labels = [s for _, _, s in geo.polygon_edges()]
        if one_way:
            good = len(geo.vertices) == 3 and set(labels) == {NONNEG if mm > mp else NONPOS}
        else:
            alternating = all(a != b for a, b in zip(labels, labels[1:] + labels[:1]))
            good = len(geo.vertices) == 6 and alternating
        if not good:
            mismatches.append((mm, mp))
    ok = not mismatches
    record_criterion(4, ok, f"{pairs} pairs, {len(mismatches)} mismatches")
    assert ok


def test_criterion_5_condition_vs_box_vertices(record_criterion):
    r = np.random.default_rng(55)
    pairs = [tuple(r.integers(1, 7, 2).astype(float)) for _ in range(50)]
    pairs += [tuple(r.uniform(0.1, 5.0, 2)) for _ in range(50)]
    disagreements, failures, total = 0, 0, 0
    for mm, mp in pairs:
        for n in range(2, 11):
            holds = check_star(DissipationSpec.constant(mm, mp, n), 0.0).holds
            on_section = box_vertices_on_section(np.full(n, mm), np.full(n, mp)).size > 0
            disagreements += holds == on_section
            failures += not holds
            total += 1
    ok = disagreements == 0 and failures > 0
    record_criterion(5, ok, f"{total} checks, {failures} violations found, "
                            f"{disagreements} disagreements")
    assert ok


def test_criterion_6_incremental_step_vs_grid(record_criterion):
    r = np.random.default_rng(0)
    gaps, dists, done = [], [], 0
    while done < 50:
        k = r.uniform(0.5, 1.5, 2)
        L0 = r.uniform(-0.5, 0.5, 2)
        L1 = L0 + r.uniform(-0.8, 0.8, 2)
        mm, mp = r.uniform(0.05, 0.6, 3), r.uniform(0.05, 0.6, 3)
        m = CrawlerModel.chain(3, k, [TimeProgram([0, 1], [a, b]) for a, b in zip(L0, L1)],
                               list(mm), list(mp))
        e, d = assemble(m), DissipationSpec.from_model(m)
        x0 = chi(L0, 0.0)
        res = step(e, d, 0.0, 1.0, x0)
        # keep instances whose minimiser is inside the search cube and non-trivial
        if np.max(np.abs(res.increment)) > 0.45 or not np.any(res.increment):
            continue
        done += 1
        tau0 = e.load(1.0) - 2 * e.A @ x0
        ug, fg = grid_minimize_3(e.A, tau0, mm, mp, 0.5, 2e-3)
        fs = incremental_objective(e.A, tau0, mm, mp, res.increment)[0]
        gaps.append(abs(fg - fs))
        dists.append(np.max(np.abs(ug - res.increment)))
    ok = max(gaps) <= 1e-5 and max(dists) <= 2 * 2e-3
    record_criterion(6, ok, f"max objective gap {max(gaps):.2e}, max distance {max(dists):.2e}")
    assert ok


def test_criterion_7_property_suite(record_criterion):
    r = np.random.default_rng(7)
    checks = {}
    # 1-homogeneity, convexity and R_sh <= R on random samples
    hom = conv = red = True
    for _ in range(300):
        n = int(r.integers(2, 7))
        mm, mp = r.uniform(0.05, 3, n), r.uniform(0.05, 3, n)
        u, v = r.normal(size=n) * 3, r.normal(size=n) * 3
        lam, th = r.uniform(0, 10), r.uniform()
        hom &= np.isclose(R_value(mm, mp, lam * u), lam * R_value(mm, mp, u), rtol=1e-12, atol=1e-12)
        conv &= (R_value(mm, mp, (1 - th) * u + th * v)
                 <= (1 - th) * R_value(mm, mp, u) + th * R_value(mm, mp, v) + 1e-12)
        w = np.diff(u)
        red &= reduce_shape(mm, mp, w).value <= R_value(mm, mp, chi(w, r.normal())) + 1e-12
    checks["homogeneity"], checks["convexity"], checks["R_sh<=R"] = hom, conv, red
    # Psi-regularity bounds on the strategy schedules
    psi_ok = True
    for which in "ABC":
        model = strategy_model(which, 1.0, 1.0, 3.0)
        d = DissipationSpec.from_model(model)
        reg = psi_regularity(d)
        for _ in range(100):
            t, u = r.uniform(0, 2), r.normal(size=2)
            R = eval_R(d, t, u)
            psi_ok &= reg.alpha_lower * psi(d, u) - 1e-12 <= R <= reg.alpha_upper * psi(d, u) + 1e-12
    checks["psi_bounds"] = psi_ok
    # rate independence, stress admissibility, monotone dissipation
    cfg = SolverConfig(steps_per_unit_time=2000)
    rate, stress, mono = 0.0, 0.0, True
    for model in (two_point_model(1.0, 2.0, 1.0, 3.0), strategy_model("A", 1.0, 1.0, 4.0),
                  strategy_model("C", 1.0, 1.0, 3.0)):
        a = simulate(model, cfg, "relaxed", 0.0, 2.0)
        b = simulate(rescale_model(model, 2.0), SolverConfig(steps_per_unit_time=4000),
                     "relaxed", 0.0, 1.0)
        rate = max(rate, float(np.max(np.abs(a.x - b.x))))
        stress = max(stress, float(stress_violation(a, DissipationSpec.from_model(model)).max()))
        mono &= bool(np.all(np.diff(a.dissipated) >= 0))
    checks["rate_independence"] = rate <= 1e-8
    checks["stress_in_C"] = stress <= 10 * cfg.prox_tol
    checks["monotone_dissipation"] = mono
    # energy-balance defect is first order in the step size
    model = two_point_model(1.0, 2.0, 1.0, 3.0)
    defects = [abs(energy_balance(simulate(model, SolverConfig(steps_per_unit_time=s), "relaxed",
                                           0.0, 1.0), model)["cumulative_defect"])
               for s in (500, 1000)]
    ratio = defects[1] / defects[0]
    checks["energy_balance_ratio"] = 0.3 <= ratio <= 0.7
    # second half-cycle mirrors the first with the points exchanged
    sym = 0.0
    for which in "AB":
        for L_max in (1.5, 2.5, 3.5, 5.0):
            traj = simulate(strategy_model(which, 1.0, 1.0, L_max),
                            SolverConfig(steps_per_unit_time=10_000), "relaxed", 0.0, 2.0)
            dx = np.diff(traj.x, axis=0)
            a, h, b = traj.index_of(1.0), traj.index_of(1.5), traj.index_of(2.0)
            sym = max(sym, float(np.max(np.abs(dx[h:b, 0] - dx[a:h, 1]))),
                      float(np.max(np.abs(dx[h:b, 1] - dx[a:h, 0]))))
    checks["symmetry"] = sym <= 1e-9
    failed = [name for name, good in checks.items() if not good]
    ok = not failed
    record_criterion(7, ok, f"{len(checks)} properties, energy ratio {ratio:.3f}, "
                            f"rate gap {rate:.1e}, symmetry gap {sym:.1e}"
                            + (f", failed: {failed}" if failed else ""))
    assert ok


def test_criterion_8_nonuniqueness(record_criterion):
    model = two_point_model(1.0, 1.0, 1.0, 3.0)
    all_flagged, certified = True, True
    for lam in (0.0, 0.5, 1.0):
        cfg = SolverConfig(steps_per_unit_time=1000, tie_break=lam)
        traj = simulate(model, cfg, "relaxed", 0.0, 2.0)
        slip = traj.slip_steps()
        all_flagged &= bool(slip.any() and np.all(traj.flags["nonunique_vm"][1:][slip]))
        certified &= bool(traj.residuals.max() <= cfg.prox_tol)
    ok = all_flagged and certified
    record_criterion(8, ok, f"every slip step flagged: {all_flagged}, "
                            f"certificate for lambda in (0, 1/2, 1): {certified}")
    assert ok
