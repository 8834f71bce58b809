use super::*;
use crate::fom::{solve_steady_ns, solve_stokes, PicardOptions, StateVector};
use crate::residual::{collocated_residual, norm_inf, residual_norm2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p(re: f64, nu: f64) -> Parameter {
    Parameter::new(re, nu).unwrap()
}

/// Greedy-free model: snapshots at `params` in order, residual EIM from the
/// reduced solution at each new parameter.
fn build(grid: GridSpec, problem: Problem, params: &[Parameter]) -> ReducedModel {
    let mut m = ReducedModel::new(grid, problem, None).unwrap();
    let opts = OnlineOptions::default();
    for &mu in params {
        let snap = match problem {
            Problem::Stokes => solve_stokes(&grid, mu).unwrap().values,
            _ => {
                let (s, rep) = solve_steady_ns(&grid, mu, &StateVector::zeros(grid), PicardOptions::default()).unwrap();
                assert!(rep.converged);
                s.values
            }
        };
        let r = if m.n() > 0 {
            let sol = m.online_solve_steady(mu, opts).unwrap();
            Some(m.full_residual_of(mu, sol.final_coefficients(), None).unwrap())
        } else {
            None
        };
        m.geim_extend(&snap, TrainedPair { param: mu, time: None }).unwrap();
        if let Some(r) = r {
            m.eim_residual_extend(&r).unwrap();
        }
    }
    m
}

fn stokes_params() -> Vec<Parameter> {
    vec![p(10.0, 1.0), p(500.0, 3.0), p(80.0, 0.2), p(1500.0, 2.0)]
}

#[test]
fn first_basis_is_normalized() {
    let g = GridSpec::new(6, 6).unwrap();
    let m = build(g, Problem::Stokes, &[p(100.0, 1.0)]);
    assert_eq!(m.n(), 1);
    assert_eq!(m.m(), 1);
    assert!((m.sigma[0][0] - 1.0).abs() < 1e-14);
    let d = &m.functionals[0];
    assert!((d.eval_with(&g, |k| m.basis[0][k]) - 1.0).abs() < 1e-14);
}

#[test]
fn geim_triangularity_and_residual_identity() {
    let g = GridSpec::new(8, 8).unwrap();
    let m = build(g, Problem::Stokes, &stokes_params());
    let n = m.n();
    assert_eq!(m.m(), 2 * n - 1);
    for i in 0..n {
        // recompute from the descriptors rather than trusting the stored matrix
        for j in 0..n {
            let s = m.functionals[i].eval_with(&g, |k| m.basis[j][k]);
            assert!((s - m.sigma[i][j]).abs() <= 1e-12 * s.abs().max(1.0));
            if i == j {
                assert!((s - 1.0).abs() <= 1e-12, "σ_{i}(ξ_{i}) = {s}");
            } else if i < j {
                assert!(s.abs() <= 1e-12, "σ_{i}(ξ_{j}) = {s}");
            }
        }
    }
    let pts = m.residual_points();
    assert_eq!(pts.len(), n - 1);
    for (k, r) in m.residual_basis.iter().enumerate() {
        for (j, &x) in pts.iter().enumerate() {
            let want = if j == k { 1.0 } else { 0.0 };
            if j <= k {
                assert!((r[x] - want).abs() <= 1e-12, "r_{k}(x_{j}) = {}", r[x]);
            }
        }
    }
}

#[test]
fn snapshot_reproduction_at_trained_parameters() {
    let g = GridSpec::new(10, 10).unwrap();
    let params = stokes_params();
    let m = build(g, Problem::Stokes, &params);
    for &mu in &params {
        let truth = solve_stokes(&g, mu).unwrap().values;
        let sol = m.online_solve_steady(mu, OnlineOptions::default()).unwrap();
        assert_eq!(sol.rank, m.n());
        let rec = m.reconstruct(sol.final_coefficients()).unwrap();
        let err = rec.iter().zip(&truth).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / norm_inf(&truth);
        assert!(err <= 1e-10, "relative error {err:e} at {mu:?}");
    }
}

#[test]
fn single_snapshot_gives_unit_coefficient() {
    let g = GridSpec::new(8, 8).unwrap();
    let mu = p(200.0, 1.5);
    let snap = solve_stokes(&g, mu).unwrap().values;
    let m = build(g, Problem::Stokes, &[mu]);
    let sol = m.online_solve_steady(mu, OnlineOptions::default()).unwrap();
    // ξ₁ = snapshot / σ₁(snapshot)
    let scale = m.functionals[0].eval_with(&g, |k| snap[k]);
    assert!((sol.c[0][0] - scale).abs() <= 1e-10 * scale.abs());
}

#[test]
fn steady_ns_reproduction() {
    let g = GridSpec::new(8, 8).unwrap();
    let params = [p(20.0, 1.0), p(60.0, 0.5), p(100.0, 1.8)];
    let m = build(g, Problem::SteadyNs, &params);
    for &mu in &params {
        let (truth, _) = solve_steady_ns(&g, mu, &StateVector::zeros(g), PicardOptions::default()).unwrap();
        let sol = m.online_solve_steady(mu, OnlineOptions::default()).unwrap();
        assert!(sol.converged);
        let rec = m.reconstruct(sol.final_coefficients()).unwrap();
        let err = rec.iter().zip(&truth.values).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / norm_inf(&truth.values);
        assert!(err <= 1e-9, "relative error {err:e}");
    }
}

#[test]
fn geim_point_matches_exhaustive_search() {
    let g = GridSpec::new(6, 6).unwrap();
    let base = build(g, Problem::Stokes, &[p(50.0, 1.0), p(900.0, 3.0)]);
    let mu = p(300.0, 0.4);
    let snap = solve_stokes(&g, mu).unwrap().values;

    // oracle: interpolant by dense solve of σ_i(Wα) = σ_i(snap), then scan
    // every eligible unknown with a freshly built descriptor
    let n = base.n();
    let mut a = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = base.functionals[i].eval_with(&g, |k| base.basis[j][k]);
        }
        rhs[i] = base.functionals[i].eval_with(&g, |k| snap[k]);
    }
    // 2×2 Cramer
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let alpha = [
        (rhs[0] * a[1][1] - a[0][1] * rhs[1]) / det,
        (a[0][0] * rhs[1] - rhs[0] * a[1][0]) / det,
    ];
    let xi: Vec<f64> = (0..g.n_dofs())
        .map(|k| snap[k] - alpha[0] * base.basis[0][k] - alpha[1] * base.basis[1][k])
        .collect();
    let mut best = (usize::MAX, -1.0);
    for x in 0..g.n_dofs() {
        if x == g.gauge_index() || base.points.contains(x) {
            continue;
        }
        let d = crate::residual::FunctionalDescriptor::new(&g, x, mu, Problem::Stokes, None, &snap);
        let v = d.eval_with(&g, |k| xi[k]).abs();
        if v > best.1 {
            best = (x, v);
        }
    }
    let mut m = base.clone();
    let got = m.geim_extend(&snap, TrainedPair { param: mu, time: None }).unwrap();
    assert_eq!(got, best.0);
}

#[test]
fn eim_point_matches_exhaustive_search() {
    let g = GridSpec::new(6, 6).unwrap();
    let mut m = build(g, Problem::Stokes, &[p(50.0, 1.0), p(900.0, 3.0)]);
    let mu = p(300.0, 0.4);
    let sol = m.online_solve_steady(mu, OnlineOptions::default()).unwrap();
    let r = m.full_residual_of(mu, sol.final_coefficients(), None).unwrap();
    let r1 = m.residual_basis[0].clone();
    let x1 = m.residual_points()[0];
    let rr: Vec<f64> = r.iter().zip(&r1).map(|(a, b)| a - r[x1] * b).collect();
    let mut best = (usize::MAX, -1.0);
    for (x, v) in rr.iter().enumerate() {
        if x == g.gauge_index() || m.points.contains(x) {
            continue;
        }
        if v.abs() > best.1 {
            best = (x, v.abs());
        }
    }
    assert_eq!(m.eim_residual_extend(&r).unwrap(), best.0);
}

#[test]
fn tie_break_takes_lowest_index() {
    let g = GridSpec::new(3, 3).unwrap();
    let mut field = vec![0.0; g.n_dofs()];
    field[4] = -2.0;
    field[7] = 2.0;
    field[g.gauge_index()] = 9.0;
    let mut taken = CollocationSet::new();
    assert_eq!(argmax_eligible(&g, &field, &taken, &[]), Some((4, 2.0)));
    taken.push(crate::residual::CollocationPoint {
        dof: g.dof(4),
        origin: PointOrigin::Solution,
        step: 1,
    });
    assert_eq!(argmax_eligible(&g, &field, &taken, &[]), Some((7, 2.0)));
}

#[test]
fn repeated_snapshot_is_degenerate() {
    let g = GridSpec::new(6, 6).unwrap();
    let mu = p(100.0, 1.0);
    let mut m = build(g, Problem::Stokes, &[mu]);
    let snap = solve_stokes(&g, mu).unwrap().values;
    let before = m.clone();
    assert!(matches!(
        m.geim_extend(&snap, TrainedPair { param: mu, time: None }),
        Err(RomError::Degenerate { .. })
    ));
    assert_eq!(m, before);
}

#[test]
fn least_squares_optimality_against_perturbations() {
    let g = GridSpec::new(10, 10).unwrap();
    let m = build(g, Problem::Stokes, &stokes_params());
    let mu = p(733.0, 2.7);
    let sol = m.online_solve_steady(mu, OnlineOptions::default()).unwrap();
    let case = m.case(mu);
    let c = sol.final_coefficients();
    let base = residual_norm2(&collocated_residual(m.closure(), m.restricted(), c, &case, ResidualMode::Steady).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let mut d: Vec<f64> = (0..m.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nd = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        d.iter_mut().for_each(|x| *x *= 1e-6 / nd);
        let cp: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + b).collect();
        let r = residual_norm2(&collocated_residual(m.closure(), m.restricted(), &cp, &case, ResidualMode::Steady).unwrap());
        assert!(r >= base * (1.0 - 1e-12), "{r:e} < {base:e}");
    }
}

#[test]
fn eps_matches_recomputed_collocated_residual() {
    let g = GridSpec::new(8, 8).unwrap();
    let m = build(g, Problem::SteadyNs, &[p(20.0, 1.0), p(90.0, 1.0)]);
    let mu = p(55.0, 0.7);
    let sol = m.online_solve_steady(mu, OnlineOptions::default()).unwrap();
    let r = collocated_residual(m.closure(), m.restricted(), sol.final_coefficients(), &m.case(mu), ResidualMode::Steady).unwrap();
    assert_eq!(sol.eps[0], norm_inf(&r));
    assert_eq!(sol.delta, sol.eps[0]);
}

#[test]
fn reconstruct_is_linear() {
    let g = GridSpec::new(6, 6).unwrap();
    let m = build(g, Problem::Stokes, &stokes_params()[..3]);
    let e1 = m.reconstruct(&[1.0, 0.0, 0.0]).unwrap();
    assert_eq!(e1, m.basis[0]);
    let (c1, c2) = ([0.3, -1.0, 2.0], [1.5, 0.25, -0.5]);
    let lhs = m.reconstruct(&[2.0 * c1[0] - 3.0 * c2[0], 2.0 * c1[1] - 3.0 * c2[1], 2.0 * c1[2] - 3.0 * c2[2]]).unwrap();
    let (a, b) = (m.reconstruct(&c1).unwrap(), m.reconstruct(&c2).unwrap());
    let scale = norm_inf(&lhs).max(1.0);
    for k in 0..lhs.len() {
        assert!((lhs[k] - (2.0 * a[k] - 3.0 * b[k])).abs() <= 1e-13 * scale);
    }
    assert!(m.reconstruct(&[1.0]).is_err());
}

#[test]
fn prefix_keeps_matching_points() {
    let g = GridSpec::new(8, 8).unwrap();
    let m = build(g, Problem::Stokes, &stokes_params());
    assert_eq!(m.prefix(m.n()), m);
    for n in 1..=m.n() {
        let pm = m.prefix(n);
        assert_eq!(pm.n(), n);
        assert_eq!(pm.m(), 2 * n - 1);
        assert_eq!(pm, build(g, Problem::Stokes, &stokes_params()[..n]));
    }
}

#[test]
fn mode_mismatch_is_rejected() {
    let g = GridSpec::new(6, 6).unwrap();
    let m = build(g, Problem::Stokes, &[p(10.0, 1.0)]);
    assert!(matches!(
        m.online_solve_unsteady(p(10.0, 1.0), 3, None, OnlineOptions::default()),
        Err(RomError::WrongMode { .. })
    ));
    assert!(ReducedModel::new(g, Problem::UnsteadyNs, None).is_err());
    assert!(ReducedModel::new(g, Problem::Stokes, Some(0.1)).is_err());
}

#[test]
fn unsteady_reproduces_trained_trajectory_level() {
    use crate::fom::solve_unsteady_steps;
    let g = GridSpec::new(8, 8).unwrap();
    let tau = 0.05;
    let mu = p(50.0, 0.0);
    let traj = solve_unsteady_steps(&g, mu, &StateVector::zeros(g), tau, 6, PicardOptions::default()).unwrap();
    let mut m = ReducedModel::new(g, Problem::UnsteadyNs, Some(tau)).unwrap();
    // basis from every level: the reduced march can then track the truth exactly
    let opts = OnlineOptions::default();
    for t in 1..=6 {
        let r = if m.n() > 0 {
            let sol = m.online_solve_unsteady(mu, t, None, opts).unwrap();
            Some(m.full_residual_of(mu, &sol.c[t], Some(&sol.c[t - 1])).unwrap())
        } else {
            None
        };
        m.geim_extend(&traj.states[t].values, TrainedPair { param: mu, time: Some(t) }).unwrap();
        if let Some(r) = r {
            m.eim_residual_extend(&r).unwrap();
        }
    }
    let sol = m.online_solve_unsteady(mu, 6, None, opts).unwrap();
    assert_eq!(sol.c.len(), 7);
    assert_eq!(sol.eps.len(), 6);
    assert_eq!(sol.delta, sol.eps.iter().sum::<f64>());
    for t in 1..=6 {
        let rec = m.reconstruct(&sol.c[t]).unwrap();
        let truth = &traj.states[t].values;
        let err = rec.iter().zip(truth).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / norm_inf(truth);
        assert!(err <= 1e-9, "t = {t}: {err:e}");
    }
}
