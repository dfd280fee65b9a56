//! Acceptance checks. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any fails.
//!
//! ```bash
//! cargo test -p switchstab --test acceptance
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use switchstab::cli;
use switchstab::fixtures;
use switchstab::lemmas::{
    exp_integral_expectation, exp_integral_monte_carlo, exp_integral_rate_shifted, growth_constant,
};
use switchstab::matlib::{cost_gramian, expm, Matrix};
use switchstab::model::{SwitchedLinearSystem, ValidatedSystem};
use switchstab::region::{sweep, RegionGrid, SweepConfig, Verdict};
use switchstab::sim::{
    check_path_correspondence, estimate_cost_batch, replica_rng, time_identity_error, transform_paired_paths,
};
use switchstab::stability::{check_stochastic_stability, solve_coupled_lyapunov};
use switchstab::SymmetricMatrix;

type Predicate = fn(&RegionGrid) -> Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("closed-form certificate", closed_form_certificate),
        ("theorem vs Monte Carlo", theorem_vs_monte_carlo),
        ("stability region geometry", region_geometry),
        ("zero dwell reduction", zero_dwell_reduction),
        ("path correspondence", path_correspondence),
        ("growth bound", growth_bound),
        ("exponential window expectation", exponential_window),
        ("numerical kernels", numerical_kernels),
        ("determinism across workers", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {}. {name} ({:.2?}): {}", k + 1, start.elapsed(), o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn m(rows: &[&[f64]]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

fn two_state_generator() -> Matrix {
    m(&[&[-1.0, 1.0], &[1.0, -1.0]])
}

fn fro(a: &Matrix) -> f64 {
    a.frobenius_norm()
}

fn closed_form_certificate() -> Outcome {
    let start = Instant::now();
    let a = Matrix::identity(2).scale(-1.0);
    let sys = SwitchedLinearSystem::new(vec![(a.clone(), 0.0), (a, 0.0)], two_state_generator()).validate().unwrap();
    let verdict = check_stochastic_stability(&sys);
    let elapsed = start.elapsed();
    let Some(cert) = verdict.certificate() else {
        return outcome(false, "verdict is Unstable");
    };
    let half = Matrix::identity(2).scale(0.5);
    let p_err = cert.p.iter().map(|p| (p.as_matrix() - &half).max_abs()).fold(0.0, f64::max);
    let margin_err = (cert.margin + 1.0).abs();
    outcome(
        p_err <= 1e-10 && margin_err <= 1e-9 && elapsed < Duration::from_secs(1),
        format!("max |P_i - I/2| = {p_err:.1e}, |margin + 1| = {margin_err:.1e}"),
    )
}

/// Growth statistics over every basis initial state and initial mode.
fn monte_carlo_point(sys: &ValidatedSystem, seed: u64) -> (f64, f64) {
    let n = sys.n();
    let basis: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut worst_rel = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for r0 in 0..sys.m() {
        let estimates = estimate_cost_batch(sys, &basis, r0, 10_000, 200.0, seed + r0 as u64).unwrap();
        for e in estimates {
            worst_rel = worst_rel.max((e.mean - e.half_horizon_mean).abs() / e.mean);
            worst_ratio = worst_ratio.max(e.growth_ratio());
        }
    }
    (worst_rel, worst_ratio)
}

fn theorem_vs_monte_carlo() -> Outcome {
    let start = Instant::now();
    let points: [(usize, [f64; 2]); 12] = [
        (1, [3.0, 3.0]),
        (1, [5.0, 5.0]),
        (1, [0.2, 0.6]),
        (1, [0.2, 0.4]),
        (2, [5.0, 0.0]),
        (2, [3.0, 1.0]),
        (2, [0.0, 3.0]),
        (2, [1.0, 5.0]),
        (3, [1.8, 0.6]),
        (3, [1.5, 0.6]),
        (3, [0.0, 0.0]),
        (3, [3.0, 0.0]),
    ];
    let mut bad = Vec::new();
    let mut stable_seen = [0; 3];
    let mut unstable_seen = [0; 3];
    for (k, (case, d)) in points.iter().enumerate() {
        let sys = fixtures::case(*case).with_dwell(d).validate().unwrap();
        let verdict = check_stochastic_stability(&sys);
        if verdict.is_marginal() {
            bad.push(format!("case {case} {d:?} is marginal"));
            continue;
        }
        let (rel, ratio) = monte_carlo_point(&sys, 1000 * k as u64);
        if verdict.is_stable() {
            stable_seen[case - 1] += 1;
            if !(rel < 0.05) {
                bad.push(format!("case {case} {d:?} Stable but relative change {rel:.3}"));
            }
        } else {
            unstable_seen[case - 1] += 1;
            if !(ratio > 5.0) {
                bad.push(format!("case {case} {d:?} Unstable but ratio {ratio:.2}"));
            }
        }
    }
    for c in 0..3 {
        if stable_seen[c] == 0 || unstable_seen[c] == 0 {
            bad.push(format!("case {} lacks points on both sides", c + 1));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(300) {
        bad.push(format!("took {elapsed:.0?}"));
    }
    outcome(bad.is_empty(), if bad.is_empty() { "12 points agree".to_string() } else { bad.join("; ") })
}

fn square_sweep(case: usize, threads: usize) -> (RegionGrid, Duration) {
    let start = Instant::now();
    let grid = sweep(&SweepConfig::default_square(fixtures::case(case)).threads(threads)).unwrap();
    (grid, start.elapsed())
}

fn stable(grid: &RegionGrid, i1: usize, i2: usize) -> bool {
    grid.cell(i1, i2).verdict == Verdict::Stable
}

fn case1_predicate(g: &RegionGrid) -> Result<(), String> {
    let n = g.d1.len();
    if !stable(g, n - 1, n - 1) {
        return Err("(5,5) is not Stable".into());
    }
    let first = (0..n).find(|&k| stable(g, k, k)).unwrap();
    match (first..n).find(|&k| !stable(g, k, k)) {
        Some(k) => Err(format!("diagonal loses stability at d = {}", g.d1[k])),
        None => Ok(()),
    }
}

fn case2_predicate(g: &RegionGrid) -> Result<(), String> {
    let (n1, n2) = (g.d1.len(), g.d2.len());
    for i2 in 0..n2 {
        let gains = (1..n1).filter(|&i1| !stable(g, i1 - 1, i2) && stable(g, i1, i2)).count();
        if gains > 1 {
            return Err(format!("row d2 = {} has {gains} Unstable->Stable transitions", g.d2[i2]));
        }
    }
    for i1 in 0..n1 {
        if let Some(i2) = (1..n2).find(|&i2| !stable(g, i1, i2 - 1) && stable(g, i1, i2)) {
            return Err(format!("raising d2 stabilizes at ({}, {})", g.d1[i1], g.d2[i2]));
        }
    }
    Ok(())
}

fn case3_predicate(g: &RegionGrid) -> Result<(), String> {
    let (n1, n2) = (g.d1.len(), g.d2.len());
    let cells: Vec<(usize, usize)> =
        (0..n2).flat_map(|i2| (0..n1).map(move |i1| (i1, i2))).filter(|&(i1, i2)| stable(g, i1, i2)).collect();
    let Some(&seed) = cells.first() else {
        return Err("no Stable cells".into());
    };
    if cells.iter().any(|&(i1, i2)| i1 == n1 - 1 || i2 == n2 - 1) {
        return Err("Stable cells touch the d = 5 edges".into());
    }
    let mut seen = vec![false; n1 * n2];
    let mut stack = vec![seed];
    seen[seed.1 * n1 + seed.0] = true;
    let mut reached = 0;
    while let Some((i1, i2)) = stack.pop() {
        reached += 1;
        let neighbours = [(i1.wrapping_sub(1), i2), (i1 + 1, i2), (i1, i2.wrapping_sub(1)), (i1, i2 + 1)];
        for (j1, j2) in neighbours {
            if j1 < n1 && j2 < n2 && !seen[j2 * n1 + j1] && stable(g, j1, j2) {
                seen[j2 * n1 + j1] = true;
                stack.push((j1, j2));
            }
        }
    }
    if reached != cells.len() {
        return Err(format!("{} Stable cells, only {reached} connected", cells.len()));
    }
    Ok(())
}

fn region_geometry() -> Outcome {
    let predicates: [Predicate; 3] = [case1_predicate, case2_predicate, case3_predicate];
    let mut notes = Vec::new();
    let mut pass = true;
    for (k, predicate) in predicates.iter().enumerate() {
        let (grid, elapsed) = square_sweep(k + 1, 4);
        let result = predicate(&grid);
        let ok = grid.cells.len() == 2601 && result.is_ok() && elapsed < Duration::from_secs(30);
        pass &= ok;
        notes.push(match result {
            Ok(()) => format!("case {} ok ({} stable, {elapsed:.1?})", k + 1, grid.stable_count()),
            Err(e) => format!("case {}: {e}", k + 1),
        });
    }
    outcome(pass, notes.join("; "))
}

// Markov jump system oracle: Gauss-Seidel sweeps over the coupled Lyapunov
// equations, each solved as an n^2 linear system by elimination.

fn lyapunov_oracle(a: &[Vec<f64>], c: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    // a^T X + X a = c
    let n = a.len();
    let size = n * n;
    let mut g = vec![vec![0.0; size + 1]; size];
    for r in 0..n {
        for s in 0..n {
            let row = r * n + s;
            for k in 0..n {
                g[row][k * n + s] += a[k][r];
                g[row][r * n + k] += a[k][s];
            }
            g[row][size] = c[r][s];
        }
    }
    for col in 0..size {
        let piv = (col..size).max_by(|&x, &y| g[x][col].abs().total_cmp(&g[y][col].abs()))?;
        if g[piv][col].abs() < 1e-13 {
            return None;
        }
        g.swap(col, piv);
        for row in 0..size {
            if row != col {
                let f = g[row][col] / g[col][col];
                for k in col..=size {
                    g[row][k] -= f * g[col][k];
                }
            }
        }
    }
    Some((0..n).map(|r| (0..n).map(|s| g[r * n + s][size] / g[r * n + s][r * n + s]).collect()).collect())
}

fn positive_definite_oracle(p: &[Vec<f64>]) -> bool {
    // Cholesky
    let n = p.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = p[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

/// `Some(true)` when the iteration converges, `Some(false)` when it
/// provably cannot, `None` when undecided within the budget.
fn gauss_seidel_stable(a: &[Vec<Vec<f64>>], pi: &[Vec<f64>]) -> Option<bool> {
    let (m, n) = (a.len(), a[0].len());
    let shifted: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|i| {
            (0..n).map(|r| (0..n).map(|s| a[i][r][s] + if r == s { 0.5 * pi[i][i] } else { 0.0 }).collect()).collect()
        })
        .collect();
    let minus_identity: Vec<Vec<f64>> =
        (0..n).map(|r| (0..n).map(|s| if r == s { -1.0 } else { 0.0 }).collect()).collect();
    for ai in &shifted {
        match lyapunov_oracle(ai, &minus_identity) {
            Some(x) if positive_definite_oracle(&x) => {}
            _ => return Some(false),
        }
    }
    let mut p = vec![vec![vec![0.0; n]; n]; m];
    for _ in 0..200_000 {
        let mut change = 0.0f64;
        let mut size = 0.0f64;
        for i in 0..m {
            let rhs: Vec<Vec<f64>> = (0..n)
                .map(|r| {
                    (0..n)
                        .map(|s| {
                            let coupling: f64 = (0..m).filter(|&j| j != i).map(|j| pi[i][j] * p[j][r][s]).sum();
                            minus_identity[r][s] - coupling
                        })
                        .collect()
                })
                .collect();
            let next = lyapunov_oracle(&shifted[i], &rhs)?;
            for r in 0..n {
                for s in 0..n {
                    change = change.max((next[r][s] - p[i][r][s]).abs());
                    size = size.max(next[r][s].abs());
                }
            }
            p[i] = next;
        }
        if size > 1e10 {
            return Some(false);
        }
        if change <= 1e-12 * size {
            return Some(true);
        }
    }
    None
}

fn random_mjls(rng: &mut ChaCha8Rng) -> SwitchedLinearSystem {
    let n = rng.random_range(1..=3);
    let m = rng.random_range(2..=4);
    let shift = rng.random_range(0.0..1.5);
    let modes = (0..m)
        .map(|_| {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|r| (0..n).map(|s| rng.random_range(-1.0..1.0) - if r == s { shift } else { 0.0 }).collect())
                .collect();
            (Matrix::from_rows(&rows).unwrap(), 0.0)
        })
        .collect();
    let mut pi = Matrix::zeros(m, m);
    for i in 0..m {
        let mut total = 0.0;
        for j in (0..m).filter(|&j| j != i) {
            let rate = rng.random_range(0.1..2.0);
            pi[(i, j)] = rate;
            total += rate;
        }
        pi[(i, i)] = -total;
    }
    SwitchedLinearSystem::new(modes, pi)
}

fn zero_dwell_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut agree, mut marginal, mut stable, mut checked) = (0, 0, 0, 0);
    let mut disagreements = Vec::new();
    while checked + marginal < 50 {
        let raw = random_mjls(&mut rng);
        let sys = raw.validate().unwrap();
        let verdict = check_stochastic_stability(&sys);
        if verdict.is_marginal() {
            marginal += 1;
            continue;
        }
        let a: Vec<Vec<Vec<f64>>> = raw.modes.iter().map(|md| md.a.to_rows()).collect();
        let oracle = gauss_seidel_stable(&a, &raw.pi.to_rows());
        checked += 1;
        if oracle == Some(verdict.is_stable()) {
            agree += 1;
            stable += usize::from(verdict.is_stable());
        } else {
            disagreements.push(format!("#{checked}: oracle {oracle:?}, verdict {}", verdict.is_stable()));
        }
    }
    outcome(
        agree == checked && marginal == 0,
        format!(
            "{agree}/{checked} agree ({stable} stable), {marginal} marginal excluded{}",
            if disagreements.is_empty() { String::new() } else { format!("; {}", disagreements.join(", ")) }
        ),
    )
}

fn path_correspondence() -> Outcome {
    let mut worst_dev = 0.0f64;
    let mut worst_time = 0.0f64;
    for (c, raw) in fixtures::all_cases().iter().enumerate() {
        let sys = raw.validate().unwrap();
        for seed in 0..100u64 {
            let mut rng = replica_rng(seed, c as u64);
            let (signal, jump) = transform_paired_paths(&sys, (seed % 2) as usize, 20.0, &mut rng);
            worst_time = worst_time.max(time_identity_error(&signal, &jump));
            let x0 = [1.0 - 0.01 * seed as f64, 0.5];
            worst_dev = worst_dev.max(check_path_correspondence(&sys, &signal, &jump, &x0, 8).unwrap());
        }
    }
    outcome(
        worst_dev <= 1e-9 && worst_time <= 1e-12,
        format!("max deviation {worst_dev:.1e}, max time identity error {worst_time:.1e}"),
    )
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn growth_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let a = Matrix::from_rows(&rows).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let t = rng.random_range(0.0..5.0);
        let bound = growth_constant(&a).unwrap().lower_bound(t, norm_sq(&x));
        let actual = norm_sq(&expm(&a, t).unwrap().mul_vec(&x));
        if actual < bound - 1e-12 * bound.max(1.0) {
            violations += 1;
        }
    }
    let mut worst_eq = 0.0f64;
    let x = [0.3, -1.2, 0.7];
    for (a, t) in [
        (Matrix::identity(3).scale(-0.8), 2.5),
        (Matrix::identity(3).scale(0.4), 3.0),
        (m(&[&[0.0, 2.0, -1.0], &[-2.0, 0.0, 0.5], &[1.0, -0.5, 0.0]]), 4.0),
    ] {
        let bound = growth_constant(&a).unwrap().lower_bound(t, norm_sq(&x));
        let actual = norm_sq(&expm(&a, t).unwrap().mul_vec(&x));
        worst_eq = worst_eq.max((actual - bound).abs() / bound.max(1.0));
    }
    outcome(
        violations == 0 && worst_eq <= 1e-12,
        format!("{violations} violations in 1000 triples, equality cases within {worst_eq:.1e}"),
    )
}

fn exponential_window() -> Outcome {
    let mut worst_z = 0.0f64;
    let mut k = 0u64;
    let mut zero_exponent = Vec::new();
    for lambda in [0.5, 1.0, 2.0] {
        for a in [-1.0, 0.0, 0.4 * lambda] {
            for b in [0.0, 1.0, 2.0] {
                let closed = exp_integral_expectation(lambda, a, b).unwrap();
                let (mean, se) = exp_integral_monte_carlo(lambda, a, b, 1_000_000, k);
                k += 1;
                worst_z = worst_z.max((mean - closed).abs() / se);
                if a == 0.0 && b == 2.0 {
                    let shifted = exp_integral_rate_shifted(lambda, a, b).unwrap();
                    zero_exponent.push((lambda, closed, mean, se, shifted));
                }
            }
        }
    }
    let zero_ok = zero_exponent.iter().all(|&(lambda, closed, mean, se, shifted)| {
        (closed - 1.0 / lambda).abs() <= 1e-12
            && (mean * lambda - 1.0).abs() <= 4e-3
            && (mean - 1.0 / lambda).abs() <= 4.0 * se
            && (shifted / closed - (2.0 * lambda).exp()).abs() <= 1e-12 * shifted
            && (shifted - mean).abs() > 100.0 * se
    });
    let worst_rel = zero_exponent.iter().map(|&(l, _, mean, _, _)| (mean * l - 1.0).abs()).fold(0.0, f64::max);
    outcome(
        worst_z <= 4.0 && zero_ok,
        format!(
            "largest |z| over 27 points {worst_z:.2}; a = 0, b = 2: sampled mean within {worst_rel:.1e} \
             (relative) of 1/lambda, rate-shifted form off by e^(2 lambda)"
        ),
    )
}

fn expm_closed_forms() -> f64 {
    let t: f64 = 1.7;
    let cases: Vec<(Matrix, Matrix)> = vec![
        (Matrix::zeros(3, 3), Matrix::identity(3)),
        (Matrix::diag(&[-1.0, 0.5, 2.0]), Matrix::diag(&[(-t).exp(), (0.5 * t).exp(), (2.0 * t).exp()])),
        (m(&[&[0.0, 1.0], &[0.0, 0.0]]), m(&[&[1.0, t], &[0.0, 1.0]])),
        (m(&[&[-0.3, 1.0], &[0.0, -0.3]]), m(&[&[1.0, t], &[0.0, 1.0]]).scale((-0.3 * t).exp())),
        (
            m(&[&[0.0, 2.0], &[-2.0, 0.0]]),
            m(&[&[(2.0 * t).cos(), (2.0 * t).sin()], &[-(2.0 * t).sin(), (2.0 * t).cos()]]),
        ),
        (
            m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]]),
            m(&[&[1.0, t, t * t / 2.0], &[0.0, 1.0, t], &[0.0, 0.0, 1.0]]),
        ),
    ];
    cases.iter().map(|(a, want)| (&expm(a, t).unwrap() - want).max_abs() / want.max_abs()).fold(0.0, f64::max)
}

/// `∫_0^t e^{A^T s} e^{A s} ds` by RK4 for the flow and composite Simpson.
fn gramian_quadrature(a: &Matrix, t: f64, steps: usize) -> Matrix {
    let h = t / steps as f64;
    let n = a.rows();
    let mut phi = Matrix::identity(n);
    let mut acc = Matrix::zeros(n, n);
    for k in 0..=steps {
        let weight = if k == 0 || k == steps {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc.axpy(weight, &phi.transpose().matmul(&phi));
        let k1 = a.matmul(&phi);
        let k2 = a.matmul(&(&phi + &k1.scale(h / 2.0)));
        let k3 = a.matmul(&(&phi + &k2.scale(h / 2.0)));
        let k4 = a.matmul(&(&phi + &k3.scale(h)));
        let mut incr = k1;
        incr.axpy(2.0, &k2);
        incr.axpy(2.0, &k3);
        incr.axpy(1.0, &k4);
        phi.axpy(h / 6.0, &incr);
    }
    acc.scale(h / 3.0)
}

fn coupled_residual(sys: &ValidatedSystem, p: &[SymmetricMatrix]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..sys.m() {
        let pi = p[i].as_matrix();
        let a = sys.a(i);
        let lhs = a.transpose().matmul(pi);
        let rhs = pi.matmul(a);
        let own = pi.scale(sys.generator()[(i, i)]);
        let mut r = &(&lhs + &rhs) + &own;
        let mut scale = fro(&lhs) + fro(&rhs) + fro(&own) + (sys.n() as f64).sqrt();
        for j in (0..sys.m()).filter(|&j| j != i) {
            let e = expm(sys.a(j), sys.dwell(j)).unwrap();
            let term = e.transpose().matmul(p[j].as_matrix()).matmul(&e).scale(sys.rate(i, j));
            scale += fro(&term);
            r = &r + &term;
        }
        r = &r + &Matrix::identity(sys.n());
        worst = worst.max(fro(&r) / scale);
    }
    worst
}

fn numerical_kernels() -> Outcome {
    let expm_err = expm_closed_forms();
    let mut gram_err = 0.0f64;
    for raw in fixtures::all_cases() {
        for md in &raw.modes {
            for t in [0.5, 2.0, 5.0] {
                let w = cost_gramian(&md.a, t).unwrap();
                let q = gramian_quadrature(&md.a, t, 8000);
                gram_err = gram_err.max((w.as_matrix() - &q).max_abs() / q.max_abs());
            }
        }
    }
    let mut residual = 0.0f64;
    for raw in fixtures::all_cases() {
        for d in [[0.5, 0.5], [0.0, 0.0], [2.0, 1.0], [5.0, 5.0]] {
            let sys = raw.with_dwell(&d).validate().unwrap();
            let q = vec![SymmetricMatrix::identity(sys.n()); sys.m()];
            let sol = solve_coupled_lyapunov(&sys, &q).unwrap();
            residual = residual.max(sol.relative_residual).max(coupled_residual(&sys, &sol.p));
        }
    }
    outcome(
        expm_err <= 1e-12 && gram_err <= 1e-8 && residual <= 1e-9,
        format!("expm {expm_err:.1e}, gramian {gram_err:.1e}, coupled residual {residual:.1e}"),
    )
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("switchstab").chain(args.iter().copied()), &mut out, &mut err);
    (code, out)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("case3.json");
    std::fs::write(&model, switchstab::model::to_json(&fixtures::case(3))).unwrap();
    let model = model.to_str().unwrap();
    let mut sweeps = Vec::new();
    let mut sims = Vec::new();
    for threads in ["1", "8", "1", "8"] {
        let prefix = dir.path().join(format!("region{}", sweeps.len()));
        let (code, _) = run_cli(&["sweep", "--model", model, "--out", prefix.to_str().unwrap(), "--threads", threads]);
        assert_eq!(code, 0);
        let csv = std::fs::read(prefix.with_extension("csv")).unwrap();
        let svg = std::fs::read(prefix.with_extension("svg")).unwrap();
        sweeps.push((csv, svg));
        let (code, json) = run_cli(&[
            "simulate",
            "--model",
            model,
            "--x0",
            "1,0.5",
            "--runs",
            "2000",
            "--horizon",
            "50",
            "--seed",
            "11",
            "--threads",
            threads,
        ]);
        assert_eq!(code, 0);
        sims.push(json);
    }
    let sweep_same = sweeps.windows(2).all(|w| w[0] == w[1]);
    let sim_same = sims.windows(2).all(|w| w[0] == w[1]);
    outcome(
        sweep_same && sim_same,
        format!("sweep CSV/SVG identical: {sweep_same}, simulate JSON identical: {sim_same}"),
    )
}
