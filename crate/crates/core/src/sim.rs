//! Sample paths of the switching signal, exact state propagation, and Monte
//! Carlo estimation of the quadratic cost `E ∫ ||x(t)||² dt`.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`). Replica `k` of a run
//! with seed `s` draws from stream `k` of the generator seeded with `s`, so
//! every replica is reproducible on its own and results do not depend on how
//! replicas are scheduled across threads.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matlib::{cost_gramian, cost_gramian_with_flow, expm, Matrix, SymmetricMatrix};
use crate::model::ValidatedSystem;

/// Replicas per work item of [`estimate_cost`]. Fixed so that the reduction
/// order never depends on the thread count.
pub const REPLICA_CHUNK: usize = 64;

/// A run is counted in [`CostEstimate::truncated_fraction`] when the second
/// half of the horizon carries more than this share of its cost.
pub const TAIL_SHARE: f64 = 0.01;

/// Generator for replica `replica` of a run seeded with `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Exponential variate by inversion, `-ln(u)/rate` with `u` in `(0, 1]`.
/// Resamples the (probability 2^-53) draw `u = 1` so the result is positive.
pub fn sample_exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    loop {
        let u = 1.0 - rng.random::<f64>();
        let eta = -u.ln() / rate;
        if eta > 0.0 {
            return eta;
        }
    }
}

/// One visit: mode `mode` entered at `start`, held for `fixed` then `random`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub mode: usize,
    pub start: f64,
    pub fixed: f64,
    pub random: f64,
}

impl Segment {
    pub fn end(&self) -> f64 {
        self.start + self.fixed + self.random
    }
}

/// A realized switching signal. The last segment reaches past `horizon`;
/// consumers clip it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingSignalPath {
    pub segments: Vec<Segment>,
    pub horizon: f64,
}

impl SwitchingSignalPath {
    /// Segment start and end, clipped to `[0, horizon]`.
    pub fn clipped(&self) -> impl Iterator<Item = (&Segment, f64, f64)> + '_ {
        self.segments.iter().take_while(|s| s.start < self.horizon).map(|s| (s, s.start, s.end().min(self.horizon)))
    }

    pub fn mode_at(&self, t: f64) -> Option<usize> {
        self.segments.iter().find(|s| s.start <= t && t < s.end()).map(|s| s.mode)
    }
}

/// Draws a switching signal on `[0, horizon]` starting in mode `r0`: each
/// visit to mode `i` holds `d_i`, then an `Exp(ν_i)` time, then jumps to
/// `j ≠ i` with probability `π_ij / ν_i`.
pub fn sample_switching_signal<R: Rng + ?Sized>(
    sys: &ValidatedSystem,
    r0: usize,
    horizon: f64,
    rng: &mut R,
) -> SwitchingSignalPath {
    assert!(r0 < sys.m(), "initial mode {r0} out of range");
    assert!(horizon > 0.0, "horizon must be positive");
    let mut segments = Vec::new();
    let mut mode = r0;
    let mut t = 0.0;
    loop {
        let fixed = sys.dwell(mode);
        let random = sample_exponential(rng, sys.exit_rate(mode));
        let seg = Segment { mode, start: t, fixed, random };
        segments.push(seg);
        t = seg.end();
        if t >= horizon {
            break;
        }
        mode = next_mode(sys, mode, rng);
    }
    SwitchingSignalPath { segments, horizon }
}

fn next_mode<R: Rng + ?Sized>(sys: &ValidatedSystem, from: usize, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * sys.exit_rate(from);
    let mut acc = 0.0;
    let mut last = from;
    for j in (0..sys.m()).filter(|&j| j != from) {
        let rate = sys.rate(from, j);
        if rate <= 0.0 {
            continue;
        }
        acc += rate;
        last = j;
        if target < acc {
            return j;
        }
    }
    last
}

/// Sampled state trajectory. `modes[k]` is the mode active from `times[k]`
/// on; switch instants carry the newly entered mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub modes: Vec<usize>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    /// CSV with header `t,mode,x_1..x_n`; modes are numbered from 1.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        let header: Vec<String> =
            ["t".to_string(), "mode".to_string()].into_iter().chain((1..=n).map(|i| format!("x_{i}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        for ((t, mode), x) in self.times.iter().zip(&self.modes).zip(&self.states) {
            write!(w, "{t:.16e},{}", mode + 1)?;
            for v in x {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn check_state(sys: &ValidatedSystem, x0: &[f64]) -> Result<(), SimError> {
    if x0.len() != sys.n() {
        return Err(SimError::DimensionMismatch { expected: sys.n(), got: x0.len() });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("state has {got} entries, system order is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample spacing must be positive, got {0}")]
    BadSpacing(f64),
}

/// Exact piecewise propagation `x(t_k + τ) = e^{A_{r_k} τ} x(t_k)`, sampled
/// at multiples of `sample_dt` and at every switch instant up to the
/// horizon.
pub fn propagate(
    sys: &ValidatedSystem,
    path: &SwitchingSignalPath,
    x0: &[f64],
    sample_dt: f64,
) -> Result<Trajectory, SimError> {
    check_state(sys, x0)?;
    if !(sample_dt > 0.0) {
        return Err(SimError::BadSpacing(sample_dt));
    }
    let mut traj = Trajectory { times: Vec::new(), modes: Vec::new(), states: Vec::new() };
    let mut x = x0.to_vec();
    let mut next_sample = 0usize;
    for (seg, start, end) in path.clipped() {
        let a = sys.a(seg.mode);
        traj.times.push(start);
        traj.modes.push(seg.mode);
        traj.states.push(x.clone());
        while (next_sample as f64) * sample_dt <= start {
            next_sample += 1;
        }
        loop {
            let t = next_sample as f64 * sample_dt;
            if t >= end {
                break;
            }
            traj.times.push(t);
            traj.modes.push(seg.mode);
            traj.states.push(expm(a, t - start).expect("validated").mul_vec(&x));
            next_sample += 1;
        }
        x = expm(a, end - start).expect("validated").mul_vec(&x);
    }
    let last_mode = path.clipped().last().map_or(0, |(s, _, _)| s.mode);
    traj.times.push(path.horizon);
    traj.modes.push(last_mode);
    traj.states.push(x);
    Ok(traj)
}

/// States at each switch instant `t_k` and, last, at the horizon.
pub fn switch_states(sys: &ValidatedSystem, path: &SwitchingSignalPath, x0: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![x0.to_vec()];
    let mut x = x0.to_vec();
    for (seg, start, end) in path.clipped() {
        let flow = if end - start >= seg.fixed {
            expm(sys.a(seg.mode), end - start - seg.fixed).expect("validated").matmul(sys.jump_map(seg.mode))
        } else {
            expm(sys.a(seg.mode), end - start).expect("validated")
        };
        x = flow.mul_vec(&x);
        out.push(x.clone());
    }
    out
}

/// Per-mode data reused by every path of a system: the fixed-dwell jump map
/// and the cost Gramian over the fixed dwell.
#[derive(Debug, Clone)]
pub struct CostKernel<'a> {
    sys: &'a ValidatedSystem,
    fixed_gramians: Vec<SymmetricMatrix>,
}

impl<'a> CostKernel<'a> {
    pub fn new(sys: &'a ValidatedSystem) -> Self {
        let fixed_gramians = (0..sys.m()).map(|i| cost_gramian(sys.a(i), sys.dwell(i)).expect("validated")).collect();
        Self { sys, fixed_gramians }
    }

    /// `∫_0^τ ||x(s)||² ds` for a visit to `mode` entered in state `x`,
    /// together with the state after `τ`.
    pub fn segment(&self, mode: usize, x: &[f64], tau: f64) -> (f64, Vec<f64>) {
        let (costs, end) = self.segment_batch(mode, &Matrix::from_row_major(x.len(), 1, x.to_vec()), tau);
        (costs[0], end.as_slice().to_vec())
    }

    /// [`segment`](Self::segment) for every column of `x` at once.
    pub fn segment_batch(&self, mode: usize, x: &Matrix, tau: f64) -> (Vec<f64>, Matrix) {
        let a = self.sys.a(mode);
        let fixed = self.sys.dwell(mode);
        if tau >= fixed {
            let mut costs = column_quad_forms(self.fixed_gramians[mode].as_matrix(), x);
            let y = self.sys.jump_map(mode).matmul(x);
            let (w, flow) = cost_gramian_with_flow(a, tau - fixed).expect("validated");
            for (c, r) in costs.iter_mut().zip(column_quad_forms(w.as_matrix(), &y)) {
                *c += r;
            }
            (costs, flow.matmul(&y))
        } else {
            let (w, flow) = cost_gramian_with_flow(a, tau).expect("validated");
            (column_quad_forms(w.as_matrix(), x), flow.matmul(x))
        }
    }

    /// Cost accumulated up to each of the (ascending) `checkpoints`; entries
    /// past the horizon get the full-horizon cost.
    pub fn path_cost_at(&self, path: &SwitchingSignalPath, x0: &[f64], checkpoints: &[f64]) -> Vec<f64> {
        let x = Matrix::from_row_major(x0.len(), 1, x0.to_vec());
        self.path_cost_batch(path, &x, checkpoints).into_iter().map(|c| c[0]).collect()
    }

    /// Costs per checkpoint and per column of `x0` (each column an initial
    /// state), all along the same path.
    pub fn path_cost_batch(&self, path: &SwitchingSignalPath, x0: &Matrix, checkpoints: &[f64]) -> Vec<Vec<f64>> {
        debug_assert!(checkpoints.windows(2).all(|w| w[0] <= w[1]));
        let k = x0.cols();
        let mut out = vec![vec![0.0; k]; checkpoints.len()];
        let mut next = 0;
        let mut acc = vec![0.0; k];
        let mut x = x0.clone();
        for (seg, start, end) in path.clipped() {
            while next < checkpoints.len() && checkpoints[next] < end {
                out[next] = if checkpoints[next] <= start {
                    acc.clone()
                } else {
                    let (part, _) = self.segment_batch(seg.mode, &x, checkpoints[next] - start);
                    acc.iter().zip(part).map(|(a, p)| a + p).collect()
                };
                next += 1;
            }
            let (cost, x_end) = self.segment_batch(seg.mode, &x, end - start);
            for (a, c) in acc.iter_mut().zip(cost) {
                *a += c;
            }
            x = x_end;
        }
        for v in &mut out[next..] {
            v.clone_from(&acc);
        }
        out
    }
}

/// `x_k^T W x_k` for each column `x_k`.
fn column_quad_forms(w: &Matrix, x: &Matrix) -> Vec<f64> {
    let wx = w.matmul(x);
    (0..x.cols()).map(|j| (0..x.rows()).map(|i| x[(i, j)] * wx[(i, j)]).sum()).collect()
}

/// `∫_0^horizon ||x(t)||² dt` along `path`, integrated exactly per segment.
pub fn path_cost(sys: &ValidatedSystem, path: &SwitchingSignalPath, x0: &[f64]) -> Result<f64, SimError> {
    check_state(sys, x0)?;
    Ok(CostKernel::new(sys).path_cost_at(path, x0, &[path.horizon])[0])
}

/// Monte Carlo estimate of the expected quadratic cost over a finite horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub runs: usize,
    pub horizon: f64,
    /// Same estimate over `[0, horizon / 2]` from the same paths.
    pub half_horizon_mean: f64,
    pub half_horizon_std_error: f64,
    /// Fraction of runs whose second half-horizon carried more than
    /// [`TAIL_SHARE`] of their cost.
    pub truncated_fraction: f64,
    pub seed: u64,
}

impl CostEstimate {
    /// `mean / half_horizon_mean`: close to 1 when the cost has settled.
    pub fn growth_ratio(&self) -> f64 {
        self.mean / self.half_horizon_mean
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("estimate serializes")
    }
}

/// Running `(count, sum, sum of squares)` for the full and half horizon.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    count: usize,
    sum: f64,
    sum_sq: f64,
    half_sum: f64,
    half_sum_sq: f64,
    truncated: usize,
}

impl Moments {
    fn push(&mut self, half: f64, full: f64) {
        self.count += 1;
        self.sum += full;
        self.sum_sq += full * full;
        self.half_sum += half;
        self.half_sum_sq += half * half;
        if full > 0.0 && (full - half) > TAIL_SHARE * full {
            self.truncated += 1;
        }
    }

    fn merge(mut self, o: Moments) -> Moments {
        self.count += o.count;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.half_sum += o.half_sum;
        self.half_sum_sq += o.half_sum_sq;
        self.truncated += o.truncated;
        self
    }
}

fn mean_and_error(count: usize, sum: f64, sum_sq: f64) -> (f64, f64) {
    let n = count as f64;
    let mean = sum / n;
    let var = ((sum_sq - sum * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Runs `runs` independent replicas from `(x0, r0)` over `[0, horizon]` on
/// the current rayon pool.
pub fn estimate_cost(
    sys: &ValidatedSystem,
    x0: &[f64],
    r0: usize,
    runs: usize,
    horizon: f64,
    seed: u64,
) -> Result<CostEstimate, SimError> {
    Ok(estimate_cost_batch(sys, &[x0.to_vec()], r0, runs, horizon, seed)?.remove(0))
}

/// One estimate per initial state in `x0s`, all computed along the same
/// sampled paths. Entry `k` equals `estimate_cost(sys, &x0s[k], ...)`
/// up to rounding.
pub fn estimate_cost_batch(
    sys: &ValidatedSystem,
    x0s: &[Vec<f64>],
    r0: usize,
    runs: usize,
    horizon: f64,
    seed: u64,
) -> Result<Vec<CostEstimate>, SimError> {
    for x0 in x0s {
        check_state(sys, x0)?;
    }
    assert!(runs >= 2, "need at least two runs");
    assert!(r0 < sys.m(), "initial mode {r0} out of range");
    let n = sys.n();
    let k = x0s.len();
    let mut x0 = Matrix::zeros(n, k);
    for (j, col) in x0s.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            x0[(i, j)] = *v;
        }
    }
    let kernel = CostKernel::new(sys);
    let checkpoints = [0.5 * horizon, horizon];
    let chunks = runs.div_ceil(REPLICA_CHUNK);
    let partials: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::default(); k];
            for replica in (c * REPLICA_CHUNK)..((c + 1) * REPLICA_CHUNK).min(runs) {
                let mut rng = replica_rng(seed, replica as u64);
                let path = sample_switching_signal(sys, r0, horizon, &mut rng);
                let costs = kernel.path_cost_batch(&path, &x0, &checkpoints);
                for (j, m) in acc.iter_mut().enumerate() {
                    m.push(costs[0][j], costs[1][j]);
                }
            }
            acc
        })
        .collect();
    let totals = partials
        .into_iter()
        .fold(vec![Moments::default(); k], |acc, part| acc.into_iter().zip(part).map(|(a, b)| a.merge(b)).collect());
    Ok(totals
        .into_iter()
        .map(|total| {
            let (mean, std_error) = mean_and_error(total.count, total.sum, total.sum_sq);
            let (half_horizon_mean, half_horizon_std_error) =
                mean_and_error(total.count, total.half_sum, total.half_sum_sq);
            CostEstimate {
                mean,
                std_error,
                runs,
                horizon,
                half_horizon_mean,
                half_horizon_std_error,
                truncated_fraction: total.truncated as f64 / runs as f64,
                seed,
            }
        })
        .collect())
}

/// One visit of the jump system: state multiplied by `e^{A_ρ d_ρ}` at
/// `start`, then flows for `random`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSegment {
    pub mode: usize,
    pub start: f64,
    pub random: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpSystemPath {
    pub segments: Vec<JumpSegment>,
}

/// A switching signal and the jump-system path built from the same draws:
/// same modes and random dwells, with the fixed dwells squeezed out of the
/// time axis.
pub fn transform_paired_paths<R: Rng + ?Sized>(
    sys: &ValidatedSystem,
    r0: usize,
    horizon: f64,
    rng: &mut R,
) -> (SwitchingSignalPath, JumpSystemPath) {
    let signal = sample_switching_signal(sys, r0, horizon, rng);
    let jump = jump_path_of(&signal);
    (signal, jump)
}

pub fn jump_path_of(signal: &SwitchingSignalPath) -> JumpSystemPath {
    let mut t = 0.0;
    let segments = signal
        .segments
        .iter()
        .map(|s| {
            let seg = JumpSegment { mode: s.mode, start: t, random: s.random };
            t += s.random;
            seg
        })
        .collect();
    JumpSystemPath { segments }
}

/// Largest `|t_{k+1} - t̃_{k+1} - Σ_{l≤k} d_{ρ_l}|` relative to `max(1, t_{k+1})`,
/// plus a mode-sequence check (returns infinity on any mismatch).
pub fn time_identity_error(signal: &SwitchingSignalPath, jump: &JumpSystemPath) -> f64 {
    if signal.segments.len() != jump.segments.len()
        || signal.segments.iter().zip(&jump.segments).any(|(s, j)| s.mode != j.mode)
    {
        return f64::INFINITY;
    }
    let mut fixed_total = 0.0;
    let mut worst = 0.0f64;
    for (s, j) in signal.segments.iter().zip(&jump.segments) {
        fixed_total += s.fixed;
        let t_next = s.end();
        let tt_next = j.start + j.random;
        worst = worst.max((t_next - tt_next - fixed_total).abs() / t_next.max(1.0));
    }
    worst
}

/// Compares `ξ(t̃_k + τ)` of the jump system with `x(t_k + d_{r_k} + τ)` of
/// the switched system over `grid` equally spaced `τ ∈ [0, η_k]` per
/// segment. The switched trajectory is propagated over `d + τ` in one
/// exponential; the jump system applies the jump map and then flows.
///
/// Returns the largest `||ξ - x|| / max(1, ||x||)`.
pub fn check_path_correspondence(
    sys: &ValidatedSystem,
    signal: &SwitchingSignalPath,
    jump: &JumpSystemPath,
    x0: &[f64],
    grid: usize,
) -> Result<f64, SimError> {
    check_state(sys, x0)?;
    let grid = grid.max(2);
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut x = x0.to_vec();
    let mut xi_minus = x0.to_vec();
    let mut worst = 0.0f64;
    for (s, j) in signal.segments.iter().zip(&jump.segments) {
        let a = sys.a(s.mode);
        let xi = sys.jump_map(j.mode).mul_vec(&xi_minus);
        for g in 0..grid {
            let tau = j.random * g as f64 / (grid - 1) as f64;
            let x_t = expm(a, s.fixed + tau).expect("validated").mul_vec(&x);
            let xi_t = expm(a, tau).expect("validated").mul_vec(&xi);
            let diff: Vec<f64> = x_t.iter().zip(&xi_t).map(|(p, q)| p - q).collect();
            worst = worst.max(norm(&diff) / norm(&x_t).max(1.0));
        }
        x = expm(a, s.fixed + s.random).expect("validated").mul_vec(&x);
        xi_minus = expm(a, j.random).expect("validated").mul_vec(&xi);
    }
    Ok(worst)
}

/// Jump-map product along the jump path: `ξ` just before each jump.
pub fn jump_states(sys: &ValidatedSystem, jump: &JumpSystemPath, x0: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![x0.to_vec()];
    let mut xi = x0.to_vec();
    for j in &jump.segments {
        let flow: Matrix = expm(sys.a(j.mode), j.random).expect("validated").matmul(sys.jump_map(j.mode));
        xi = flow.mul_vec(&xi);
        out.push(xi.clone());
    }
    out
}
