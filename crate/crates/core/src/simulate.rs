//! Time integration of the stacked system `ẋ = (I_N ⊗ A − L ⊗ F) x` and
//! empirical agreement detectors on the resulting trajectories.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::VertexSet;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_OVERFLOW_BOUND: f64 = 1e12;
pub const DEFAULT_REL_TOL: f64 = 1e-2;
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.2;

/// Gap values below this fraction of `‖x(t)‖∞` are treated as roundoff.
pub const GAP_NOISE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("step size must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("horizon must be nonnegative and finite, got {0}")]
    BadHorizon(f64),
    #[error("initial state has non-finite entries")]
    NonFiniteInitial,
    #[error("state became non-finite at t = {time}")]
    Blowup { time: f64 },
    #[error("agent id {id} out of range 1..={n}")]
    AgentOutOfRange { id: usize, n: usize },
    #[error("window holds {got} samples, need at least {need}")]
    WindowTooShort { got: usize, need: usize },
    #[error("phase plots need d = 2, got d = {0}")]
    NotPlanar(usize),
}

/// `m = I_N ⊗ A − L ⊗ F` for `N` agents of dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSystem {
    pub m: DMatrix<f64>,
    pub n: usize,
    pub d: usize,
}

pub fn assemble(
    a: &DMatrix<f64>,
    f: &DMatrix<f64>,
    l: &DMatrix<f64>,
) -> Result<StackedSystem, SimError> {
    let d = a.nrows();
    let n = l.nrows();
    if a.ncols() != d || f.shape() != (d, d) {
        return Err(SimError::Dimension(format!(
            "A is {:?}, F is {:?}",
            a.shape(),
            f.shape()
        )));
    }
    if l.ncols() != n || n == 0 {
        return Err(SimError::Dimension(format!("L is {:?}", l.shape())));
    }
    let m = DMatrix::<f64>::identity(n, n).kronecker(a) - l.kronecker(f);
    Ok(StackedSystem { m, n, d })
}

/// Deterministic initial state: `N·d` samples uniform in `[−1, 1]`, agent-major.
pub fn seeded_initial_state(n: usize, d: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n * d, |_, _| rng.random_range(-1.0..=1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    /// Integration stops once `‖x‖∞` exceeds this bound.
    pub overflow_bound: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            overflow_bound: DEFAULT_OVERFLOW_BOUND,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub dt: f64,
    pub method: &'static str,
    pub n: usize,
    pub d: usize,
    /// Set when the overflow guard stopped the run before the horizon.
    pub truncated: bool,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("record holds at least the initial sample")
    }

    /// State of agent `id` (1-based) at sample `k`.
    pub fn agent_state(&self, k: usize, id: usize) -> nalgebra::DVectorView<'_, f64> {
        self.states[k].rows((id - 1) * self.d, self.d)
    }

    fn check_agent(&self, id: usize) -> Result<(), SimError> {
        if id == 0 || id > self.n {
            return Err(SimError::AgentOutOfRange { id, n: self.n });
        }
        Ok(())
    }
}

/// RK4 step for a linear system is multiplication by
/// `I + hM + (hM)²/2 + (hM)³/6 + (hM)⁴/24`.
pub fn rk4_propagator(m: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let dim = m.nrows();
    let hm = m * h;
    let mut term = DMatrix::<f64>::identity(dim, dim);
    let mut p = term.clone();
    for k in 1..=4 {
        term = &term * &hm / k as f64;
        p += &term;
    }
    p
}

/// Classical fixed-step RK4 from `t = 0` to `t_end`, sampled every step.
/// The final step is shortened to land exactly on `t_end`.
pub fn integrate(
    sys: &StackedSystem,
    x0: &DVector<f64>,
    dt: f64,
    t_end: f64,
    opts: IntegrateOptions,
) -> Result<TrajectoryRecord, SimError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::BadStep(dt));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(SimError::BadHorizon(t_end));
    }
    if x0.len() != sys.n * sys.d {
        return Err(SimError::Dimension(format!(
            "initial state has length {}, expected {}",
            x0.len(),
            sys.n * sys.d
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFiniteInitial);
    }

    let full_steps = ((t_end / dt) * (1.0 + 1e-12)).floor() as usize;
    let remainder = t_end - full_steps as f64 * dt;
    let tail = if remainder > 1e-9 * dt {
        Some(remainder)
    } else {
        None
    };

    let step = rk4_propagator(&sys.m, dt);
    let mut times = Vec::with_capacity(full_steps + 2);
    let mut states = Vec::with_capacity(full_steps + 2);
    times.push(0.0);
    states.push(x0.clone());

    let mut x = x0.clone();
    let mut truncated = false;
    let total = full_steps + usize::from(tail.is_some());
    for k in 1..=total {
        let (t, next) = if k <= full_steps {
            (k as f64 * dt, &step * &x)
        } else {
            let h = tail.expect("tail step exists");
            (t_end, rk4_propagator(&sys.m, h) * &x)
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Blowup { time: t });
        }
        x = next;
        times.push(t);
        states.push(x.clone());
        if x.amax() > opts.overflow_bound {
            truncated = k < total;
            break;
        }
    }
    Ok(TrajectoryRecord {
        times,
        states,
        dt,
        method: "rk4",
        n: sys.n,
        d: sys.d,
        truncated,
    })
}

/// `‖xᵢ(t) − xⱼ(t)‖₂` at every sample.
pub fn pairwise_gap(traj: &TrajectoryRecord, i: usize, j: usize) -> Result<Vec<f64>, SimError> {
    traj.check_agent(i)?;
    traj.check_agent(j)?;
    Ok((0..traj.len())
        .map(|k| (traj.agent_state(k, i) - traj.agent_state(k, j)).norm())
        .collect())
}

fn slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(ys) {
        num += (t - mt) * (y - my);
        den += (t - mt) * (t - mt);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Verdict of the empirical agreement test on one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairAgreement {
    pub initial_gap: f64,
    pub window_mean: f64,
    pub window_slope: f64,
    pub final_gap: f64,
    pub agrees: bool,
}

/// Empirical agreement of agents `i`, `j`: over the final `window_fraction`
/// of samples the gap must average below `rel_tol` times its initial value
/// and must not trend upward.
///
/// Gaps below `GAP_NOISE_FLOOR·‖x(t)‖∞` count as zero. When the initial gap
/// is zero, the largest initial gap over all pairs is the reference.
pub fn pair_agreement(
    traj: &TrajectoryRecord,
    i: usize,
    j: usize,
    rel_tol: f64,
    window_fraction: f64,
) -> Result<PairAgreement, SimError> {
    let start = window_start(traj, window_fraction)?;
    let raw = pairwise_gap(traj, i, j)?;
    let gaps: Vec<f64> = raw
        .iter()
        .zip(&traj.states)
        .map(|(&g, x)| {
            if g <= GAP_NOISE_FLOOR * x.amax() {
                0.0
            } else {
                g
            }
        })
        .collect();
    let mut reference = raw[0];
    if reference == 0.0 {
        reference = max_initial_gap(traj);
    }
    let window = &gaps[start..];
    let window_mean = window.iter().sum::<f64>() / window.len() as f64;
    let window_slope = slope(&traj.times[start..], window);
    let agrees = window_mean <= rel_tol * reference && window_slope <= 0.0;
    Ok(PairAgreement {
        initial_gap: raw[0],
        window_mean,
        window_slope,
        final_gap: *raw.last().expect("nonempty"),
        agrees,
    })
}

fn max_initial_gap(traj: &TrajectoryRecord) -> f64 {
    let mut best: f64 = 0.0;
    for i in 1..=traj.n {
        for j in i + 1..=traj.n {
            best = best.max((traj.agent_state(0, i) - traj.agent_state(0, j)).norm());
        }
    }
    best
}

const MIN_WINDOW_SAMPLES: usize = 10;

fn window_start(traj: &TrajectoryRecord, window_fraction: f64) -> Result<usize, SimError> {
    let len = traj.len();
    let w = ((len as f64) * window_fraction).floor() as usize;
    if w < MIN_WINDOW_SAMPLES {
        return Err(SimError::WindowTooShort {
            got: w,
            need: MIN_WINDOW_SAMPLES,
        });
    }
    Ok(len - w)
}

/// Partition of the agents into empirically agreeing blocks (transitive
/// closure of pairwise agreement), ordered by smallest member.
pub fn empirical_clusters(
    traj: &TrajectoryRecord,
    rel_tol: f64,
    window_fraction: f64,
) -> Result<Vec<VertexSet>, SimError> {
    window_start(traj, window_fraction)?;
    let n = traj.n;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 1..=n {
        for j in i + 1..=n {
            if pair_agreement(traj, i, j, rel_tol, window_fraction)?.agrees {
                let (a, b) = (find(&mut parent, i - 1), find(&mut parent, j - 1));
                parent[a] = b;
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        let r = find(&mut parent, v);
        blocks[r].push(v + 1);
    }
    let mut out: Vec<VertexSet> = blocks
        .into_iter()
        .filter(|b| !b.is_empty())
        .map(VertexSet::from_sorted)
        .collect();
    out.sort_by_key(VertexSet::smallest);
    Ok(out)
}

/// Residual `maxᵢ ‖ẋᵢ − A xᵢ‖` over the members of `group`, with `ẋ` from
/// three-point differences (second order, one-sided at the ends). Tends to
/// zero when the group follows the autonomous dynamics `ξ̇ = Aξ`.
pub fn limit_dynamics_check(
    traj: &TrajectoryRecord,
    group: &VertexSet,
    a: &DMatrix<f64>,
) -> Result<Vec<f64>, SimError> {
    for &id in group.members() {
        traj.check_agent(id)?;
    }
    if a.shape() != (traj.d, traj.d) {
        return Err(SimError::Dimension(format!(
            "A is {:?}, agents have d = {}",
            a.shape(),
            traj.d
        )));
    }
    let len = traj.len();
    if len < 2 {
        return Ok(vec![0.0; len]);
    }
    let derivative = |k: usize, id: usize| -> DVector<f64> {
        if len == 2 {
            return (traj.agent_state(1, id) - traj.agent_state(0, id))
                / (traj.times[1] - traj.times[0]);
        }
        let base = k.saturating_sub(1).min(len - 3);
        let w = lagrange_derivative_weights(&traj.times[base..base + 3], traj.times[k]);
        (0..3).fold(DVector::zeros(traj.d), |acc, j| {
            acc + traj.agent_state(base + j, id) * w[j]
        })
    };
    Ok((0..len)
        .map(|k| {
            group
                .members()
                .iter()
                .map(|&id| (derivative(k, id) - a * traj.agent_state(k, id)).norm())
                .fold(0.0, f64::max)
        })
        .collect())
}

/// Weights `w` with `p'(t) = Σ w_j x_j` for the quadratic `p` through
/// `(ts[j], x_j)`.
fn lagrange_derivative_weights(ts: &[f64], t: f64) -> [f64; 3] {
    let mut w = [0.0; 3];
    for j in 0..3 {
        let (m1, m2) = ((j + 1) % 3, (j + 2) % 3);
        let denom = (ts[j] - ts[m1]) * (ts[j] - ts[m2]);
        w[j] = ((t - ts[m1]) + (t - ts[m2])) / denom;
    }
    w
}

/// CSV with header `t,agent,x1,...,xd`, one row per sample and agent.
pub fn write_csv<W: Write>(traj: &TrajectoryRecord, mut out: W) -> io::Result<()> {
    write!(out, "t,agent")?;
    for c in 1..=traj.d {
        write!(out, ",x{c}")?;
    }
    writeln!(out)?;
    for k in 0..traj.len() {
        for id in 1..=traj.n {
            write!(out, "{},{}", traj.times[k], id)?;
            for v in traj.agent_state(k, id).iter() {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

const SVG_WIDTH: f64 = 800.0;
const SVG_HEIGHT: f64 = 600.0;
const SVG_MARGIN: f64 = 40.0;
const SVG_MAX_POINTS: usize = 2000;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Phase portrait in the `(x1, x2)` plane: one polyline per agent, filled
/// dots at the starting positions.
pub fn render_svg(traj: &TrajectoryRecord) -> Result<String, SimError> {
    if traj.d != 2 {
        return Err(SimError::NotPlanar(traj.d));
    }
    let stride = traj.len().div_ceil(SVG_MAX_POINTS).max(1);
    let mut samples: Vec<usize> = (0..traj.len()).step_by(stride).collect();
    if samples.last() != Some(&(traj.len() - 1)) {
        samples.push(traj.len() - 1);
    }

    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &k in &samples {
        for id in 1..=traj.n {
            let s = traj.agent_state(k, id);
            xmin = xmin.min(s[0]);
            xmax = xmax.max(s[0]);
            ymin = ymin.min(s[1]);
            ymax = ymax.max(s[1]);
        }
    }
    if xmax - xmin < 1e-12 {
        xmin -= 1.0;
        xmax += 1.0;
    }
    if ymax - ymin < 1e-12 {
        ymin -= 1.0;
        ymax += 1.0;
    }
    let sx = |x: f64| SVG_MARGIN + (x - xmin) / (xmax - xmin) * (SVG_WIDTH - 2.0 * SVG_MARGIN);
    let sy = |y: f64| {
        SVG_HEIGHT - SVG_MARGIN - (y - ymin) / (ymax - ymin) * (SVG_HEIGHT - 2.0 * SVG_MARGIN)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
        w = SVG_WIDTH,
        h = SVG_HEIGHT
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    if xmin < 0.0 && xmax > 0.0 {
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"#cccccc\"/>\n",
            SVG_MARGIN,
            SVG_HEIGHT - SVG_MARGIN,
            x = sx(0.0)
        ));
    }
    if ymin < 0.0 && ymax > 0.0 {
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{}\" y2=\"{y:.2}\" stroke=\"#cccccc\"/>\n",
            SVG_MARGIN,
            SVG_WIDTH - SVG_MARGIN,
            y = sy(0.0)
        ));
    }
    for id in 1..=traj.n {
        let color = PALETTE[(id - 1) % PALETTE.len()];
        let points: Vec<String> = samples
            .iter()
            .map(|&k| {
                let s = traj.agent_state(k, id);
                format!("{:.2},{:.2}", sx(s[0]), sy(s[1]))
            })
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"><title>agent {id}</title></polyline>\n",
            points.join(" ")
        ));
        let s0 = traj.agent_state(0, id);
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"5\" fill=\"{color}\"/>\n",
            sx(s0[0]),
            sy(s0[1])
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
