//! Degree-distribution optimization: maximize the rate theta subject to
//! `Omega(x, psi, h) + theta * ln(1 - x) >= 0` on a grid over `[0, eta]`,
//! together with the simplex constraints on psi.
//!
//! Omega is pluggable. The shipped [`BatsOmega`] is the standard
//! release-probability form for batched codes, externally sourced from
//! the asymptotic analysis literature: for a batch of degree d over a
//! channel with rank distribution h,
//!
//! ```text
//! omega_d(x) = d * sum_r h_r * sum_{j=0}^{d-1} C(d-1, j) x^j (1-x)^(d-1-j) * zeta_r^(d-j)
//! ```
//!
//! where `zeta_r^k = prod_{i=0}^{k-1} (1 - q^(i-r))` is the probability
//! that k uniformly random vectors in F_q^r are linearly independent.
//! With M = 1 this collapses to `(1 - 1/q) * d * x^(d-1)`, the classical
//! fountain-code derivative condition. The constraint set is linear in
//! psi, so a dense simplex LP suffices.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::channel::RankDistribution;
use crate::graph::DegreeDistribution;

mod simplex;

pub use simplex::SimplexError;

#[derive(Debug, Error, PartialEq)]
pub enum OptError {
    #[error("grid must have at least 2 points")]
    GridTooSmall,
    #[error("eta must lie in (0, 1), got {0}")]
    EtaOutOfRange(f64),
    #[error("maximum degree must be at least 1")]
    NoDegrees,
    #[error("problem is infeasible or admits no positive rate")]
    Infeasible,
    #[error("simplex failed: {0}")]
    Solver(#[from] SimplexError),
    #[error("{0}")]
    Distribution(#[from] crate::graph::GraphError),
    #[error("distribution file rejected: {0}")]
    BadFile(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for OptError {
    fn from(e: std::io::Error) -> Self {
        OptError::Io(e.to_string())
    }
}

/// An evaluator for Omega, linear in psi: it only has to provide the
/// per-degree coefficient at a given x.
pub trait OmegaModel: Sync {
    /// Coefficient of psi_d in Omega(x, psi, h).
    fn coefficient(&self, degree: usize, x: f64, h: &RankDistribution) -> f64;

    /// Omega(x, psi, h) itself.
    fn eval(&self, x: f64, psi: &DegreeDistribution, h: &RankDistribution) -> f64 {
        (1..=psi.max_degree())
            .map(|d| psi.mass(d) * self.coefficient(d, x, h))
            .sum()
    }
}

/// A constant Omega for tests: `Omega(x, psi, h) = c` for every psi on
/// the simplex.
pub struct ConstantOmega(pub f64);

impl OmegaModel for ConstantOmega {
    fn coefficient(&self, _degree: usize, _x: f64, _h: &RankDistribution) -> f64 {
        self.0
    }
}

/// Arbitrary linear Omega for tests: coefficient of psi_d at x is
/// `table[d - 1](x)` via a caller closure.
pub struct TableOmega<F: Fn(usize, f64) -> f64 + Sync>(pub F);

impl<F: Fn(usize, f64) -> f64 + Sync> OmegaModel for TableOmega<F> {
    fn coefficient(&self, degree: usize, x: f64, _h: &RankDistribution) -> f64 {
        (self.0)(degree, x)
    }
}

/// The standard batched-code Omega (see module docs). Field order fixed
/// at q = 256.
pub struct BatsOmega;

const Q: f64 = 256.0;

impl BatsOmega {
    /// zeta_r^k for k, r in 0..=m.
    fn zeta_table(m: usize) -> Vec<Vec<f64>> {
        let mut zeta = vec![vec![0.0; m + 1]; m + 1];
        for (r, row) in zeta.iter_mut().enumerate() {
            row[0] = 1.0;
            for k in 1..=m {
                row[k] = if k > r {
                    0.0
                } else {
                    row[k - 1] * (1.0 - Q.powi(k as i32 - 1 - r as i32))
                };
            }
        }
        zeta
    }

    /// w_k = sum_r h_r * zeta_r^k: the chance that a batch still covers
    /// k unknowns.
    fn rank_weights(h: &RankDistribution) -> Vec<f64> {
        let m = h.batch_size();
        let zeta = Self::zeta_table(m);
        (0..=m)
            .map(|k| (k..=m).map(|r| h.prob(r) * zeta[r][k]).sum())
            .collect()
    }
}

impl OmegaModel for BatsOmega {
    fn coefficient(&self, degree: usize, x: f64, h: &RankDistribution) -> f64 {
        let w = Self::rank_weights(h);
        omega_coefficient_with_weights(degree, x, &w)
    }

    fn eval(&self, x: f64, psi: &DegreeDistribution, h: &RankDistribution) -> f64 {
        let w = Self::rank_weights(h);
        (1..=psi.max_degree())
            .map(|d| psi.mass(d) * omega_coefficient_with_weights(d, x, &w))
            .sum()
    }
}

/// omega_d(x) given precomputed rank weights w_k. Only the top M binomial
/// terms contribute because w_k vanishes for k > M.
fn omega_coefficient_with_weights(degree: usize, x: f64, w: &[f64]) -> f64 {
    let d = degree;
    let m = w.len() - 1;
    if d == 0 {
        return 0.0;
    }
    // Binomial(d-1, x) pmf at j = d - k, for k = 1..=min(d, M).
    let mut sum = 0.0;
    for (k, &wk) in w.iter().enumerate().skip(1).take(d.min(m)) {
        sum += wk * binomial_pmf(d - 1, d - k, x);
    }
    d as f64 * sum
}

/// C(n, j) x^j (1-x)^(n-j), computed in log space for stability.
fn binomial_pmf(n: usize, j: usize, x: f64) -> f64 {
    debug_assert!(j <= n);
    if x <= 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    if x >= 1.0 {
        return if j == n { 1.0 } else { 0.0 };
    }
    if n == 0 {
        return 1.0;
    }
    let ln = ln_choose(n, j) + j as f64 * x.ln() + (n - j) as f64 * (1.0 - x).ln();
    ln.exp()
}

fn ln_choose(n: usize, j: usize) -> f64 {
    ln_factorial(n) - ln_factorial(j) - ln_factorial(n - j)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// One optimization instance.
pub struct OptProblem<'a> {
    pub h: &'a RankDistribution,
    /// Largest degree allowed in psi (K).
    pub max_degree: usize,
    /// Constraint range endpoint, in (0, 1).
    pub eta: f64,
    /// Number of grid samples over [0, eta].
    pub grid: usize,
    pub omega: &'a dyn OmegaModel,
}

pub const DEFAULT_ETA: f64 = 0.98;
pub const DEFAULT_GRID: usize = 512;

const CONSTRAINT_TOL: f64 = 1e-8;

/// Maximize theta over the sampled constraint set. The returned psi is
/// projected onto the simplex exactly, and theta is tightened so every
/// sampled constraint holds within 1e-8.
pub fn optimize(p: &OptProblem) -> Result<(DegreeDistribution, f64), OptError> {
    if p.grid < 2 {
        return Err(OptError::GridTooSmall);
    }
    if !(p.eta > 0.0 && p.eta < 1.0) {
        return Err(OptError::EtaOutOfRange(p.eta));
    }
    if p.max_degree == 0 {
        return Err(OptError::NoDegrees);
    }
    let d_max = p.max_degree;
    let xs: Vec<f64> = (0..p.grid)
        .map(|j| p.eta * j as f64 / (p.grid - 1) as f64)
        .collect();
    // Precompute omega coefficients per (grid point, degree).
    let coeffs: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| (1..=d_max).map(|d| p.omega.coefficient(d, x, p.h)).collect())
        .collect();

    // LP variables: [psi_1..psi_D, theta], all nonnegative.
    // Inequalities: sum_d c_{j,d} psi_d - b_j theta >= 0 with
    // b_j = -ln(1 - x_j) >= 0. Equality: sum psi = 1. Objective: theta.
    let n_vars = d_max + 1;
    let mut inequalities = Vec::with_capacity(xs.len());
    for (j, x) in xs.iter().enumerate() {
        let mut row = Vec::with_capacity(n_vars);
        row.extend_from_slice(&coeffs[j]);
        row.push(-(-(1.0 - x).ln()));
        inequalities.push(row);
    }
    let mut equality = vec![1.0; d_max];
    equality.push(0.0);
    let mut objective = vec![0.0; d_max];
    objective.push(1.0);

    let solution = simplex::maximize(&objective, &inequalities, &equality, 1.0)?;
    let theta_lp = solution[d_max];

    // Project psi onto the simplex exactly.
    let mut masses: Vec<f64> = solution[..d_max]
        .iter()
        .map(|&v| if v > 1e-12 { v } else { 0.0 })
        .collect();
    let total: f64 = masses.iter().sum();
    if total <= 0.0 {
        return Err(OptError::Infeasible);
    }
    for v in masses.iter_mut() {
        *v /= total;
    }
    let psi = DegreeDistribution::new(masses)?;

    // Tighten theta so the projected psi satisfies every sampled
    // constraint: theta <= Omega(x_j) / (-ln(1-x_j)).
    let mut theta = theta_lp;
    for (j, x) in xs.iter().enumerate() {
        let b = -(1.0 - x).ln();
        if b <= 0.0 {
            continue;
        }
        let omega: f64 = (1..=d_max).map(|d| psi.mass(d) * coeffs[j][d - 1]).sum();
        theta = theta.min(omega / b);
    }
    if !theta.is_finite() || theta < 1e-9 {
        return Err(OptError::Infeasible);
    }
    debug_assert!(xs.iter().enumerate().all(|(j, x)| {
        let omega: f64 = (1..=d_max).map(|d| psi.mass(d) * coeffs[j][d - 1]).sum();
        omega + theta * (1.0 - x).ln() >= -CONSTRAINT_TOL
    }));
    Ok((psi, theta))
}

/// Keep the m largest probability masses and renormalize.
pub fn truncate_top_m(
    psi: &DegreeDistribution,
    m: usize,
) -> Result<DegreeDistribution, OptError> {
    Ok(psi.top_m_renormalized(m)?)
}

const FILE_NORMALIZATION_TOL: f64 = 1e-6;

/// Write "degree mass" lines in ascending degree order.
pub fn save_distribution(psi: &DegreeDistribution, path: &Path) -> Result<(), OptError> {
    let mut out = String::new();
    for d in 1..=psi.max_degree() {
        let mass = psi.mass(d);
        if mass > 0.0 {
            out.push_str(&format!("{d} {mass}\n"));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parse a "degree mass" file; '#' lines are comments. Negative masses
/// and totals off by more than 1e-6 are rejected.
pub fn load_distribution(path: &Path) -> Result<DegreeDistribution, OptError> {
    parse_distribution(&fs::read_to_string(path)?)
}

pub fn parse_distribution(text: &str) -> Result<DegreeDistribution, OptError> {
    let mut pairs: Vec<(usize, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(d), Some(m), None) = (it.next(), it.next(), it.next()) else {
            return Err(OptError::BadFile(format!("line {}: `{line}`", lineno + 1)));
        };
        let degree: usize = d
            .parse()
            .map_err(|_| OptError::BadFile(format!("line {}: bad degree", lineno + 1)))?;
        let mass: f64 = m
            .parse()
            .map_err(|_| OptError::BadFile(format!("line {}: bad mass", lineno + 1)))?;
        if degree == 0 {
            return Err(OptError::BadFile(format!("line {}: degree 0", lineno + 1)));
        }
        if mass < 0.0 || !mass.is_finite() {
            return Err(OptError::BadFile(format!(
                "line {}: negative mass",
                lineno + 1
            )));
        }
        if let Some(&(prev, _)) = pairs.last() {
            if degree <= prev {
                return Err(OptError::BadFile(format!(
                    "line {}: degrees must ascend",
                    lineno + 1
                )));
            }
        }
        pairs.push((degree, mass));
    }
    let sum: f64 = pairs.iter().map(|&(_, m)| m).sum();
    if (sum - 1.0).abs() > FILE_NORMALIZATION_TOL {
        return Err(OptError::BadFile(format!("masses sum to {sum}, not 1")));
    }
    // Snap the tiny residue so the in-memory invariant holds exactly.
    if let Some(last) = pairs.last_mut() {
        last.1 += 1.0 - sum;
    }
    Ok(DegreeDistribution::from_pairs(&pairs)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h_full_rank(m: usize) -> RankDistribution {
        let mut probs = vec![0.0; m + 1];
        probs[m] = 1.0;
        RankDistribution::new(probs).unwrap()
    }

    #[test]
    fn zeta_matches_direct_products() {
        let zeta = BatsOmega::zeta_table(4);
        assert_eq!(zeta[0][0], 1.0);
        assert_eq!(zeta[2][3], 0.0);
        // zeta_3^2 = (1 - q^-3)(1 - q^-2)
        let expect = (1.0 - 256f64.powi(-3)) * (1.0 - 256f64.powi(-2));
        assert!((zeta[3][2] - expect).abs() < 1e-15);
    }

    #[test]
    fn omega_collapses_to_fountain_derivative_for_m1() {
        // M = 1, h_1 = 1: omega_d(x) = (1 - 1/q) d x^(d-1).
        let h = h_full_rank(1);
        for d in [1usize, 2, 5, 17] {
            for &x in &[0.0, 0.1, 0.5, 0.9] {
                let got = BatsOmega.coefficient(d, x, &h);
                let expect = (1.0 - 1.0 / 256.0) * d as f64 * x.powi(d as i32 - 1);
                assert!((got - expect).abs() < 1e-12, "d={d} x={x}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn omega_is_linear_in_psi() {
        let h = h_full_rank(3);
        let psi_a = DegreeDistribution::new(vec![0.5, 0.5]).unwrap();
        let psi_b = DegreeDistribution::new(vec![0.0, 0.2, 0.8]).unwrap();
        // Mixture of distributions evaluates to the mixture of omegas.
        let mix = DegreeDistribution::new(vec![0.25, 0.35, 0.4]).unwrap();
        let x = 0.37;
        let lhs = BatsOmega.eval(x, &mix, &h);
        let rhs = 0.5 * BatsOmega.eval(x, &psi_a, &h) + 0.5 * BatsOmega.eval(x, &psi_b, &h);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn single_degree_single_rank_forces_point_mass() {
        // K = 1, M = 1, full rank: psi must be the point mass on degree 1.
        let h = h_full_rank(1);
        let p = OptProblem {
            h: &h,
            max_degree: 1,
            eta: 0.9,
            grid: 64,
            omega: &BatsOmega,
        };
        let (psi, theta) = optimize(&p).unwrap();
        assert!((psi.mass(1) - 1.0).abs() < 1e-12);
        assert!(theta > 0.0);
    }

    #[test]
    fn constant_omega_has_analytic_rate() {
        let h = h_full_rank(2);
        let c = 0.7;
        let eta = 0.9;
        let p = OptProblem {
            h: &h,
            max_degree: 5,
            eta,
            grid: 128,
            omega: &ConstantOmega(c),
        };
        let (_, theta) = optimize(&p).unwrap();
        let expect = c / -(1.0 - eta).ln();
        assert!((theta - expect).abs() < 1e-9, "{theta} vs {expect}");
    }

    #[test]
    fn toy_problem_matches_brute_force_grid_search() {
        // Three degrees, a hand-built linear omega, and an exhaustive
        // search over the 2-simplex at 1e-3 resolution.
        let h = h_full_rank(2);
        let omega = TableOmega(|d, x| match d {
            1 => 0.05 + 0.3 * x,
            2 => 0.25 * (1.0 - 0.5 * x),
            3 => 0.1 + 0.2 * (1.0 - x) * x,
            _ => 0.0,
        });
        let eta = 0.8;
        let grid = 33;
        let p = OptProblem {
            h: &h,
            max_degree: 3,
            eta,
            grid,
            omega: &omega,
        };
        let (_, theta) = optimize(&p).unwrap();

        let xs: Vec<f64> = (0..grid)
            .map(|j| eta * j as f64 / (grid - 1) as f64)
            .collect();
        let theta_of = |p1: f64, p2: f64, p3: f64| -> f64 {
            xs.iter()
                .filter(|&&x| x > 0.0)
                .map(|&x| {
                    let o = p1 * (0.05 + 0.3 * x)
                        + p2 * (0.25 * (1.0 - 0.5 * x))
                        + p3 * (0.1 + 0.2 * (1.0 - x) * x);
                    o / -(1.0 - x).ln()
                })
                .fold(f64::INFINITY, f64::min)
        };
        let mut best = 0.0f64;
        let steps = 1000;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let p1 = i as f64 / steps as f64;
                let p2 = j as f64 / steps as f64;
                let p3 = 1.0 - p1 - p2;
                best = best.max(theta_of(p1, p2, p3));
            }
        }
        assert!(
            (theta - best).abs() < 1e-4,
            "lp {theta} vs grid search {best}"
        );
    }

    #[test]
    fn theta_never_drops_when_grid_coarsens() {
        let h = RankDistribution::new(vec![0.05, 0.15, 0.3, 0.5]).unwrap();
        let mut prev = None;
        for grid in [512, 128, 32, 8] {
            let p = OptProblem {
                h: &h,
                max_degree: 12,
                eta: 0.95,
                grid,
                omega: &BatsOmega,
            };
            let (_, theta) = optimize(&p).unwrap();
            if let Some(prev) = prev {
                assert!(theta >= prev - 1e-9, "grid {grid}: {theta} < {prev}");
            }
            prev = Some(theta);
        }
    }

    #[test]
    fn optimized_rate_approaches_mean_rank_on_clean_channel() {
        // With full rank M = 4, decoding the fraction eta of symbols
        // caps the rate at M / eta symbols per batch; the optimum should
        // land between M/2 and that cap.
        let h = h_full_rank(4);
        let eta = 0.9;
        let p = OptProblem {
            h: &h,
            max_degree: 64,
            eta,
            grid: 128,
            omega: &BatsOmega,
        };
        let (psi, theta) = optimize(&p).unwrap();
        assert!(theta > 2.0, "theta {theta}");
        assert!(theta <= 4.0 / eta + 1e-6, "theta {theta}");
        assert!(psi.mean_degree() > 1.0);
    }

    #[test]
    fn degenerate_channel_is_infeasible() {
        let h = RankDistribution::new(vec![1.0, 0.0]).unwrap();
        let p = OptProblem {
            h: &h,
            max_degree: 8,
            eta: 0.9,
            grid: 32,
            omega: &BatsOmega,
        };
        assert!(matches!(optimize(&p), Err(OptError::Infeasible)));
    }

    #[test]
    fn truncate_matches_direct_recomputation() {
        let psi = DegreeDistribution::from_pairs(&[
            (2, 0.5),
            (3, 0.3),
            (4, 0.2),
        ])
        .unwrap();
        let t = truncate_top_m(&psi, 2).unwrap();
        assert!((t.mass(2) - 0.625).abs() < 1e-12);
        assert!((t.mass(3) - 0.375).abs() < 1e-12);
        // Unchanged when m covers every nonzero mass.
        let full = truncate_top_m(&psi, 3).unwrap();
        for d in 1..=4 {
            assert!((full.mass(d) - psi.mass(d)).abs() < 1e-12);
        }
        let sum: f64 = t.masses().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distribution_file_round_trip_and_rejection() {
        let psi = DegreeDistribution::from_pairs(&[(1, 0.125), (4, 0.5), (9, 0.375)]).unwrap();
        let dir = std::env::temp_dir().join("bats_dist_test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("psi.dist");
        save_distribution(&psi, &path).unwrap();
        let back = load_distribution(&path).unwrap();
        assert_eq!(back, psi);

        assert!(matches!(
            parse_distribution("1 -0.5\n2 1.5\n"),
            Err(OptError::BadFile(_))
        ));
        assert!(matches!(
            parse_distribution("1 0.5\n2 0.49\n"),
            Err(OptError::BadFile(_))
        ));
        assert!(parse_distribution("# comment\n1 0.25\n3 0.75\n").is_ok());
    }
}
