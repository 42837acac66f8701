//! Dense log-det barrier interior-point solver for small LMI programs.
//!
//! Solves `minimize cᵀx  s.t.  F_j(x) = F_j0 + Σ_k x_k F_jk ⪰ 0` for a handful of small
//! symmetric blocks. A phase-I problem (minimise a common shift `s` with `F_j(x) + sI ⪰ 0`)
//! finds a strictly feasible point or proves infeasibility; phase II then follows the
//! central path with damped Newton steps until the barrier duality gap `m/t` is below the
//! relative tolerance.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

/// One affine symmetric matrix function `F(x) = constant + Σ x_k · coeff_k`.
#[derive(Debug, Clone)]
pub struct AffineBlock {
    pub constant: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl AffineBlock {
    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut f = self.constant.clone();
        for (k, coeff) in &self.terms {
            let xk = x[*k];
            if xk != 0.0 {
                f += coeff * xk;
            }
        }
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    /// Duality gap below tolerance.
    Optimal,
    /// Strictly feasible point found but the gap could not be closed to tolerance.
    Feasible,
    /// Phase I proved that no strictly feasible point exists.
    Infeasible,
    /// Iteration budget exhausted before a conclusion was reached.
    MaxIter,
}

impl SdpStatus {
    pub fn is_usable(self) -> bool {
        matches!(self, SdpStatus::Optimal | SdpStatus::Feasible)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    /// Relative duality-gap tolerance.
    pub tol: f64,
    /// Cap on the total number of Newton steps (both phases).
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierResult {
    pub x: DVector<f64>,
    pub status: SdpStatus,
    pub objective: f64,
    /// Final barrier gap bound `m/t` (infinite if phase II never started).
    pub gap: f64,
    pub iterations: usize,
}

const BARRIER_GROWTH: f64 = 10.0;
const CENTERING_TOL: f64 = 1e-8;
/// Newton steps per centering stage; beyond this the point is taken as centred since further
/// progress is below rounding noise of the barrier value.
const MAX_CENTERING_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Centering {
    /// Newton decrement below tolerance.
    Centred,
    /// Stopped early by the step cap or the caller's stop predicate.
    Interrupted,
    /// No descent step could be taken.
    Stalled,
}

struct Barrier<'a> {
    objective: DVector<f64>,
    blocks: Vec<BlockRef<'a>>,
    nvar: usize,
}

/// A block, optionally shifted by the phase-I variable `s` (index `shift`).
struct BlockRef<'a> {
    block: &'a AffineBlock,
    shift: Option<usize>,
}

impl BlockRef<'_> {
    fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut f = self.block.eval(x);
        if let Some(s) = self.shift {
            for i in 0..f.nrows() {
                f[(i, i)] += x[s];
            }
        }
        f
    }

    fn terms(&self) -> impl Iterator<Item = (usize, Coeff<'_>)> {
        self.block
            .terms
            .iter()
            .map(|(k, c)| (*k, Coeff::Dense(c)))
            .chain(self.shift.map(|s| (s, Coeff::Identity)))
    }
}

enum Coeff<'a> {
    Dense(&'a DMatrix<f64>),
    Identity,
}

impl Coeff<'_> {
    /// `F⁻¹ · coeff`
    fn premultiply(&self, finv: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Coeff::Dense(c) => finv * *c,
            Coeff::Identity => finv.clone(),
        }
    }
}

fn cholesky(f: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if f.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Cholesky::new(f)
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

impl Barrier<'_> {
    fn total_size(&self) -> usize {
        self.blocks.iter().map(|b| b.block.size()).sum()
    }

    /// `t·cᵀx − Σ log det F_j(x)`, or `None` outside the domain.
    fn value(&self, t: f64, x: &DVector<f64>) -> Option<f64> {
        let mut v = t * self.objective.dot(x);
        for b in &self.blocks {
            let chol = cholesky(b.eval(x))?;
            v -= log_det(&chol);
        }
        Some(v)
    }

    fn gradient_hessian(&self, t: f64, x: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = self.nvar;
        let mut g = &self.objective * t;
        let mut h = DMatrix::zeros(n, n);
        for b in &self.blocks {
            let finv = cholesky(b.eval(x))?.inverse();
            let gs: Vec<(usize, DMatrix<f64>)> = b.terms().map(|(k, c)| (k, c.premultiply(&finv))).collect();
            for (i, (ki, gi)) in gs.iter().enumerate() {
                g[*ki] -= gi.trace();
                let gi_t = gi.transpose();
                for (kj, gj) in &gs[i..] {
                    // tr(G_i G_j) = Σ_ab G_i[a,b] G_j[b,a]
                    let v = gi_t.dot(gj);
                    h[(*ki, *kj)] += v;
                    if ki != kj {
                        h[(*kj, *ki)] += v;
                    }
                }
            }
        }
        Some((g, h))
    }

    fn newton_direction(&self, g: &DVector<f64>, mut h: DMatrix<f64>) -> Option<DVector<f64>> {
        let scale = h.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut reg = 0.0;
        for _ in 0..8 {
            if let Some(chol) = Cholesky::new(h.clone()) {
                let d = chol.solve(&(-g));
                if d.iter().all(|v| v.is_finite()) {
                    return Some(d);
                }
            }
            reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
            for i in 0..h.nrows() {
                h[(i, i)] += reg;
            }
        }
        None
    }

    /// Damped Newton centering at barrier weight `t`.
    fn center(
        &self,
        t: f64,
        x: &mut DVector<f64>,
        iterations: &mut usize,
        max_iter: usize,
        stop: impl Fn(&DVector<f64>) -> bool,
    ) -> Centering {
        for _ in 0..MAX_CENTERING_STEPS {
            if *iterations >= max_iter || stop(x) {
                return Centering::Interrupted;
            }
            let Some((g, h)) = self.gradient_hessian(t, x) else {
                return Centering::Stalled;
            };
            let Some(d) = self.newton_direction(&g, h) else {
                return Centering::Stalled;
            };
            let decrement = -g.dot(&d);
            if !(decrement > 0.0) || decrement / 2.0 <= CENTERING_TOL {
                return Centering::Centred;
            }
            *iterations += 1;
            let f0 = match self.value(t, x) {
                Some(v) => v,
                None => return Centering::Stalled,
            };
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-14 {
                let trial = &*x + &d * step;
                if let Some(f1) = self.value(t, &trial) {
                    if f1 <= f0 - 0.25 * step * decrement {
                        *x = trial;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                return Centering::Stalled;
            }
        }
        Centering::Interrupted
    }
}

fn min_eigenvalue(f: &DMatrix<f64>) -> f64 {
    nalgebra::SymmetricEigen::new(f.clone()).eigenvalues.min()
}

/// Minimises `objective · x` subject to every block being positive definite.
pub fn solve_lmi(
    objective: &DVector<f64>,
    blocks: &[AffineBlock],
    x0: &DVector<f64>,
    settings: &SolverSettings,
) -> BarrierResult {
    let n = objective.len();
    let mut iterations = 0;

    // Phase I: shift only the blocks that are not already strictly feasible at x0.
    let worst: Vec<f64> = blocks.iter().map(|b| min_eigenvalue(&b.eval(x0))).collect();
    let mut x = x0.clone();
    if worst.iter().any(|&m| m <= 0.0) {
        let s_idx = n;
        let mut c1 = DVector::zeros(n + 1);
        c1[s_idx] = 1.0;
        let phase1 = Barrier {
            objective: c1,
            blocks: blocks
                .iter()
                .zip(&worst)
                .map(|(block, &m)| BlockRef {
                    block,
                    shift: (m <= 0.0).then_some(s_idx),
                })
                .collect(),
            nvar: n + 1,
        };
        let worst_violation = worst.iter().fold(0.0f64, |acc, &m| acc.max(-m));
        let mut z = x0.clone().insert_row(n, worst_violation + 1.0);
        let m1 = phase1.total_size() as f64;
        let mut t = 1.0 / (worst_violation + 1.0);
        let feasible = |z: &DVector<f64>| z[s_idx] < 0.0;
        loop {
            let state = phase1.center(t, &mut z, &mut iterations, settings.max_iter, feasible);
            if feasible(&z) {
                break;
            }
            // p* >= s − m/t at a centred point.
            if state == Centering::Centred && z[s_idx] - m1 / t > 0.0 {
                return BarrierResult {
                    objective: f64::NAN,
                    x: z.rows(0, n).into_owned(),
                    status: SdpStatus::Infeasible,
                    gap: f64::INFINITY,
                    iterations,
                };
            }
            if iterations >= settings.max_iter || state == Centering::Stalled || t > 1e20 {
                return BarrierResult {
                    objective: f64::NAN,
                    x: z.rows(0, n).into_owned(),
                    status: SdpStatus::MaxIter,
                    gap: f64::INFINITY,
                    iterations,
                };
            }
            if state == Centering::Centred {
                t *= BARRIER_GROWTH;
            }
        }
        x = z.rows(0, n).into_owned();
    }

    // Phase II.
    let phase2 = Barrier {
        objective: objective.clone(),
        blocks: blocks.iter().map(|block| BlockRef { block, shift: None }).collect(),
        nvar: n,
    };
    let m = phase2.total_size() as f64;
    let mut t = m / objective.dot(&x).abs().max(1.0);
    loop {
        let state = phase2.center(t, &mut x, &mut iterations, settings.max_iter, |_| false);
        let obj = objective.dot(&x);
        let gap = m / t;
        if gap <= settings.tol * obj.abs().max(1.0) {
            return BarrierResult {
                x,
                status: SdpStatus::Optimal,
                objective: obj,
                gap,
                iterations,
            };
        }
        if state == Centering::Stalled || iterations >= settings.max_iter {
            let status = if state == Centering::Stalled {
                SdpStatus::Feasible
            } else {
                SdpStatus::MaxIter
            };
            return BarrierResult {
                x,
                status,
                objective: obj,
                gap,
                iterations,
            };
        }
        t *= BARRIER_GROWTH;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(c: f64, terms: &[(usize, f64)]) -> AffineBlock {
        AffineBlock {
            constant: DMatrix::from_element(1, 1, c),
            terms: terms
                .iter()
                .map(|&(k, v)| (k, DMatrix::from_element(1, 1, v)))
                .collect(),
        }
    }

    #[test]
    fn linear_program_on_interval() {
        // minimize x s.t. x - 2 >= 0, 5 - x >= 0
        let blocks = vec![scalar(-2.0, &[(0, 1.0)]), scalar(5.0, &[(0, -1.0)])];
        let r = solve_lmi(
            &DVector::from_element(1, 1.0),
            &blocks,
            &DVector::zeros(1),
            &SolverSettings::default(),
        );
        assert_eq!(r.status, SdpStatus::Optimal);
        assert!((r.x[0] - 2.0).abs() < 1e-6, "{}", r.x[0]);
    }

    #[test]
    fn empty_interval_is_infeasible() {
        let blocks = vec![scalar(-2.0, &[(0, 1.0)]), scalar(1.0, &[(0, -1.0)])];
        let r = solve_lmi(
            &DVector::from_element(1, 1.0),
            &blocks,
            &DVector::zeros(1),
            &SolverSettings::default(),
        );
        assert_eq!(r.status, SdpStatus::Infeasible);
    }

    #[test]
    fn max_eigenvalue_minimisation() {
        // minimize t s.t. tI - M ⪰ 0 → t* = λmax(M)
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let block = AffineBlock {
            constant: -m.clone(),
            terms: vec![(0, DMatrix::identity(2, 2))],
        };
        let r = solve_lmi(
            &DVector::from_element(1, 1.0),
            &[block],
            &DVector::zeros(1),
            &SolverSettings::default(),
        );
        let expected = (5.0 + 5f64.sqrt()) / 2.0;
        assert_eq!(r.status, SdpStatus::Optimal);
        assert!((r.objective - expected).abs() < 1e-6);
    }
}
