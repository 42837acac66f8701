//! LQR-via-LMI vertex gain synthesis.
//!
//! For vertex systems `(A_i, B)` with a common Lyapunov matrix `P`, the program is
//!
//! ```text
//! minimise   tr(Q^½ P Q^½) + tr(Y)
//! subject to He(A_i P + B W_i) + 2·decay·P + I ⪯ 0           (one per vertex)
//!            [ −Y        R^½ W_i ]
//!            [ (R^½ W_i)ᵀ   −P   ]  ⪯ −tol_strict·I            (one per vertex)
//!            tr(Q^½ P Q^½) + tr(Y) ≤ γ
//!            P ⪰ 0,  Y ⪰ tol_strict·I
//! ```
//!
//! The identity in the Lyapunov blocks is the unit-intensity disturbance of the H₂ form; it
//! fixes the otherwise free scale of `(P, W_i, Y)` so the objective is the closed-loop H₂ cost
//! and the single-vertex optimum coincides with the Riccati LQR gain. Vertex gains are
//! `K_i = W_i P⁻¹` for the law `u = K x`.

mod riccati;
pub mod sdp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use riccati::{care, riccati_gain};
pub use sdp::{AffineBlock, SdpStatus, SolverSettings};

use crate::linalg::{diag, diag_sqrt, inverse, min_sym_eigenvalue, spd_condition, spectral_abscissa};
use crate::lpv::{
    dynamic_lpv_at, enumerate_vertices, kinematic_input_matrix, kinematic_lpv_at, LpvConfig, SchedulingBounds,
};
use crate::plant::VehicleParams;
use crate::{Error, Result};

/// Margin used for strict inequalities that are not scale-normalised.
pub const TOL_STRICT: f64 = 1e-7;

/// Largest admissible condition number of `P` when recovering gains.
pub const MAX_P_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    /// Diagonal of the state weight `Q`.
    pub q_diag: Vec<f64>,
    /// Diagonal of the input weight `R`.
    pub r_diag: Vec<f64>,
    /// Cap on the trace objective.
    pub gamma_bound: f64,
    /// Decay rate: closed-loop poles must satisfy `Re λ < −decay`.
    pub decay: f64,
    /// Relative duality-gap tolerance of the SDP solver.
    pub tol: f64,
    /// Newton-step budget of the SDP solver.
    pub max_iter: usize,
    /// Performance level the design is compared against in the report; never enforced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_target: Option<f64>,
}

impl SynthesisConfig {
    /// Dynamic loop: `Q = diag(0.01, 0.01, 0.01, 0.01, 1e5, 9e4)`, `R = diag(0.01, 10)`, `η = 3`.
    pub fn dynamic_default() -> Self {
        Self {
            q_diag: vec![0.01, 0.01, 0.01, 0.01, 100000.0, 90000.0],
            r_diag: vec![0.01, 10.0],
            gamma_bound: 1e10,
            decay: 3.0,
            tol: 1e-8,
            max_iter: 1000,
            gamma_target: Some(0.001),
        }
    }

    /// Kinematic loop: `Q = diag(3, 2, 20)`, `R = diag(0.5, 0.001)`, `β = 0.5`.
    pub fn kinematic_default() -> Self {
        Self {
            q_diag: vec![3.0, 2.0, 20.0],
            r_diag: vec![0.5, 1.0],
            gamma_bound: 1e4,
            decay: 0.5,
            tol: 1e-8,
            max_iter: 1000,
            gamma_target: Some(0.01),
        }
    }

    pub fn validate(&self, states: usize, inputs: usize) -> Result<()> {
        if self.q_diag.len() != states || self.r_diag.len() != inputs {
            return Err(Error::DimensionMismatch(format!(
                "weights have {} / {} entries, system has {states} states / {inputs} inputs",
                self.q_diag.len(),
                self.r_diag.len()
            )));
        }
        if self.q_diag.iter().any(|q| !(*q >= 0.0)) {
            return Err(Error::Config("Q must be positive semidefinite".into()));
        }
        if self.r_diag.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config("R must be positive definite".into()));
        }
        if !(self.gamma_bound > 0.0) {
            return Err(Error::Config("gamma_bound must be positive".into()));
        }
        if !(self.decay >= 0.0) {
            return Err(Error::Config("decay must be non-negative".into()));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(
                "solver tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

/// Packing of `(P, Y, W_1..W_N)` into one decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    pub states: usize,
    pub inputs: usize,
    pub vertices: usize,
}

fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Index of `(i, j)`, `i <= j`, in the row-wise upper triangle of an `n × n` matrix.
fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

fn sym_basis(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n, n);
    e[(i, j)] = 1.0;
    e[(j, i)] = 1.0;
    e
}

impl VariableLayout {
    pub fn p_offset(&self) -> usize {
        0
    }

    pub fn y_offset(&self) -> usize {
        sym_len(self.states)
    }

    pub fn w_offset(&self, vertex: usize) -> usize {
        self.y_offset() + sym_len(self.inputs) + vertex * self.inputs * self.states
    }

    pub fn len(&self) -> usize {
        self.w_offset(self.vertices)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn p_index(&self, i: usize, j: usize) -> usize {
        self.p_offset() + sym_index(self.states, i, j)
    }

    pub fn y_index(&self, i: usize, j: usize) -> usize {
        self.y_offset() + sym_index(self.inputs, i, j)
    }

    pub fn w_index(&self, vertex: usize, row: usize, col: usize) -> usize {
        self.w_offset(vertex) + row * self.states + col
    }

    fn unpack_sym(&self, x: &DVector<f64>, n: usize, index: impl Fn(usize, usize) -> usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| x[index(i, j)])
    }

    pub fn p(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.unpack_sym(x, self.states, |i, j| self.p_index(i, j))
    }

    pub fn y(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.unpack_sym(x, self.inputs, |i, j| self.y_index(i, j))
    }

    pub fn w(&self, x: &DVector<f64>, vertex: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.inputs, self.states, |r, c| x[self.w_index(vertex, r, c)])
    }

    /// Iterates over the symmetric P coordinates with their basis matrices.
    fn p_terms(&self) -> impl Iterator<Item = (usize, DMatrix<f64>)> + '_ {
        let n = self.states;
        (0..n).flat_map(move |i| (i..n).map(move |j| (self.p_index(i, j), sym_basis(n, i, j))))
    }

    fn y_terms(&self) -> impl Iterator<Item = (usize, DMatrix<f64>)> + '_ {
        let n = self.inputs;
        (0..n).flat_map(move |i| (i..n).map(move |j| (self.y_index(i, j), sym_basis(n, i, j))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "vertex", rename_all = "snake_case")]
pub enum BlockKind {
    Lyapunov(usize),
    Schur(usize),
    TraceBound,
    PositiveP,
    PositiveY,
    /// Solver-side cap `tr P + tr Y ≤ c` keeping sublevel sets bounded when `Q` is singular.
    VariableBound,
}

#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub kind: BlockKind,
    /// `F(x) ⪰ 0` form, including the strictness offset.
    pub affine: AffineBlock,
}

/// The assembled LMI system for one loop.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub layout: VariableLayout,
    pub objective: DVector<f64>,
    pub blocks: Vec<LmiBlock>,
}

impl SdpProblem {
    pub fn count(&self, pred: impl Fn(BlockKind) -> bool) -> usize {
        self.blocks.iter().filter(|b| pred(b.kind)).count()
    }
}

fn he(m: &DMatrix<f64>) -> DMatrix<f64> {
    m + m.transpose()
}

/// Builds the LMI program from vertex state matrices and the common input matrix.
pub fn assemble_lqr_lmi(vertex_a: &[DMatrix<f64>], b: &DMatrix<f64>, cfg: &SynthesisConfig) -> Result<SdpProblem> {
    let Some(first) = vertex_a.first() else {
        return Err(Error::DimensionMismatch("no vertex systems".into()));
    };
    let s = first.nrows();
    let r = b.ncols();
    for (i, a) in vertex_a.iter().enumerate() {
        if a.shape() != (s, s) {
            return Err(Error::DimensionMismatch(format!(
                "vertex {i}: A is {:?}, expected {s}x{s}",
                a.shape()
            )));
        }
    }
    if b.nrows() != s {
        return Err(Error::DimensionMismatch(format!("B has {} rows, A has {s}", b.nrows())));
    }
    cfg.validate(s, r)?;

    let layout = VariableLayout {
        states: s,
        inputs: r,
        vertices: vertex_a.len(),
    };
    let q_half = diag_sqrt(&cfg.q_diag);
    let r_half = diag_sqrt(&cfg.r_diag);
    let q = diag(&cfg.q_diag);

    // objective: tr(Q^½ P Q^½) + tr(Y) = Σ_i q_i P_ii + Σ_i Y_ii
    let mut objective = DVector::zeros(layout.len());
    for i in 0..s {
        objective[layout.p_index(i, i)] = q[(i, i)];
    }
    for i in 0..r {
        objective[layout.y_index(i, i)] = 1.0;
    }

    let mut blocks = Vec::new();
    for (v, a) in vertex_a.iter().enumerate() {
        // −He(A P + B W) − 2·decay·P − I ⪰ 0
        let mut terms: Vec<(usize, DMatrix<f64>)> = layout
            .p_terms()
            .map(|(k, e)| (k, -(he(&(a * &e)) + &e * (2.0 * cfg.decay))))
            .collect();
        for row in 0..r {
            for col in 0..s {
                let mut e = DMatrix::zeros(r, s);
                e[(row, col)] = 1.0;
                terms.push((layout.w_index(v, row, col), -he(&(b * e))));
            }
        }
        blocks.push(LmiBlock {
            kind: BlockKind::Lyapunov(v),
            affine: AffineBlock {
                constant: -DMatrix::identity(s, s),
                terms,
            },
        });

        // [Y, −R^½W; −(R^½W)ᵀ, P] − tol·I ⪰ 0
        let n = r + s;
        let mut terms = Vec::new();
        for (k, e) in layout.y_terms() {
            let mut m = DMatrix::zeros(n, n);
            m.view_mut((0, 0), (r, r)).copy_from(&e);
            terms.push((k, m));
        }
        for (k, e) in layout.p_terms() {
            let mut m = DMatrix::zeros(n, n);
            m.view_mut((r, r), (s, s)).copy_from(&e);
            terms.push((k, m));
        }
        for row in 0..r {
            for col in 0..s {
                let mut e = DMatrix::zeros(r, s);
                e[(row, col)] = 1.0;
                let off = -(&r_half * e);
                let mut m = DMatrix::zeros(n, n);
                m.view_mut((0, r), (r, s)).copy_from(&off);
                m.view_mut((r, 0), (s, r)).copy_from(&off.transpose());
                terms.push((layout.w_index(v, row, col), m));
            }
        }
        blocks.push(LmiBlock {
            kind: BlockKind::Schur(v),
            affine: AffineBlock {
                constant: -DMatrix::identity(n, n) * TOL_STRICT,
                terms,
            },
        });
    }

    let scalar = |v: f64| DMatrix::from_element(1, 1, v);
    let trace_terms: Vec<(usize, DMatrix<f64>)> = objective
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(k, c)| (k, scalar(-c)))
        .collect();
    blocks.push(LmiBlock {
        kind: BlockKind::TraceBound,
        affine: AffineBlock {
            constant: scalar(cfg.gamma_bound),
            terms: trace_terms,
        },
    });
    blocks.push(LmiBlock {
        kind: BlockKind::PositiveP,
        affine: AffineBlock {
            constant: DMatrix::zeros(s, s),
            terms: layout.p_terms().collect(),
        },
    });
    blocks.push(LmiBlock {
        kind: BlockKind::PositiveY,
        affine: AffineBlock {
            constant: -DMatrix::identity(r, r) * TOL_STRICT,
            terms: layout.y_terms().collect(),
        },
    });

    let q_min = cfg
        .q_diag
        .iter()
        .copied()
        .filter(|q| *q > 0.0)
        .fold(f64::INFINITY, f64::min);
    let cap = if q_min.is_finite() {
        1e3 * cfg.gamma_bound * (1.0 + 1.0 / q_min)
    } else {
        1e6 * cfg.gamma_bound
    };
    let mut bound_terms: Vec<(usize, DMatrix<f64>)> = (0..s).map(|i| (layout.p_index(i, i), scalar(-1.0))).collect();
    bound_terms.extend((0..r).map(|i| (layout.y_index(i, i), scalar(-1.0))));
    blocks.push(LmiBlock {
        kind: BlockKind::VariableBound,
        affine: AffineBlock {
            constant: scalar(cap),
            terms: bound_terms,
        },
    });

    // keep q_half referenced through the objective construction above
    debug_assert_eq!(q_half.nrows(), s);
    Ok(SdpProblem {
        layout,
        objective,
        blocks,
    })
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub p: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub w: Vec<DMatrix<f64>>,
    pub status: SdpStatus,
    /// Achieved `tr(Q^½ P Q^½) + tr(Y)`.
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
}

pub fn solve_sdp(problem: &SdpProblem, settings: &SolverSettings) -> SdpSolution {
    let blocks: Vec<AffineBlock> = problem.blocks.iter().map(|b| b.affine.clone()).collect();
    let x0 = DVector::zeros(problem.layout.len());
    let res = sdp::solve_lmi(&problem.objective, &blocks, &x0, settings);
    let layout = problem.layout;
    SdpSolution {
        p: layout.p(&res.x),
        y: layout.y(&res.x),
        w: (0..layout.vertices).map(|v| layout.w(&res.x, v)).collect(),
        status: res.status,
        objective: res.objective,
        gap: res.gap,
        iterations: res.iterations,
    }
}

/// Per-vertex gains indexed like the canonical vertex order of `bounds`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexGainSet {
    pub bounds: SchedulingBounds,
    pub gains: Vec<DMatrix<f64>>,
}

impl VertexGainSet {
    pub fn new(bounds: SchedulingBounds, gains: Vec<DMatrix<f64>>) -> Result<Self> {
        if gains.len() != bounds.vertex_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} gains for a polytope with {} vertices",
                gains.len(),
                bounds.vertex_count()
            )));
        }
        if let Some(first) = gains.first() {
            if gains.iter().any(|k| k.shape() != first.shape()) {
                return Err(Error::DimensionMismatch("vertex gains differ in shape".into()));
            }
        }
        Ok(Self { bounds, gains })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.gains.first().map_or((0, 0), |k| k.shape())
    }
}

/// `K_i = W_i P⁻¹` for every vertex.
pub fn extract_vertex_gains(sol: &SdpSolution, bounds: &SchedulingBounds) -> Result<VertexGainSet> {
    if !sol.status.is_usable() {
        return Err(Error::Config(format!(
            "cannot extract gains from a {:?} solution",
            sol.status
        )));
    }
    // Diagonal equilibration: states in mixed units (N next to rad) make the raw spectrum of P
    // span many decades without making the inverse any less accurate.
    if sol.p.diagonal().iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Singular("P has a non-positive diagonal entry".into()));
    }
    let d = DMatrix::from_diagonal(&sol.p.diagonal().map(|x| 1.0 / x.sqrt()));
    let balanced = &d * &sol.p * &d;
    let cond = spd_condition(&balanced);
    if !(cond <= MAX_P_CONDITION) {
        return Err(Error::Singular(format!("P has condition number {cond:.3e}")));
    }
    let p_inv = &d * inverse(&balanced, "P")? * &d;
    VertexGainSet::new(bounds.clone(), sol.w.iter().map(|w| w * &p_inv).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMargin {
    pub kind: BlockKind,
    /// Smallest eigenvalue of the negated strict inequality (positive = satisfied).
    pub margin: f64,
}

/// Re-evaluates every inequality of the program directly at `(P, Y, W_i)`, independently of
/// the assembled coefficient matrices. Margins are for the unshifted inequalities, so
/// Lyapunov blocks are expected to carry at least the unit normalisation margin.
pub fn certificate_margins(
    vertex_a: &[DMatrix<f64>],
    b: &DMatrix<f64>,
    cfg: &SynthesisConfig,
    sol: &SdpSolution,
) -> Vec<BlockMargin> {
    let r_half = diag_sqrt(&cfg.r_diag);
    let q_half = diag_sqrt(&cfg.q_diag);
    let (s, r) = (sol.p.nrows(), sol.y.nrows());
    let mut out = Vec::new();
    for (v, (a, w)) in vertex_a.iter().zip(&sol.w).enumerate() {
        let lyap = he(&(a * &sol.p + b * w)) + &sol.p * (2.0 * cfg.decay);
        out.push(BlockMargin {
            kind: BlockKind::Lyapunov(v),
            margin: min_sym_eigenvalue(&(-lyap)),
        });
        let rw = &r_half * w;
        let mut schur = DMatrix::zeros(r + s, r + s);
        schur.view_mut((0, 0), (r, r)).copy_from(&(-&sol.y));
        schur.view_mut((0, r), (r, s)).copy_from(&rw);
        schur.view_mut((r, 0), (s, r)).copy_from(&rw.transpose());
        schur.view_mut((r, r), (s, s)).copy_from(&(-&sol.p));
        out.push(BlockMargin {
            kind: BlockKind::Schur(v),
            margin: min_sym_eigenvalue(&(-schur)),
        });
    }
    let trace = (&q_half * &sol.p * &q_half).trace() + sol.y.trace();
    out.push(BlockMargin {
        kind: BlockKind::TraceBound,
        margin: cfg.gamma_bound - trace,
    });
    out.push(BlockMargin {
        kind: BlockKind::PositiveP,
        margin: min_sym_eigenvalue(&sol.p),
    });
    out.push(BlockMargin {
        kind: BlockKind::PositiveY,
        margin: min_sym_eigenvalue(&sol.y),
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexCheck {
    pub vertex: usize,
    /// `max Re λ(A_i + B K_i)`.
    pub max_real_part: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub decay: f64,
    /// Achieved trace objective (absent when only gains were checked).
    pub objective: Option<f64>,
    pub gamma_target: Option<f64>,
    pub gamma_target_met: Option<bool>,
    pub vertices: Vec<VertexCheck>,
    pub lmi_margins: Vec<BlockMargin>,
    pub passed: bool,
}

/// Closed-loop eigenvalue check of every vertex against the decay requirement.
pub fn validate_synthesis(
    vertex_a: &[DMatrix<f64>],
    b: &DMatrix<f64>,
    gains: &VertexGainSet,
    decay: f64,
) -> SynthesisReport {
    let vertices: Vec<VertexCheck> = vertex_a
        .iter()
        .zip(&gains.gains)
        .enumerate()
        .map(|(vertex, (a, k))| VertexCheck {
            vertex,
            max_real_part: spectral_abscissa(&(a + b * k)),
        })
        .collect();
    let passed = vertex_a.len() == gains.gains.len() && vertices.iter().all(|c| c.max_real_part < -decay + 1e-6);
    SynthesisReport {
        decay,
        objective: None,
        gamma_target: None,
        gamma_target_met: None,
        vertices,
        lmi_margins: Vec::new(),
        passed,
    }
}

/// Vertex state matrices and the common input matrix of the dynamic loop.
pub fn dynamic_vertex_models(
    bounds: &SchedulingBounds,
    params: &VehicleParams,
    lpv: &LpvConfig,
) -> Result<(Vec<DMatrix<f64>>, DMatrix<f64>)> {
    let mut a = Vec::new();
    let mut b = None;
    for point in enumerate_vertices(bounds).iter() {
        let m = dynamic_lpv_at(bounds, point, params, lpv)?;
        a.push(m.a);
        b.get_or_insert(m.b);
    }
    Ok((a, b.unwrap_or_else(|| DMatrix::zeros(6, 2))))
}

pub fn kinematic_vertex_models(bounds: &SchedulingBounds) -> Result<(Vec<DMatrix<f64>>, DMatrix<f64>)> {
    let a = enumerate_vertices(bounds)
        .iter()
        .map(|p| kinematic_lpv_at(bounds, p).map(|m| m.a))
        .collect::<Result<Vec<_>>>()?;
    Ok((a, kinematic_input_matrix()))
}

/// Everything produced by one synthesis run.
#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub solution: SdpSolution,
    pub gains: VertexGainSet,
    pub report: SynthesisReport,
}

/// Assemble, solve, extract and validate in one go.
pub fn synthesize(
    vertex_a: &[DMatrix<f64>],
    b: &DMatrix<f64>,
    bounds: &SchedulingBounds,
    cfg: &SynthesisConfig,
) -> Result<SynthesisOutcome> {
    if vertex_a.len() != bounds.vertex_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} vertex systems for {} polytope vertices",
            vertex_a.len(),
            bounds.vertex_count()
        )));
    }
    let problem = assemble_lqr_lmi(vertex_a, b, cfg)?;
    let solution = solve_sdp(&problem, &cfg.solver_settings());
    if !solution.status.is_usable() {
        return Err(Error::Synthesis {
            status: solution.status,
            detail: format!(
                "solver stopped after {} Newton steps without a feasible design",
                solution.iterations
            ),
        });
    }
    let gains = extract_vertex_gains(&solution, bounds)?;
    let mut report = validate_synthesis(vertex_a, b, &gains, cfg.decay);
    report.lmi_margins = certificate_margins(vertex_a, b, cfg, &solution);
    report.objective = Some(solution.objective);
    report.gamma_target = cfg.gamma_target;
    report.gamma_target_met = cfg.gamma_target.map(|g| solution.objective <= g);
    Ok(SynthesisOutcome {
        solution,
        gains,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    fn scalar_cfg(q: f64, r: f64) -> SynthesisConfig {
        SynthesisConfig {
            q_diag: vec![q],
            r_diag: vec![r],
            gamma_bound: 1e3,
            decay: 0.0,
            tol: 1e-9,
            max_iter: 1000,
            gamma_target: None,
        }
    }

    #[test]
    fn layout_roundtrip() {
        let l = VariableLayout {
            states: 3,
            inputs: 2,
            vertices: 2,
        };
        assert_eq!(l.len(), 6 + 3 + 2 * 6);
        let x = DVector::from_iterator(l.len(), (0..l.len()).map(|i| i as f64));
        let p = l.p(&x);
        assert_eq!(p, p.transpose());
        assert_eq!(p[(1, 2)], l.p_index(1, 2) as f64);
        assert_eq!(l.w(&x, 1)[(1, 2)], l.w_index(1, 1, 2) as f64);
    }

    #[test]
    fn block_structure_counts() {
        let bounds = SchedulingBounds::dynamic_default();
        let (a, b) = dynamic_vertex_models(&bounds, &VehicleParams::default(), &LpvConfig::default()).unwrap();
        let prob = assemble_lqr_lmi(&a, &b, &SynthesisConfig::dynamic_default()).unwrap();
        assert_eq!(prob.count(|k| matches!(k, BlockKind::Lyapunov(_))), 4);
        assert_eq!(prob.count(|k| matches!(k, BlockKind::Schur(_))), 4);
        assert_eq!(prob.count(|k| k == BlockKind::TraceBound), 1);
        assert_eq!(prob.layout.len(), 21 + 3 + 4 * 12);

        let kb = SchedulingBounds::kinematic_default();
        let (a, b) = kinematic_vertex_models(&kb).unwrap();
        let prob = assemble_lqr_lmi(&a, &b, &SynthesisConfig::kinematic_default()).unwrap();
        assert_eq!(prob.count(|k| matches!(k, BlockKind::Lyapunov(_))), 8);
        assert_eq!(prob.layout.len(), 6 + 3 + 8 * 6);

        let prob = assemble_lqr_lmi(&[m(1, 1, &[-1.0])], &m(1, 1, &[1.0]), &scalar_cfg(1.0, 1.0)).unwrap();
        assert_eq!(
            prob.count(|k| matches!(k, BlockKind::Lyapunov(_) | BlockKind::Schur(_))),
            2
        );
        assert_eq!(prob.count(|k| k == BlockKind::TraceBound), 1);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let r = assemble_lqr_lmi(
            &[m(2, 2, &[0.0; 4]), m(1, 1, &[0.0])],
            &m(2, 1, &[0.0, 1.0]),
            &scalar_cfg(1.0, 1.0),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
        let r = assemble_lqr_lmi(&[m(2, 2, &[0.0; 4])], &m(1, 1, &[1.0]), &scalar_cfg(1.0, 1.0));
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn scalar_lqr_matches_closed_form() {
        let prob = assemble_lqr_lmi(&[m(1, 1, &[-1.0])], &m(1, 1, &[1.0]), &scalar_cfg(1.0, 1.0)).unwrap();
        let sol = solve_sdp(
            &prob,
            &SolverSettings {
                tol: 1e-9,
                max_iter: 1000,
            },
        );
        assert!(sol.status.is_usable(), "{:?}", sol.status);
        let bounds = SchedulingBounds::new(&[("s", 0.0, 1.0)]).unwrap();
        // single vertex: reuse the gain for the degenerate two-vertex bounds
        let k = &sol.w[0] * inverse(&sol.p, "P").unwrap();
        assert!((k[(0, 0)] + (2f64.sqrt() - 1.0)).abs() < 1e-3, "{k}");
        let _ = bounds;
    }

    #[test]
    fn double_integrator_matches_riccati() {
        let a = m(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = m(2, 1, &[0.0, 1.0]);
        let cfg = SynthesisConfig {
            q_diag: vec![1.0, 1.0],
            r_diag: vec![1.0],
            gamma_bound: 1e3,
            decay: 0.0,
            tol: 1e-9,
            max_iter: 1000,
            gamma_target: None,
        };
        let prob = assemble_lqr_lmi(std::slice::from_ref(&a), &b, &cfg).unwrap();
        let sol = solve_sdp(&prob, &cfg.solver_settings());
        assert!(sol.status.is_usable());
        let k = &sol.w[0] * inverse(&sol.p, "P").unwrap();
        assert!((k[(0, 0)] + 1.0).abs() < 1e-3, "{k}");
        assert!((k[(0, 1)] + 3f64.sqrt()).abs() < 1e-3, "{k}");
    }

    #[test]
    fn uncontrollable_unstable_mode_is_infeasible() {
        let a = m(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = m(2, 1, &[0.0, 1.0]);
        let cfg = SynthesisConfig {
            q_diag: vec![1.0, 1.0],
            r_diag: vec![1.0],
            gamma_bound: 1e3,
            decay: 0.0,
            tol: 1e-9,
            max_iter: 1000,
            gamma_target: None,
        };
        let prob = assemble_lqr_lmi(&[a], &b, &cfg).unwrap();
        let sol = solve_sdp(&prob, &cfg.solver_settings());
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn gain_extraction_examples() {
        let sol = |p: DMatrix<f64>, w: DMatrix<f64>| SdpSolution {
            p,
            y: DMatrix::identity(1, 1),
            w: vec![w.clone(), w],
            status: SdpStatus::Optimal,
            objective: 0.0,
            gap: 0.0,
            iterations: 0,
        };
        let bounds = SchedulingBounds::new(&[("s", 0.0, 1.0)]).unwrap();
        let g = extract_vertex_gains(&sol(DMatrix::identity(2, 2), m(1, 2, &[1.0, 0.0])), &bounds).unwrap();
        assert_eq!(g.gains[0], m(1, 2, &[1.0, 0.0]));
        let g = extract_vertex_gains(&sol(m(1, 1, &[4.0]), m(1, 1, &[2.0])), &bounds).unwrap();
        assert_eq!(g.gains[1], m(1, 1, &[0.5]));
        let bad = extract_vertex_gains(
            &sol(m(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-13]), m(1, 2, &[1.0, 0.0])),
            &bounds,
        );
        assert!(matches!(bad, Err(Error::Singular(_))));
    }

    #[test]
    fn validation_threshold() {
        let bounds = SchedulingBounds::new(&[("s", 0.0, 1.0)]).unwrap();
        let gains = VertexGainSet::new(bounds, vec![m(1, 1, &[-1.0]), m(1, 1, &[-1.0])]).unwrap();
        let a = vec![m(1, 1, &[-1.0]), m(1, 1, &[-1.0])];
        let b = m(1, 1, &[1.0]);
        let ok = validate_synthesis(&a, &b, &gains, 1.5);
        assert!(ok.passed);
        assert!((ok.vertices[0].max_real_part + 2.0).abs() < 1e-12);
        let fail = validate_synthesis(&a, &b, &gains, 3.0);
        assert!(!fail.passed);
        assert!(fail.vertices.iter().all(|v| v.max_real_part > -3.0));
    }
}
