//! Relaxed shape optimization.
//!
//! A density φ ∈ [0,1] on the nodes replaces the unknown set; the operator
//! becomes `-div(A∇u) + (1/ε)(1 - φ) b u = λ b u` and the objective
//! `Σᵢ≤ₖ λᵢ(ε, φ) + Λ h² Σⱼ φⱼ` is decreased by projected gradient steps
//! with Armijo backtracking, under geometric continuation of ε.

use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;

use crate::coeffs::CoefficientField;
use crate::eigensolve::{find_clusters, residual_check, solve_lowest_from, EigenBasis, CLUSTER_GAP};
use crate::error::{Error, Result};
use crate::freeboundary::{extract_boundary, nearest_on_boundary};
use crate::grid::{Field, Grid, Point};
use crate::operator::{assemble_mass, assemble_stiffness, SparseOperator};

pub const MAX_HALVINGS: usize = 40;
const ARMIJO: f64 = 1e-4;

/// Discretized problem data that does not depend on φ or ε.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub cf: CoefficientField,
    pub k0: SparseOperator,
    pub mass: SparseOperator,
    /// `b(xⱼ) h²` on interior nodes.
    mass_diag: Vec<f64>,
    k0_diag: Vec<f64>,
}

impl Problem {
    pub fn new(grid: Grid, cf: CoefficientField) -> Result<Self> {
        let k0 = assemble_stiffness(&grid, &cf, None)?;
        let mass = assemble_mass(&grid, &cf);
        let mass_diag = mass.diagonal();
        let k0_diag = k0.diagonal();
        Ok(Problem {
            grid,
            cf,
            k0,
            mass,
            mass_diag,
            k0_diag,
        })
    }

    /// `K(ε, φ)`; ε = ∞ disables the penalization.
    pub fn penalized(&self, eps: f64, phi: &Field) -> Result<SparseOperator> {
        check_phi(&self.grid, phi)?;
        if eps.is_infinite() {
            return Ok(self.k0.clone());
        }
        let d: Vec<f64> = (0..self.grid.interior_count())
            .map(|r| {
                let (i, j) = self.grid.interior_ij(r);
                (1.0 - phi.get(self.grid.node_index(i, j), 0)) * self.mass_diag[r] / eps
            })
            .collect();
        self.k0.add_diagonal(&d)
    }

    /// Lowest `count` pairs of the penalized pencil.
    pub fn solve(
        &self,
        eps: f64,
        phi: &Field,
        count: usize,
        tol: f64,
        seed: u64,
        guess: Option<&[Vec<f64>]>,
    ) -> Result<EigenBasis> {
        let k = self.penalized(eps, phi)?;
        solve_lowest_from(&k, &self.mass, count, tol, seed, guess)
    }

    /// Fresh state for `(φ, ε)` with `k + 1` pairs solved.
    pub fn state(&self, phi: Field, eps: f64, lambda: f64, k: usize, tol: f64, seed: u64) -> Result<ShapeState> {
        let full = self.solve(eps, &phi, k + 1, tol, seed, None)?;
        Ok(ShapeState::from_solve(phi, eps, lambda, k, tol, full))
    }

    /// `h² Σ φ` over interior nodes.
    pub fn volume(&self, phi: &Field) -> f64 {
        relaxed_volume(&self.grid, phi)
    }
}

fn check_phi(grid: &Grid, phi: &Field) -> Result<()> {
    if phi.grid() != grid || phi.ncomp() != 1 {
        return Err(Error::DimensionMismatch {
            expected: grid.node_count(),
            got: phi.values().len(),
        });
    }
    Ok(())
}

pub fn relaxed_volume(grid: &Grid, phi: &Field) -> f64 {
    let mut s = 0.0;
    for j in 1..grid.ny {
        for i in 1..grid.nx {
            s += phi.get(grid.node_index(i, j), 0);
        }
    }
    s * grid.h * grid.h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub objective: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct ShapeState {
    pub phi: Field,
    pub eps: f64,
    pub lambda: f64,
    pub k: usize,
    /// Eigen residual tolerance the basis was computed with.
    pub tol: f64,
    /// The first `k` pairs.
    pub basis: EigenBasis,
    /// `λ_{k+1}`, kept to detect clusters straddling `k`.
    pub lambda_next: f64,
    pub objective_history: Vec<HistoryEntry>,
}

impl ShapeState {
    fn from_solve(phi: Field, eps: f64, lambda: f64, k: usize, tol: f64, full: EigenBasis) -> Self {
        let lambda_next = full.lambdas[k];
        ShapeState {
            phi,
            eps,
            lambda,
            k,
            tol,
            basis: full.truncated(k),
            lambda_next,
            objective_history: Vec::new(),
        }
    }

    pub fn eigen_sum(&self) -> f64 {
        self.basis.lambdas.iter().sum()
    }
}

/// `Σᵢ λᵢ + Λ vol(φ)`, after checking the basis against the current operator.
pub fn objective(problem: &Problem, state: &ShapeState) -> Result<f64> {
    let k = problem.penalized(state.eps, &state.phi)?;
    let residual = residual_check(&k, &problem.mass, &state.basis)?;
    let limit = 10.0 * state.tol;
    if residual > limit {
        return Err(Error::StaleBasis { residual, limit });
    }
    Ok(state.eigen_sum() + state.lambda * problem.volume(&state.phi))
}

fn objective_unchecked(problem: &Problem, state: &ShapeState) -> f64 {
    state.eigen_sum() + state.lambda * problem.volume(&state.phi)
}

/// Derivative of the relaxed objective with respect to each nodal φⱼ.
pub fn objective_gradient(problem: &Problem, state: &ShapeState) -> Result<Field> {
    let lk = state.basis.lambdas[state.k - 1];
    if state.lambda_next - lk < CLUSTER_GAP * state.lambda_next.abs() {
        return Err(Error::ClusterSplit {
            k: state.k,
            lambda_k: lk,
            lambda_next: state.lambda_next,
        });
    }
    let grid = &problem.grid;
    let inv_eps = if state.eps.is_infinite() { 0.0 } else { 1.0 / state.eps };
    let h2 = grid.h * grid.h;
    let mut g = Field::zeros(*grid, 1);
    for r in 0..grid.interior_count() {
        let (i, j) = grid.interior_ij(r);
        let sq: f64 = state.basis.vectors.iter().map(|u| u[r] * u[r]).sum();
        g.set(
            grid.node_index(i, j),
            0,
            -inv_eps * problem.mass_diag[r] * sq + state.lambda * h2,
        );
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Phi0 {
    Constant { value: f64 },
    Disk { center: Point, radius: f64 },
    Annulus { center: Point, inner: f64, outer: f64 },
    TwoDisks { centers: [Point; 2], radii: [f64; 2] },
}

impl Phi0 {
    /// Nodal density; boundary nodes of the box are set to 0.
    pub fn build(&self, grid: &Grid) -> Result<Field> {
        let inside = |p: Point, c: Point, r: f64| (p[0] - c[0]).hypot(p[1] - c[1]) < r;
        match self {
            Phi0::Constant { value } if !(0.0..=1.0).contains(value) => {
                return Err(Error::BadParams(format!("constant φ₀ = {value} outside [0,1]")))
            }
            Phi0::Annulus { inner, outer, .. } if !(inner < outer) => {
                return Err(Error::BadParams("annulus needs inner < outer".into()))
            }
            _ => {}
        }
        let mut phi = Field::from_fn(*grid, |p| {
            let on = match *self {
                Phi0::Constant { value } => return value,
                Phi0::Disk { center, radius } => inside(p, center, radius),
                Phi0::Annulus { center, inner, outer } => {
                    inside(p, center, outer) && !inside(p, center, inner)
                }
                Phi0::TwoDisks { centers, radii } => {
                    inside(p, centers[0], radii[0]) || inside(p, centers[1], radii[1])
                }
            };
            if on {
                1.0
            } else {
                0.0
            }
        });
        zero_boundary(grid, &mut phi);
        Ok(phi)
    }
}

fn zero_boundary(grid: &Grid, phi: &mut Field) {
    for n in 0..grid.node_count() {
        let (i, j) = grid.node_ij(n);
        if grid.is_boundary_node(i, j) {
            phi.set(n, 0, 0.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub k: usize,
    pub lambda: f64,
    pub eps0: f64,
    pub eps_min: f64,
    /// Geometric continuation factor in (0, 1).
    pub eps_factor: f64,
    pub phi0: Phi0,
    /// Initial step as a fraction of a full unit move at the steepest node.
    pub step0: f64,
    /// Per-phase relative objective change at which a phase stops.
    pub tol: f64,
    /// Iteration budget per ε phase.
    pub max_iters: usize,
    pub eig_tol: f64,
    pub seed: u64,
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadParams(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!("Λ = {} must be finite and nonnegative", self.lambda));
        }
        if !(self.eps_min > 0.0) || !(self.eps0 >= self.eps_min) {
            return bad(format!("need 0 < eps_min <= eps0, got {} and {}", self.eps_min, self.eps0));
        }
        if !(self.eps_factor > 0.0 && self.eps_factor < 1.0) {
            return bad(format!("eps factor {} outside (0,1)", self.eps_factor));
        }
        if !(self.step0 > 0.0) || !(self.tol > 0.0) || !(self.eig_tol > 0.0) || self.max_iters == 0 {
            return bad("step0, tol, eig_tol and max_iters must be positive".into());
        }
        Ok(())
    }
}

/// The ε schedule `ε₀, ε₀ f, ε₀ f², …` clipped at ε_min.
pub fn eps_schedule(eps0: f64, eps_min: f64, factor: f64) -> Vec<f64> {
    let mut out = vec![eps0];
    let mut e = eps0;
    while e > eps_min * (1.0 + 1e-12) {
        e = (e * factor).max(eps_min);
        out.push(e);
    }
    out
}

fn project_step(grid: &Grid, phi: &Field, g: &Field, s: f64) -> Field {
    let mut out = phi.clone();
    for r in 0..grid.interior_count() {
        let (i, j) = grid.interior_ij(r);
        let n = grid.node_index(i, j);
        out.set(n, 0, (phi.get(n, 0) - s * g.get(n, 0)).clamp(0.0, 1.0));
    }
    out
}

/// Projected gradient descent with ε continuation.
pub fn optimize(grid: Grid, cf: CoefficientField, opts: &OptimizeOptions) -> Result<ShapeState> {
    optimize_problem(&Problem::new(grid, cf)?, opts)
}

/// Predicted objective change for moving node `n` all the way to `target`.
///
/// Lowering the potential at one node by `δ` changes a simple eigenvalue by
/// `-u² a δ / (a - δ)`, with `a` the node's shifted diagonal `K_nn - λ M_nn`:
/// the local Schur complement of that single degree of freedom. Its
/// linearization is the gradient entry; near a sharp interface with small ε
/// the two differ by orders of magnitude.
pub fn predicted_move(problem: &Problem, state: &ShapeState, r: usize, phi: f64, target: f64) -> Option<f64> {
    let grid = &problem.grid;
    let c = if state.eps.is_infinite() { 0.0 } else { problem.mass_diag[r] / state.eps };
    let delta = (target - phi) * c;
    let diag = problem.k0_diag[r] + (1.0 - phi) * c;
    let mut change = state.lambda * grid.h * grid.h * (target - phi);
    for (lam, u) in state.basis.lambdas.iter().zip(&state.basis.vectors) {
        let a = diag - lam * problem.mass_diag[r];
        if !(a > 0.0 && a - delta > 0.0) {
            return None;
        }
        change -= u[r] * u[r] * a * delta / (a - delta);
    }
    Some(change)
}

/// Nodes whose full move to 0 or 1 is predicted to lower the objective,
/// most promising first.
pub fn flip_candidates(problem: &Problem, state: &ShapeState) -> Vec<(f64, usize, f64)> {
    let grid = &problem.grid;
    let mut out = Vec::new();
    for r in 0..grid.interior_count() {
        let (i, j) = grid.interior_ij(r);
        let n = grid.node_index(i, j);
        let phi = state.phi.get(n, 0);
        let best = [0.0, 1.0]
            .iter()
            .filter(|&&t| t != phi)
            .filter_map(|&t| predicted_move(problem, state, r, phi, t).map(|p| (p, t)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((p, t)) = best {
            if p < 0.0 {
                out.push((p, n, t));
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    out
}

struct Stepper<'a> {
    problem: &'a Problem,
    opts: &'a OptimizeOptions,
    eps: f64,
}

impl Stepper<'_> {
    fn evaluate(&self, from: &ShapeState, trial: Field) -> Result<(ShapeState, f64)> {
        let seeds = Some(from.basis.vectors.as_slice());
        let o = self.opts;
        let full = self.problem.solve(self.eps, &trial, o.k + 1, o.eig_tol, o.seed, seeds)?;
        let cand = ShapeState::from_solve(trial, self.eps, o.lambda, o.k, o.eig_tol, full);
        let j = objective_unchecked(self.problem, &cand);
        Ok((cand, j))
    }

    /// Projected gradient step with Armijo backtracking. `None` when the
    /// projected gradient vanishes.
    fn gradient_step(&self, state: &ShapeState, j: f64, scale: &mut f64) -> Result<Option<(ShapeState, f64)>> {
        let grid = &self.problem.grid;
        let g = objective_gradient(self.problem, state)?;
        let gmax = g.max_abs();
        if gmax == 0.0 {
            return Ok(None);
        }
        for _ in 0..MAX_HALVINGS {
            let trial = project_step(grid, &state.phi, &g, *scale / gmax);
            // Predicted decrease gᵀ(φ − φ_trial) ≥ 0.
            let pred: f64 = g
                .values()
                .iter()
                .zip(state.phi.values().iter().zip(trial.values()))
                .map(|(gv, (a, b))| gv * (a - b))
                .sum();
            if pred <= 0.0 {
                return Ok(None);
            }
            let (cand, jt) = self.evaluate(state, trial)?;
            if jt <= j - ARMIJO * pred + 1e-12 * j.abs() {
                *scale *= 2.0;
                return Ok(Some((cand, jt)));
            }
            *scale *= 0.5;
        }
        Err(Error::NoDescent(MAX_HALVINGS))
    }

    /// Moves the most promising nodes fully to a bound, halving the set
    /// until the exact objective decreases.
    fn flip_step(&self, state: &ShapeState, j: f64) -> Result<Option<(ShapeState, f64)>> {
        let cands = flip_candidates(self.problem, state);
        let mut take = cands.len();
        while take > 0 {
            let mut trial = state.phi.clone();
            for &(_, n, t) in &cands[..take] {
                trial.set(n, 0, t);
            }
            let (cand, jt) = self.evaluate(state, trial)?;
            if jt < j - 1e-12 * j.abs() {
                return Ok(Some((cand, jt)));
            }
            take /= 2;
        }
        Ok(None)
    }

    /// Moves the interface along its normal: `χ = 1{ψ + τ w > 0}` near the
    /// interface, with ψ the signed distance (positive inside) and `w`
    /// either the normalized Hadamard velocity `Σ|A^{1/2}∇uᵢ|²/Λ - 1` or a
    /// uniform dilation/erosion. Sub-cell τ moves whole stretches of the
    /// lattice interface at once, which single-node moves cannot do.
    fn normal_step(&self, state: &ShapeState, j: f64) -> Result<Option<(ShapeState, f64)>> {
        let problem = self.problem;
        let grid = &problem.grid;
        let h = grid.h;
        let boundary = match extract_boundary(&state.phi, 0.5) {
            Ok(b) => b,
            Err(Error::EmptyBoundary) => return Ok(None),
            Err(e) => return Err(e),
        };
        let u = Field::from_interior(*grid, &state.basis.vectors)?;
        let band = 3.0 * h;
        let near: Vec<(usize, f64, f64)> = (0..grid.interior_count())
            .into_par_iter()
            .filter_map(|r| {
                let (i, jj) = grid.interior_ij(r);
                let n = grid.node_index(i, jj);
                let x = grid.node_point(i, jj);
                let (d, seg, t) = nearest_on_boundary(&boundary, x);
                if d > band {
                    return None;
                }
                let signed = if state.phi.get(n, 0) > 0.5 { d } else { -d };
                let (a, b) = boundary.segments[seg];
                let (pa, pb) = (boundary.points[a], boundary.points[b]);
                let q = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                let (na, nb) = (boundary.normals[a], boundary.normals[b]);
                let mut nu = [na[0] + t * (nb[0] - na[0]), na[1] + t * (nb[1] - na[1])];
                let len = nu[0].hypot(nu[1]).max(1e-300);
                nu = [nu[0] / len, nu[1] / len];
                let probe = [q[0] - 2.0 * h * nu[0], q[1] - 2.0 * h * nu[1]];
                let v = if grid.dist_to_boundary(probe) > h && state.lambda > 0.0 {
                    let m = problem.cf.matrix_at(probe).ok()?;
                    let g2: f64 = (0..u.ncomp())
                        .map(|c| {
                            let gr = u.central_gradient(c, probe).unwrap_or([0.0, 0.0]);
                            gr[0] * (m[0] * gr[0] + m[1] * gr[1]) + gr[1] * (m[1] * gr[0] + m[2] * gr[1])
                        })
                        .sum();
                    g2 / state.lambda - 1.0
                } else {
                    0.0
                };
                Some((n, signed, v))
            })
            .collect();
        if near.is_empty() {
            return Ok(None);
        }
        let vmax = near.iter().fold(0.0f64, |m, e| m.max(e.2.abs()));
        let mut directions: Vec<Vec<f64>> = Vec::new();
        if vmax > 0.0 {
            directions.push(near.iter().map(|e| e.2 / vmax).collect());
        }
        directions.push(vec![1.0; near.len()]);
        directions.push(vec![-1.0; near.len()]);
        for w in &directions {
            for tau in [2.0 * h, h, 0.5 * h, 0.25 * h, 0.125 * h] {
                let mut trial = state.phi.clone();
                let mut changed = false;
                for (&(n, signed, _), &wn) in near.iter().zip(w) {
                    let v = if signed + tau * wn > 0.0 { 1.0 } else { 0.0 };
                    if v != state.phi.get(n, 0) {
                        changed = true;
                        trial.set(n, 0, v);
                    }
                }
                if !changed {
                    continue;
                }
                let (cand, jt) = self.evaluate(state, trial)?;
                if jt < j - 1e-12 * j.abs() {
                    return Ok(Some((cand, jt)));
                }
            }
        }
        Ok(None)
    }
}

pub fn optimize_problem(problem: &Problem, opts: &OptimizeOptions) -> Result<ShapeState> {
    opts.validate()?;
    let grid = &problem.grid;
    let phi = opts.phi0.build(grid)?;
    let schedule = eps_schedule(opts.eps0, opts.eps_min, opts.eps_factor);

    let mut state = problem.state(phi, schedule[0], opts.lambda, opts.k, opts.eig_tol, opts.seed)?;
    let mut history = Vec::new();
    let mut iteration = 0;

    for &eps in &schedule {
        let stepper = Stepper { problem, opts, eps };
        if eps != state.eps {
            let phi = state.phi.clone();
            state = stepper.evaluate(&state, phi)?.0;
        }
        let mut j = objective_unchecked(problem, &state);
        history.push(HistoryEntry { iteration, objective: j, eps });
        let mut scale = opts.step0;
        let mut done = false;
        for _ in 0..opts.max_iters {
            let rel = |a: f64, b: f64| (a - b) / a.abs().max(f64::MIN_POSITIVE);
            let mut step = stepper.gradient_step(&state, j, &mut scale)?;
            if !matches!(&step, Some((_, jt)) if rel(j, *jt) >= opts.tol) {
                let base = step.as_ref().map_or(&state, |s| &s.0);
                let jb = step.as_ref().map_or(j, |s| s.1);
                if let Some(f) = stepper.flip_step(base, jb)? {
                    step = Some(f);
                } else if let Some(f) = stepper.normal_step(base, jb)? {
                    step = Some(f);
                }
            }
            match step {
                None => {
                    done = true;
                    break;
                }
                Some((cand, jt)) => {
                    iteration += 1;
                    let change = rel(j, jt);
                    state = cand;
                    j = jt;
                    history.push(HistoryEntry { iteration, objective: j, eps });
                    if change < opts.tol {
                        done = true;
                        break;
                    }
                }
            }
        }
        if !done {
            return Err(Error::NoConvergence(format!(
                "ε = {eps:e}: no stationarity after {} iterations",
                opts.max_iters
            )));
        }
    }
    state.objective_history = history;
    Ok(state)
}

/// Thresholded shape and its 4-connected components.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMap {
    pub chi: Field,
    /// 0 outside the shape, component id (from 1) inside.
    pub labels: Vec<usize>,
    pub count: usize,
    /// Pairs of components whose one-cell dilations meet strictly inside D.
    pub touching: Vec<(usize, usize)>,
    /// `content[c][i]`: M-mass of `uᵢ` carried by component `c + 1`.
    pub content: Vec<Vec<f64>>,
}

impl ComponentMap {
    pub fn disjoint(&self) -> bool {
        self.touching.is_empty()
    }

    pub fn exceeds(&self, k: usize) -> bool {
        self.count > k
    }

    /// Fills `content` from an eigenbasis.
    pub fn with_content(mut self, problem: &Problem, basis: &EigenBasis) -> Self {
        let grid = &problem.grid;
        let mut content = vec![vec![0.0; basis.len()]; self.count];
        for r in 0..grid.interior_count() {
            let (i, j) = grid.interior_ij(r);
            let l = self.labels[grid.node_index(i, j)];
            if l > 0 {
                for (q, u) in basis.vectors.iter().enumerate() {
                    content[l - 1][q] += problem.mass_diag[r] * u[r] * u[r];
                }
            }
        }
        self.content = content;
        self
    }

    pub fn volume(&self) -> f64 {
        let g = self.chi.grid();
        self.chi.values().iter().sum::<f64>() * g.h * g.h
    }
}

/// `χ = 1{φ > level}` with 4-connected labeling and the disjointness audit.
pub fn threshold_components(phi: &Field, level: f64) -> Result<ComponentMap> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::BadParams(format!("level {level} outside (0,1)")));
    }
    let grid = *phi.grid();
    let chi = Field::from_values(
        grid,
        1,
        phi.values().iter().map(|&v| if v > level { 1.0 } else { 0.0 }).collect(),
    )?;
    let n = grid.node_count();
    let mut labels = vec![0usize; n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if chi.get(start, 0) == 0.0 || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        queue.push_back(start);
        while let Some(node) = queue.pop_front() {
            let (i, j) = grid.node_ij(node);
            let nbrs = [
                (i.wrapping_sub(1), j),
                (i + 1, j),
                (i, j.wrapping_sub(1)),
                (i, j + 1),
            ];
            for (a, b) in nbrs {
                if a < grid.nodes_x() && b < grid.nodes_y() {
                    let m = grid.node_index(a, b);
                    if chi.get(m, 0) == 1.0 && labels[m] == 0 {
                        labels[m] = count;
                        queue.push_back(m);
                    }
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyShape);
    }
    let mut touching = BTreeSet::new();
    for j in 1..grid.ny {
        for i in 1..grid.nx {
            let mut seen = BTreeSet::new();
            for b in j - 1..=j + 1 {
                for a in i - 1..=i + 1 {
                    let l = labels[grid.node_index(a, b)];
                    if l > 0 {
                        seen.insert(l);
                    }
                }
            }
            let ids: Vec<usize> = seen.into_iter().collect();
            for x in 0..ids.len() {
                for y in x + 1..ids.len() {
                    touching.insert((ids[x], ids[y]));
                }
            }
        }
    }
    Ok(ComponentMap {
        chi,
        labels,
        count,
        touching: touching.into_iter().collect(),
        content: Vec::new(),
    })
}

/// Clusters among `state`'s first k pairs plus `λ_{k+1}`.
pub fn clusters_with_next(state: &ShapeState) -> Vec<(usize, usize)> {
    let mut l = state.basis.lambdas.clone();
    l.push(state.lambda_next);
    find_clusters(&l)
}
