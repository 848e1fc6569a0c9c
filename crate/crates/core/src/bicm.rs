// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Bipartite Configuration Model.
//!
//! The model assigns every user a fitness `x_i` and every URL a fitness
//! `y_a`; links appear independently with probability
//! `p_ia = x_i y_a / (1 + x_i y_a)`. Fitting solves the maximum-likelihood
//! conditions `sum_a p_ia = k_i` and `sum_i p_ia = d_a`.
//!
//! Nodes whose degree is zero or equal to the size of the opposite layer
//! have fitness `0` or `+inf` and are peeled off before the numerical solve.
//! Peeling is repeated, because removing a full node lowers the residual
//! degree of every node on the other side. Each forced node remembers the
//! round it was peeled in: the probability between two forced nodes is
//! decided by the one peeled first.
//!
//! The remaining system is solved over degree classes, since nodes with
//! equal degree share a fitness at the optimum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{BipartiteGraph, Layer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BicmError {
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("graph has no users or no URLs")]
    EmptyGraph,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    FixedPoint,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Bound on the maximum relative degree residual.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub method: SolverMethod,
    /// Fixed-point only: switch to Newton steps once the iteration stops
    /// making progress.
    pub newton_refinement: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-8,
            max_iterations: 10_000,
            method: SolverMethod::FixedPoint,
            newton_refinement: true,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), BicmError> {
        if !(self.tolerance > 0.0) {
            return Err(BicmError::InvalidConfig("tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(BicmError::InvalidConfig("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Fitness of a single node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fitness {
    Finite(f64),
    /// Degenerate node: `full` means fitness `+inf`, otherwise `0`.
    Forced { full: bool, round: u32 },
}

impl Fitness {
    pub const ZERO: Fitness = Fitness::Forced { full: false, round: 0 };
    pub const INFINITE: Fitness = Fitness::Forced { full: true, round: 0 };

    /// Numeric value, with `+inf` for forced-full nodes.
    pub fn value(self) -> f64 {
        match self {
            Fitness::Finite(v) => v,
            Fitness::Forced { full: true, .. } => f64::INFINITY,
            Fitness::Forced { full: false, .. } => 0.0,
        }
    }
}

/// Link probability between a user and a URL with the given fitnesses.
pub fn pair_probability(user: Fitness, url: Fitness) -> f64 {
    match (user, url) {
        (Fitness::Forced { full: a, round: ra }, Fitness::Forced { full: b, round: rb }) => {
            let full = if ra <= rb { a } else { b };
            if full {
                1.0
            } else {
                0.0
            }
        }
        (Fitness::Forced { full, .. }, Fitness::Finite(_))
        | (Fitness::Finite(_), Fitness::Forced { full, .. }) => {
            if full {
                1.0
            } else {
                0.0
            }
        }
        (Fitness::Finite(x), Fitness::Finite(y)) => {
            let xy = x * y;
            if xy.is_infinite() {
                1.0
            } else {
                xy / (1.0 + xy)
            }
        }
    }
}

/// A fitted null model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicmModel {
    user_fitness: Vec<Fitness>,
    url_fitness: Vec<Fitness>,
    tolerance_achieved: f64,
    iterations: usize,
}

impl BicmModel {
    /// Builds a model from explicit fitnesses.
    pub fn from_fitness(user_fitness: Vec<Fitness>, url_fitness: Vec<Fitness>) -> Self {
        BicmModel {
            user_fitness,
            url_fitness,
            tolerance_achieved: f64::NAN,
            iterations: 0,
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_fitness.len()
    }

    pub fn n_urls(&self) -> usize {
        self.url_fitness.len()
    }

    pub fn user_fitness(&self) -> &[Fitness] {
        &self.user_fitness
    }

    pub fn url_fitness(&self) -> &[Fitness] {
        &self.url_fitness
    }

    /// Maximum relative degree residual reached by the solver.
    pub fn tolerance_achieved(&self) -> f64 {
        self.tolerance_achieved
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn link_probability(&self, user: usize, url: usize) -> Result<f64, BicmError> {
        let x = *self.user_fitness.get(user).ok_or(BicmError::IndexOutOfRange {
            index: user,
            len: self.n_users(),
        })?;
        let y = *self.url_fitness.get(url).ok_or(BicmError::IndexOutOfRange {
            index: url,
            len: self.n_urls(),
        })?;
        Ok(pair_probability(x, y))
    }

    pub fn expected_degree(&self, layer: Layer, node: usize) -> Result<f64, BicmError> {
        let (own, other) = match layer {
            Layer::User => (&self.user_fitness, &self.url_fitness),
            Layer::Url => (&self.url_fitness, &self.user_fitness),
        };
        let f = *own.get(node).ok_or(BicmError::IndexOutOfRange {
            index: node,
            len: own.len(),
        })?;
        Ok(other
            .iter()
            .map(|&g| match layer {
                Layer::User => pair_probability(f, g),
                Layer::Url => pair_probability(g, f),
            })
            .sum())
    }

    /// Distinct user fitnesses with their multiplicities, in an order that
    /// does not depend on user labels.
    pub fn user_groups(&self) -> Vec<(Fitness, usize)> {
        let mut groups: Vec<(Fitness, usize)> = Vec::new();
        let mut index: std::collections::HashMap<(u8, u64, u32), usize> = std::collections::HashMap::new();
        for f in &self.user_fitness {
            let key = fitness_key(*f);
            match index.get(&key) {
                Some(&g) => groups[g].1 += 1,
                None => {
                    index.insert(key, groups.len());
                    groups.push((*f, 1));
                }
            }
        }
        groups.sort_by_key(|(f, _)| fitness_key(*f));
        groups
    }

    /// Dense `n_users × n_urls` probability matrix, row-major.
    pub fn probability_matrix(&self) -> Vec<Vec<f64>> {
        self.user_fitness
            .iter()
            .map(|&x| self.url_fitness.iter().map(|&y| pair_probability(x, y)).collect())
            .collect()
    }
}

fn fitness_key(f: Fitness) -> (u8, u64, u32) {
    match f {
        Fitness::Finite(v) => (0, v.to_bits(), 0),
        Fitness::Forced { full, round } => (1 + full as u8, 0, round),
    }
}

/// A degree class in the reduced system.
#[derive(Debug, Clone)]
struct Class {
    /// Original degree, used for the relative residual.
    degree: f64,
    /// Degree left after removing links to forced-full partners.
    target: f64,
    size: f64,
}

struct Reduced {
    users: Vec<Class>,
    urls: Vec<Class>,
}

impl Reduced {
    fn dim(&self) -> usize {
        self.users.len() + self.urls.len()
    }

    /// Expected reduced degrees for log-fitnesses `theta` (users) and `eta`
    /// (URLs).
    fn expected(&self, theta: &[f64], eta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut eu = vec![0.0; self.users.len()];
        let mut ea = vec![0.0; self.urls.len()];
        for (c, uc) in self.users.iter().enumerate() {
            for (g, ac) in self.urls.iter().enumerate() {
                let p = logistic(theta[c] + eta[g]);
                eu[c] += ac.size * p;
                ea[g] += uc.size * p;
            }
        }
        (eu, ea)
    }

    fn residual(&self, theta: &[f64], eta: &[f64]) -> f64 {
        let (eu, ea) = self.expected(theta, eta);
        let r_users = self
            .users
            .iter()
            .zip(&eu)
            .map(|(c, e)| (e - c.target).abs() / c.degree.max(1.0));
        let r_urls = self
            .urls
            .iter()
            .zip(&ea)
            .map(|(c, e)| (e - c.target).abs() / c.degree.max(1.0));
        r_users.chain(r_urls).fold(0.0, f64::max)
    }

    /// Negative log-likelihood, convex in `(theta, eta)`.
    fn objective(&self, theta: &[f64], eta: &[f64]) -> f64 {
        let mut total = 0.0;
        for (c, uc) in self.users.iter().enumerate() {
            let mut row = 0.0;
            for (g, ac) in self.urls.iter().enumerate() {
                row += ac.size * softplus(theta[c] + eta[g]);
            }
            total += uc.size * (row - uc.target * theta[c]);
        }
        for (g, ac) in self.urls.iter().enumerate() {
            total -= ac.size * ac.target * eta[g];
        }
        total
    }

    fn fixed_point_step(&self, theta: &mut [f64], eta: &mut [f64]) {
        let x: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
        let y: Vec<f64> = eta.iter().map(|t| t.exp()).collect();
        for (c, uc) in self.users.iter().enumerate() {
            let denom: f64 = self
                .urls
                .iter()
                .zip(&y)
                .map(|(ac, &yg)| ac.size * yg / (1.0 + x[c] * yg))
                .sum();
            theta[c] = (uc.target / denom).ln();
        }
        for (g, ac) in self.urls.iter().enumerate() {
            let denom: f64 = self
                .users
                .iter()
                .zip(&x)
                .map(|(uc, &xc)| uc.size * xc / (1.0 + xc * y[g]))
                .sum();
            eta[g] = (ac.target / denom).ln();
        }
    }

    /// One damped Newton step on the negative log-likelihood. Returns false
    /// when no descent step could be found.
    fn newton_step(&self, theta: &mut [f64], eta: &mut [f64]) -> bool {
        let nu = self.users.len();
        let n = self.dim();
        let mut grad = DVector::<f64>::zeros(n);
        let mut hess = DMatrix::<f64>::zeros(n, n);
        for (c, uc) in self.users.iter().enumerate() {
            for (g, ac) in self.urls.iter().enumerate() {
                let p = logistic(theta[c] + eta[g]);
                let w = uc.size * ac.size * p * (1.0 - p);
                grad[c] += uc.size * ac.size * p;
                grad[nu + g] += uc.size * ac.size * p;
                hess[(c, c)] += w;
                hess[(nu + g, nu + g)] += w;
                hess[(c, nu + g)] += w;
                hess[(nu + g, c)] += w;
            }
        }
        for (c, uc) in self.users.iter().enumerate() {
            grad[c] -= uc.size * uc.target;
        }
        for (g, ac) in self.urls.iter().enumerate() {
            grad[nu + g] -= ac.size * ac.target;
        }
        let scale = (0..n).map(|i| hess[(i, i)]).fold(0.0, f64::max).max(1e-300);
        let mut shift = 1e-12 * scale;
        let direction = loop {
            let mut h = hess.clone();
            for i in 0..n {
                h[(i, i)] += shift;
            }
            if let Some(chol) = h.cholesky() {
                break -chol.solve(&grad);
            }
            shift *= 100.0;
            if shift > scale {
                return false;
            }
        };
        let slope = grad.dot(&direction);
        if !(slope < 0.0) {
            return false;
        }
        let base = self.objective(theta, eta);
        let mut step = 1.0;
        for _ in 0..60 {
            let t: Vec<f64> = (0..nu).map(|c| theta[c] + step * direction[c]).collect();
            let e: Vec<f64> = (0..n - nu).map(|g| eta[g] + step * direction[nu + g]).collect();
            let value = self.objective(&t, &e);
            if value <= base + 1e-4 * step * slope || (value - base).abs() <= 1e-15 * base.abs() {
                theta.copy_from_slice(&t);
                eta.copy_from_slice(&e);
                return true;
            }
            step *= 0.5;
        }
        false
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Per-class peeling state for one layer.
struct LayerState {
    degrees: Vec<u32>,
    sizes: Vec<usize>,
    forced: Vec<Option<Fitness>>,
}

impl LayerState {
    fn new(classes: &[crate::graph::DegreeClass]) -> Self {
        LayerState {
            degrees: classes.iter().map(|c| c.degree).collect(),
            sizes: classes.iter().map(|c| c.members.len()).collect(),
            forced: vec![None; classes.len()],
        }
    }

    fn active(&self) -> usize {
        self.forced
            .iter()
            .zip(&self.sizes)
            .filter(|(f, _)| f.is_none())
            .map(|(_, s)| s)
            .sum()
    }
}

/// Marks degenerate classes on both layers until none remain. Returns the
/// number of full nodes removed from each layer.
fn peel(users: &mut LayerState, urls: &mut LayerState) -> (usize, usize) {
    let mut full_users = 0usize;
    let mut full_urls = 0usize;
    let mut round = 0u32;
    loop {
        let n_users = users.active();
        let n_urls = urls.active();
        let mut changed = false;
        let mut new_full_users = 0;
        let mut new_full_urls = 0;
        for c in 0..users.degrees.len() {
            if users.forced[c].is_some() {
                continue;
            }
            let residual = users.degrees[c] as usize - full_urls;
            if residual == 0 || residual == n_urls {
                let full = residual == n_urls && n_urls > 0;
                users.forced[c] = Some(Fitness::Forced { full, round });
                if full {
                    new_full_users += users.sizes[c];
                }
                changed = true;
            }
        }
        for g in 0..urls.degrees.len() {
            if urls.forced[g].is_some() {
                continue;
            }
            let residual = urls.degrees[g] as usize - full_users;
            if residual == 0 || residual == n_users {
                let full = residual == n_users && n_users > 0;
                urls.forced[g] = Some(Fitness::Forced { full, round });
                if full {
                    new_full_urls += urls.sizes[g];
                }
                changed = true;
            }
        }
        if !changed {
            return (full_users, full_urls);
        }
        full_users += new_full_users;
        full_urls += new_full_urls;
        round += 1;
    }
}

/// Fits the model by maximum likelihood.
pub fn fit_bicm(graph: &BipartiteGraph, config: &SolverConfig) -> Result<BicmModel, BicmError> {
    config.validate()?;
    if graph.n_users() == 0 || graph.n_urls() == 0 {
        return Err(BicmError::EmptyGraph);
    }
    let classes = graph.degree_classes();
    let mut users = LayerState::new(&classes.user_classes);
    let mut urls = LayerState::new(&classes.url_classes);
    let (full_users, full_urls) = peel(&mut users, &mut urls);

    let free_users: Vec<usize> = (0..users.degrees.len()).filter(|&c| users.forced[c].is_none()).collect();
    let free_urls: Vec<usize> = (0..urls.degrees.len()).filter(|&g| urls.forced[g].is_none()).collect();
    let reduced = Reduced {
        users: free_users
            .iter()
            .map(|&c| Class {
                degree: users.degrees[c] as f64,
                target: (users.degrees[c] as usize - full_urls) as f64,
                size: users.sizes[c] as f64,
            })
            .collect(),
        urls: free_urls
            .iter()
            .map(|&g| Class {
                degree: urls.degrees[g] as f64,
                target: (urls.degrees[g] as usize - full_users) as f64,
                size: urls.sizes[g] as f64,
            })
            .collect(),
    };

    let (theta, eta, iterations, residual) = if reduced.dim() == 0 {
        (Vec::new(), Vec::new(), 0, 0.0)
    } else {
        solve(&reduced, config)?
    };

    let mut user_class_fitness: Vec<Fitness> = users.forced.iter().map(|f| f.unwrap_or(Fitness::ZERO)).collect();
    for (i, &c) in free_users.iter().enumerate() {
        user_class_fitness[c] = Fitness::Finite(theta[i].exp());
    }
    let mut url_class_fitness: Vec<Fitness> = urls.forced.iter().map(|f| f.unwrap_or(Fitness::ZERO)).collect();
    for (i, &g) in free_urls.iter().enumerate() {
        url_class_fitness[g] = Fitness::Finite(eta[i].exp());
    }

    let mut user_fitness = vec![Fitness::ZERO; graph.n_users()];
    for (class, f) in classes.user_classes.iter().zip(&user_class_fitness) {
        for &m in &class.members {
            user_fitness[m] = *f;
        }
    }
    let mut url_fitness = vec![Fitness::ZERO; graph.n_urls()];
    for (class, f) in classes.url_classes.iter().zip(&url_class_fitness) {
        for &m in &class.members {
            url_fitness[m] = *f;
        }
    }
    Ok(BicmModel {
        user_fitness,
        url_fitness,
        tolerance_achieved: residual,
        iterations,
    })
}

/// Iterations without a 1% residual improvement before the fixed-point
/// loop hands over to Newton.
const STALL_WINDOW: usize = 50;

/// Extra Newton steps taken after the tolerance is met.
const POLISH_STEPS: usize = 2;

fn solve(reduced: &Reduced, config: &SolverConfig) -> Result<(Vec<f64>, Vec<f64>, usize, f64), BicmError> {
    let total: f64 = reduced.users.iter().map(|c| c.size * c.target).sum();
    let norm = total.sqrt();
    let mut theta: Vec<f64> = reduced.users.iter().map(|c| (c.target / norm).ln()).collect();
    let mut eta: Vec<f64> = reduced.urls.iter().map(|c| (c.target / norm).ln()).collect();

    let mut residual = reduced.residual(&theta, &eta);
    let mut newton = config.method == SolverMethod::Newton;
    let mut best = residual;
    let mut since_best = 0usize;
    let mut iterations = 0;
    while residual > config.tolerance {
        if iterations >= config.max_iterations {
            return Err(BicmError::NoConvergence { iterations, residual });
        }
        iterations += 1;
        if newton {
            if !reduced.newton_step(&mut theta, &mut eta) {
                residual = reduced.residual(&theta, &eta);
                if residual <= config.tolerance {
                    break;
                }
                return Err(BicmError::NoConvergence { iterations, residual });
            }
        } else {
            reduced.fixed_point_step(&mut theta, &mut eta);
        }
        residual = reduced.residual(&theta, &eta);
        if !residual.is_finite() {
            return Err(BicmError::NoConvergence { iterations, residual });
        }
        if residual < 0.99 * best {
            best = residual;
            since_best = 0;
        } else {
            since_best += 1;
            if config.newton_refinement && since_best >= STALL_WINDOW {
                newton = true;
            }
        }
    }

    if config.newton_refinement || config.method == SolverMethod::Newton {
        for _ in 0..POLISH_STEPS {
            let (mut t, mut e) = (theta.clone(), eta.clone());
            if !reduced.newton_step(&mut t, &mut e) {
                break;
            }
            let polished = reduced.residual(&t, &e);
            if !(polished < residual) {
                break;
            }
            theta = t;
            eta = e;
            residual = polished;
        }
    }

    // Balanced gauge: equal mean log-fitness on both layers.
    let n_users: f64 = reduced.users.iter().map(|c| c.size).sum();
    let n_urls: f64 = reduced.urls.iter().map(|c| c.size).sum();
    let mean_theta = reduced.users.iter().zip(&theta).map(|(c, t)| c.size * t).sum::<f64>() / n_users;
    let mean_eta = reduced.urls.iter().zip(&eta).map(|(c, e)| c.size * e).sum::<f64>() / n_urls;
    let shift = (mean_eta - mean_theta) / 2.0;
    theta.iter_mut().for_each(|t| *t += shift);
    eta.iter_mut().for_each(|e| *e -= shift);
    let residual = reduced.residual(&theta, &eta);
    Ok((theta, eta, iterations, residual))
}

/// Maximum relative degree residual of `model` against `graph`, computed
/// node by node.
pub fn max_relative_residual(model: &BicmModel, graph: &BipartiteGraph) -> f64 {
    let mut worst = 0.0f64;
    for layer in [Layer::User, Layer::Url] {
        for (node, &k) in graph.degrees(layer).iter().enumerate() {
            let e = model.expected_degree(layer, node).expect("node in range");
            worst = worst.max((e - k as f64).abs() / (k as f64).max(1.0));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture() -> BipartiteGraph {
        BipartiteGraph::from_edges(3, 3, [(0, 0), (0, 1), (1, 0), (1, 2), (2, 1)]).unwrap()
    }

    // Dense fixed-point iteration run to 1e-14 outside this crate.
    const FIXTURE_X: [f64; 3] = [1.906401136438338, 1.906401136438338, 0.39823526118789887];
    const FIXTURE_P_HIGH: f64 = 0.7842207213342534;
    const FIXTURE_P_MID: f64 = 0.4315585573314797;
    const FIXTURE_P_LOW: f64 = 0.13688288533704884;

    #[test]
    fn fixture_matches_dense_oracle() {
        for method in [SolverMethod::FixedPoint, SolverMethod::Newton] {
            let config = SolverConfig { method, ..Default::default() };
            let model = fit_bicm(&fixture(), &config).unwrap();
            for i in 0..3 {
                let Fitness::Finite(x) = model.user_fitness()[i] else { panic!() };
                let Fitness::Finite(y) = model.url_fitness()[i] else { panic!() };
                assert!((x - FIXTURE_X[i]).abs() < 1e-8, "{method:?} x{i} = {x}");
                assert!((y - FIXTURE_X[i]).abs() < 1e-8, "{method:?} y{i} = {y}");
            }
            let expected = [
                [FIXTURE_P_HIGH, FIXTURE_P_HIGH, FIXTURE_P_MID],
                [FIXTURE_P_HIGH, FIXTURE_P_HIGH, FIXTURE_P_MID],
                [FIXTURE_P_MID, FIXTURE_P_MID, FIXTURE_P_LOW],
            ];
            for (row, exp_row) in model.probability_matrix().iter().zip(expected) {
                for (p, e) in row.iter().zip(exp_row) {
                    assert!((p - e).abs() < 1e-8);
                }
            }
            let e0 = model.expected_degree(Layer::User, 0).unwrap();
            assert!((e0 - 2.0).abs() < 1e-8);
            assert!(model.tolerance_achieved() <= 1e-8);
        }
    }

    #[test]
    fn complete_graph_forces_ones() {
        let edges = (0..3).flat_map(|i| (0..4).map(move |a| (i, a)));
        let g = BipartiteGraph::from_edges(3, 4, edges).unwrap();
        let model = fit_bicm(&g, &SolverConfig::default()).unwrap();
        assert!(model.probability_matrix().iter().flatten().all(|&p| p == 1.0));
        assert_eq!(model.tolerance_achieved(), 0.0);
        assert_eq!(max_relative_residual(&model, &g), 0.0);
    }

    #[test]
    fn isolated_url_has_zero_column() {
        let g = BipartiteGraph::from_edges(3, 4, [(0, 0), (0, 1), (1, 1), (1, 2), (2, 0)]).unwrap();
        let model = fit_bicm(&g, &SolverConfig::default()).unwrap();
        for i in 0..3 {
            assert_eq!(model.link_probability(i, 3).unwrap(), 0.0);
        }
        assert_eq!(model.expected_degree(Layer::Url, 3).unwrap(), 0.0);
        assert!(max_relative_residual(&model, &g) <= 1e-8);
    }

    #[test]
    fn nested_graph_peels_completely() {
        // Ferrers shape: every node is forced after a few rounds.
        let g = BipartiteGraph::from_edges(3, 3, [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0)]).unwrap();
        let model = fit_bicm(&g, &SolverConfig::default()).unwrap();
        let expected = [[1.0, 1.0, 1.0], [1.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
        for (row, e) in model.probability_matrix().iter().zip(expected) {
            assert_eq!(row.as_slice(), e.as_slice());
        }
    }

    #[test]
    fn later_rounds_respect_earlier_markers() {
        // URL 3 is isolated (zero, round 0). Users 0 and 1 then share every
        // remaining URL and become full in round 1; they must still get
        // probability zero with URL 3.
        let g = BipartiteGraph::from_edges(
            4,
            4,
            [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (2, 0), (3, 1)],
        )
        .unwrap();
        let model = fit_bicm(&g, &SolverConfig::default()).unwrap();
        assert_eq!(model.link_probability(0, 3).unwrap(), 0.0);
        assert_eq!(model.link_probability(0, 2).unwrap(), 1.0);
        assert!(max_relative_residual(&model, &g) <= 1e-8);
    }

    #[test]
    fn link_probability_examples() {
        let model = BicmModel::from_fitness(
            vec![Fitness::ZERO, Fitness::Finite(1.0), Fitness::INFINITE],
            vec![Fitness::Finite(1.0), Fitness::Finite(3.0)],
        );
        assert_eq!(model.link_probability(0, 0).unwrap(), 0.0);
        assert_eq!(model.link_probability(1, 0).unwrap(), 0.5);
        assert_eq!(model.link_probability(2, 0).unwrap(), 1.0);
        assert_eq!(model.link_probability(2, 1).unwrap(), 1.0);
        assert_eq!(
            model.link_probability(3, 0),
            Err(BicmError::IndexOutOfRange { index: 3, len: 3 })
        );
        assert_eq!(model.expected_degree(Layer::User, 0).unwrap(), 0.0);
        assert!(model.expected_degree(Layer::Url, 9).is_err());
    }

    #[test]
    fn rejects_bad_config_and_empty_graph() {
        let bad = SolverConfig { tolerance: 0.0, ..Default::default() };
        assert!(matches!(fit_bicm(&fixture(), &bad), Err(BicmError::InvalidConfig(_))));
        let empty = BipartiteGraph::from_edges(0, 3, []).unwrap();
        assert_eq!(fit_bicm(&empty, &SolverConfig::default()), Err(BicmError::EmptyGraph));
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        let config = SolverConfig {
            max_iterations: 1,
            newton_refinement: false,
            ..Default::default()
        };
        assert!(matches!(
            fit_bicm(&fixture(), &config),
            Err(BicmError::NoConvergence { iterations: 1, .. })
        ));
    }

    fn random_graph() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize)>)> {
        (2usize..12, 2usize..12).prop_flat_map(|(n, m)| {
            (Just(n), Just(m), prop::collection::vec((0..n, 0..m), 1..(n * m)))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fitted_models_satisfy_invariants((n, m, edges) in random_graph()) {
            let g = BipartiteGraph::from_edges(n, m, edges.clone()).unwrap();
            let model = match fit_bicm(&g, &SolverConfig::default()) {
                Ok(model) => model,
                // Degree sequences on the boundary of the feasible region
                // have no finite maximum-likelihood point.
                Err(BicmError::NoConvergence { .. }) => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            prop_assert!(max_relative_residual(&model, &g) <= 1e-8);
            for p in model.probability_matrix().into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&p));
            }
            for layer in [Layer::User, Layer::Url] {
                let degrees = g.degrees(layer);
                let fit = match layer { Layer::User => model.user_fitness(), Layer::Url => model.url_fitness() };
                for a in 0..degrees.len() {
                    for b in 0..degrees.len() {
                        if degrees[a] == degrees[b] {
                            prop_assert!(fit[a] == fit[b] || (fit[a].value() - fit[b].value()).abs() <= 1e-10);
                        }
                        if degrees[a] > degrees[b] {
                            prop_assert!(fit[a].value() >= fit[b].value());
                        }
                    }
                }
            }

            // Reversing user labels permutes rows of the probability matrix.
            let reversed: Vec<(usize, usize)> = edges.iter().map(|&(i, a)| (n - 1 - i, a)).collect();
            let g2 = BipartiteGraph::from_edges(n, m, reversed).unwrap();
            let model2 = fit_bicm(&g2, &SolverConfig::default()).unwrap();
            let p1 = model.probability_matrix();
            let p2 = model2.probability_matrix();
            for i in 0..n {
                prop_assert_eq!(&p1[i], &p2[n - 1 - i]);
            }
        }
    }
}
