//! ReLU equalization: derive the compound inequality matching a criticality
//! order, enumerate feasible integer hyperparameter tuples over bounded
//! domains, and pick the minimal ones.
//!
//! Stage k's relative ReLU weight is `phi_k * prod(lambda_j, j < k) /
//! 4^(k-1)`: each stage contributes `2*phi_k` ReLU sites over channels that
//! have grown by the lambda prefix while the pixel count shrank 4x per
//! stage. A tuple equalizes the network when these weights strictly
//! decrease along the criticality order.

use std::fmt;

use crate::criticality::CriticalityOrder;
use crate::error::{Error, Result};
use crate::network::{InputDims, NetworkSpec};

/// Which hyperparameters the solver frees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqualizationMode {
    /// Free channel multipliers, fixed stage compute ratios.
    Width,
    /// Free stage compute ratios, fixed channel multipliers.
    Depth,
    /// Both free. The grid is the product of both domains; keep bounds
    /// tight.
    Mixed,
}

#[derive(Debug, Clone)]
pub struct EqualizationProblem {
    pub order: CriticalityOrder,
    pub mode: EqualizationMode,
    /// Stage compute ratios; fixed unless depth/mixed mode frees them.
    pub phi: Vec<u32>,
    /// Channel multipliers; fixed unless width/mixed mode frees them.
    pub lambda: Vec<u32>,
    /// Inclusive bounds for free multipliers.
    pub lambda_bounds: (u32, u32),
    /// Inclusive bounds for free compute ratios.
    pub phi_bounds: (u32, u32),
}

pub const DEFAULT_LAMBDA_BOUNDS: (u32, u32) = (2, 16);
pub const DEFAULT_PHI_BOUNDS: (u32, u32) = (1, 16);

impl EqualizationProblem {
    /// Width-mode problem with the given fixed compute ratios.
    pub fn width(order: CriticalityOrder, phi: Vec<u32>) -> Result<Self> {
        let p = Self {
            lambda: vec![2; phi.len().saturating_sub(1)],
            order,
            mode: EqualizationMode::Width,
            phi,
            lambda_bounds: DEFAULT_LAMBDA_BOUNDS,
            phi_bounds: DEFAULT_PHI_BOUNDS,
        };
        p.validate()?;
        Ok(p)
    }

    /// Depth-mode problem with the given fixed multipliers.
    pub fn depth(order: CriticalityOrder, lambda: Vec<u32>) -> Result<Self> {
        let p = Self {
            phi: vec![1; lambda.len() + 1],
            order,
            mode: EqualizationMode::Depth,
            lambda,
            lambda_bounds: DEFAULT_LAMBDA_BOUNDS,
            phi_bounds: DEFAULT_PHI_BOUNDS,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_lambda_bounds(mut self, lo: u32, hi: u32) -> Self {
        self.lambda_bounds = (lo, hi);
        self
    }

    pub fn with_phi_bounds(mut self, lo: u32, hi: u32) -> Self {
        self.phi_bounds = (lo, hi);
        self
    }

    pub fn stage_count(&self) -> usize {
        self.phi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.phi.len();
        if !(2..=6).contains(&d) {
            return Err(Error::BadStageCount(d));
        }
        if self.order.len() != d {
            return Err(Error::IncompleteOrder { expected: d });
        }
        if self.lambda.len() != d - 1 {
            return Err(Error::IncompleteOrder { expected: d });
        }
        if self.lambda_bounds.0 > self.lambda_bounds.1
            || self.phi_bounds.0 > self.phi_bounds.1
            || self.lambda_bounds.0 == 0
            || self.phi_bounds.0 == 0
        {
            return Err(Error::BadCalibration(
                "hyperparameter bounds must be nonempty and positive".into(),
            ));
        }
        Ok(())
    }
}

/// One feasible assignment of every hyperparameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EqualizationSolution {
    pub phi: Vec<u32>,
    pub lambda: Vec<u32>,
}

impl EqualizationSolution {
    /// Integer-scaled relative ReLU weights: `phi_k * prod(lambda) *
    /// 4^(D-k)`; comparisons between them are exact.
    pub fn weights(&self) -> Vec<u64> {
        scaled_weights(&self.phi, &self.lambda)
    }

    /// "5x5x3x" for width tuples.
    pub fn lambda_tag(&self) -> String {
        self.lambda.iter().map(|l| format!("{l}x")).collect()
    }
}

fn scaled_weights(phi: &[u32], lambda: &[u32]) -> Vec<u64> {
    let d = phi.len();
    let mut prefix = 1u64;
    (0..d)
        .map(|k| {
            if k > 0 {
                prefix *= lambda[k - 1] as u64;
            }
            phi[k] as u64 * prefix * 4u64.pow((d - 1 - k) as u32)
        })
        .collect()
}

/// True when the weights strictly decrease along the criticality order.
fn chain_holds(weights: &[u64], order: &CriticalityOrder) -> bool {
    order
        .stages()
        .windows(2)
        .all(|w| weights[w[0] - 1] > weights[w[1] - 1])
}

// --- Symbolic constraints ---------------------------------------------------

/// A reduced positive rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    fn new(num: u64, den: u64) -> Self {
        let g = gcd(num.max(1), den.max(1));
        Self { num: num / g, den: den / g }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Relation {
    Greater,
    Less,
}

/// One free variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    /// Channel multiplier index, 0-based (lambda_1 is `Lambda(0)`).
    Lambda(usize),
    /// Stage compute ratio, 0-based stage index.
    Phi(usize),
}

/// A monomial constraint `prod(num_vars) / prod(den_vars) REL bound` over
/// the problem's free variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub num_vars: Vec<Var>,
    pub den_vars: Vec<Var>,
    pub relation: Relation,
    pub bound: Ratio,
    /// Stage pair (more critical, less critical) this constraint encodes.
    pub stages: (usize, usize),
}

impl Constraint {
    /// Renders e.g. "αβ > 16" (four-stage width problems name the
    /// multipliers α, β, γ; other arities use λ1.. and φ1..).
    pub fn display(&self, stage_count: usize) -> String {
        let var_name = |v: &Var| -> String {
            match *v {
                Var::Lambda(j) if stage_count == 4 => ["α", "β", "γ"][j].to_string(),
                Var::Lambda(j) => format!("λ{}", j + 1),
                Var::Phi(k) => format!("φ{}", k + 1),
            }
        };
        let join = |vars: &[Var]|

 vars.iter().map(var_name).collect::<String>();
        let lhs = if self.den_vars.is_empty() {
            join(&self.num_vars)
        } else if self.num_vars.is_empty() {
            format!("1/({})", join(&self.den_vars))
        } else {
            format!("{}/({})", join(&self.num_vars), join(&self.den_vars))
        };
        let rel = match self.relation {
            Relation::Greater => ">",
            Relation::Less => "<",
        };
        format!("{lhs} {rel} {}", self.bound)
    }
}

/// Expands the strict chain `#ReLUs(C[1]) > ... > #ReLUs(C[D])` into one
/// monomial constraint per stage pair, reduced over the free variables.
pub fn derive_inequalities(problem: &EqualizationProblem) -> Result<Vec<Constraint>> {
    problem.validate()?;
    let d = problem.stage_count();
    let order = problem.order.stages();
    let mut out = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            out.push(pair_constraint(problem, order[i], order[j]));
        }
    }
    out.sort_by(|a, b| a.display(d).cmp(&b.display(d)));
    Ok(out)
}

/// Constraint for `w_a > w_b` (`a`, `b` 1-based stage ids).
fn pair_constraint(problem: &EqualizationProblem, a: usize, b: usize) -> Constraint {
    let (lo, hi) = (a.min(b), a.max(b));
    // lambda indices (0-based) spanning stages lo..hi
    let span: Vec<usize> = (lo - 1..hi - 1).collect();
    let four: u64 = 4u64.pow((hi - lo) as u32);
    match problem.mode {
        EqualizationMode::Width => {
            let (pa, pb) = (problem.phi[a - 1] as u64, problem.phi[b - 1] as u64);
            if a < b {
                // prod(span) < 4^(b-a) * phi_a / phi_b
                Constraint {
                    num_vars: span.into_iter().map(Var::Lambda).collect(),
                    den_vars: vec![],
                    relation: Relation::Less,
                    bound: Ratio::new(four * pa, pb),
                    stages: (a, b),
                }
            } else {
                // prod(span) > 4^(a-b) * phi_b / phi_a
                Constraint {
                    num_vars: span.into_iter().map(Var::Lambda).collect(),
                    den_vars: vec![],
                    relation: Relation::Greater,
                    bound: Ratio::new(four * pb, pa),
                    stages: (a, b),
                }
            }
        }
        EqualizationMode::Depth => {
            let lam_span: u64 = span.iter().map(|&j| problem.lambda[j] as u64).product();
            if a < b {
                // phi_a / phi_b > lam_span / 4^(b-a)
                Constraint {
                    num_vars: vec![Var::Phi(a - 1)],
                    den_vars: vec![Var::Phi(b - 1)],
                    relation: Relation::Greater,
                    bound: Ratio::new(lam_span, four),
                    stages: (a, b),
                }
            } else {
                // phi_a / phi_b > 4^(a-b) / lam_span
                Constraint {
                    num_vars: vec![Var::Phi(a - 1)],
                    den_vars: vec![Var::Phi(b - 1)],
                    relation: Relation::Greater,
                    bound: Ratio::new(four, lam_span),
                    stages: (a, b),
                }
            }
        }
        EqualizationMode::Mixed => {
            if a < b {
                // phi_a / (phi_b * prod(span)) > 1 / 4^(b-a)
                Constraint {
                    num_vars: vec![Var::Phi(a - 1)],
                    den_vars: std::iter::once(Var::Phi(b - 1))
                        .chain(span.into_iter().map(Var::Lambda))
                        .collect(),
                    relation: Relation::Greater,
                    bound: Ratio::new(1, four),
                    stages: (a, b),
                }
            } else {
                // phi_a * prod(span) / phi_b > 4^(a-b)
                Constraint {
                    num_vars: std::iter::once(Var::Phi(a - 1))
                        .chain(span.into_iter().map(Var::Lambda))
                        .collect(),
                    den_vars: vec![Var::Phi(b - 1)],
                    relation: Relation::Greater,
                    bound: Ratio::new(four, 1),
                    stages: (a, b),
                }
            }
        }
    }
}

// --- Exhaustive solve -------------------------------------------------------

/// Outcome of an exhaustive solve. An empty solution list means the chain
/// is infeasible within the given bounds; that is a result, not an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub solutions: Vec<EqualizationSolution>,
}

impl SolveResult {
    pub fn infeasible_within_bounds(&self) -> bool {
        self.solutions.is_empty()
    }
}

fn for_each_grid(dims: usize, lo: u32, hi: u32, mut visit: impl FnMut(&[u32])) {
    let mut cur = vec![lo; dims];
    loop {
        visit(&cur);
        let mut i = dims;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if cur[i] < hi {
                cur[i] += 1;
                cur[i + 1..].fill(lo);
                break;
            }
        }
    }
}

/// Enumerates the full bounded grid and keeps every tuple whose weights
/// satisfy the strict chain. Feasibility is not monotone in any variable
/// (some products are bounded above), so nothing short of exhaustion is
/// sound. Deterministic: solutions sort by (grouping key, leading
/// variable).
pub fn solve(problem: &EqualizationProblem) -> Result<SolveResult> {
    problem.validate()?;
    let d = problem.stage_count();
    let mut solutions = Vec::new();
    let (ll, lh) = problem.lambda_bounds;
    let (pl, ph) = problem.phi_bounds;

    match problem.mode {
        EqualizationMode::Width => {
            for_each_grid(d - 1, ll, lh, |lambda| {
                let w = scaled_weights(&problem.phi, lambda);
                if chain_holds(&w, &problem.order) {
                    solutions.push(EqualizationSolution {
                        phi: problem.phi.clone(),
                        lambda: lambda.to_vec(),
                    });
                }
            });
        }
        EqualizationMode::Depth => {
            for_each_grid(d, pl, ph, |phi| {
                let w = scaled_weights(phi, &problem.lambda);
                if chain_holds(&w, &problem.order) {
                    solutions.push(EqualizationSolution {
                        phi: phi.to_vec(),
                        lambda: problem.lambda.clone(),
                    });
                }
            });
        }
        EqualizationMode::Mixed => {
            for_each_grid(d - 1, ll, lh, |lambda| {
                for_each_grid(d, pl, ph, |phi| {
                    let w = scaled_weights(phi, lambda);
                    if chain_holds(&w, &problem.order) {
                        solutions.push(EqualizationSolution {
                            phi: phi.to_vec(),
                            lambda: lambda.to_vec(),
                        });
                    }
                });
            });
        }
    }

    solutions.sort_by_key(|s| sort_key(s, problem.mode));
    Ok(SolveResult { solutions })
}

/// Lexicographic key: the grouping suffix first, then the minimized leading
/// variable. Width tuples therefore sort by (β, γ, α).
fn sort_key(s: &EqualizationSolution, mode: EqualizationMode) -> (Vec<u32>, u32, Vec<u32>) {
    match mode {
        EqualizationMode::Width => (s.lambda[1..].to_vec(), s.lambda[0], s.phi.clone()),
        EqualizationMode::Depth => (s.phi[1..].to_vec(), s.phi[0], s.lambda.clone()),
        EqualizationMode::Mixed => {
            let mut key = s.lambda[1..].to_vec();
            key.extend_from_slice(&s.phi);
            (key, s.lambda[0], vec![])
        }
    }
}

/// A selected tuple with its paper-style name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedTuple {
    pub name: String,
    pub solution: EqualizationSolution,
}

/// Per (β, γ, ...) group, keeps the tuple with the smallest leading free
/// variable. Width-mode names follow "HRN-{α}x{β}x{γ}x"; depth mode uses
/// "HRN[φ1,φ2,...]".
pub fn select_minimal(result: &SolveResult, mode: EqualizationMode) -> Vec<SelectedTuple> {
    let mut out: Vec<SelectedTuple> = Vec::new();
    let mut last_group: Option<Vec<u32>> = None;
    // Solutions are sorted by (group, lead); the first of each group is
    // the minimum.
    for s in &result.solutions {
        let group = match mode {
            EqualizationMode::Width => s.lambda[1..].to_vec(),
            EqualizationMode::Depth => s.phi[1..].to_vec(),
            EqualizationMode::Mixed => {
                let mut g = s.lambda[1..].to_vec();
                g.extend_from_slice(&s.phi);
                g
            }
        };
        if last_group.as_ref() == Some(&group) {
            continue;
        }
        last_group = Some(group);
        let name = match mode {
            EqualizationMode::Width | EqualizationMode::Mixed => {
                format!("HRN-{}", s.lambda_tag())
            }
            EqualizationMode::Depth => {
                let phis: Vec<String> = s.phi.iter().map(u32::to_string).collect();
                format!("HRN[{}]", phis.join(","))
            }
        };
        out.push(SelectedTuple { name, solution: s.clone() });
    }
    out
}

/// The low-ReLU variant of an equalized width tuple: the first multiplier
/// drops to 2, the rest stay. Idempotent when it is already 2.
pub fn low_relu_lambda(lambda: &[u32]) -> Vec<u32> {
    let mut out = lambda.to_vec();
    if let Some(first) = out.first_mut() {
        *first = 2;
    }
    out
}

/// Realizes a width tuple as a concrete network spec.
pub fn realize(
    phi: &[u32],
    m: u32,
    lambda: &[u32],
    input: InputDims,
    num_classes: u32,
) -> Result<NetworkSpec> {
    assert_eq!(phi.len(), lambda.len() + 1);
    let mut channels = vec![m];
    for l in lambda {
        channels.push(channels.last().unwrap() * l);
    }
    let tag: String = lambda.iter().map(|l| format!("{l}x")).collect();
    NetworkSpec::from_stages(
        format!("HRN-{tag}(m={m})"),
        input,
        num_classes,
        m,
        phi,
        &channels,
    )
}

/// Builds the spec for the α=2 variant of an equalized tuple.
pub fn low_relu_variant(
    phi: &[u32],
    m: u32,
    lambda: &[u32],
    input: InputDims,
    num_classes: u32,
) -> Result<NetworkSpec> {
    realize(phi, m, &low_relu_lambda(lambda), input, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(ids: &[usize]) -> CriticalityOrder {
        CriticalityOrder::new(ids.to_vec()).unwrap()
    }

    fn r18_width() -> EqualizationProblem {
        EqualizationProblem::width(order(&[3, 2, 4, 1]), vec![2, 2, 2, 2]).unwrap()
    }

    fn displays(problem: &EqualizationProblem) -> Vec<String> {
        derive_inequalities(problem)
            .unwrap()
            .iter()
            .map(|c| c.display(problem.stage_count()))
            .collect()
    }

    #[test]
    fn resnet18_constraint_set() {
        let got = displays(&r18_width());
        let want = ["α > 4", "αβ > 16", "αβγ > 64", "β > 4", "βγ < 16", "γ < 4"];
        assert_eq!(got, want);
    }

    #[test]
    fn altered_order_constraint_set() {
        let p = EqualizationProblem::width(order(&[3, 4, 2, 1]), vec![2, 2, 2, 2]).unwrap();
        let got = displays(&p);
        let want = ["α > 4", "αβ > 16", "αβγ > 64", "β > 4", "βγ > 16", "γ < 4"];
        assert_eq!(got, want);
    }

    #[test]
    fn two_stage_constraint() {
        let p = EqualizationProblem::width(order(&[2, 1]), vec![2, 2]).unwrap();
        assert_eq!(displays(&p), ["λ1 > 4"]);
    }

    #[test]
    fn resnet18_solution_groups() {
        let res = solve(&r18_width()).unwrap();
        // Minimal alpha per (beta, gamma) group.
        let minimal = select_minimal(&res, EqualizationMode::Width);
        let tuples: Vec<(u32, u32, u32)> = minimal
            .iter()
            .map(|t| (t.solution.lambda[1], t.solution.lambda[2], t.solution.lambda[0]))
            .collect();
        assert_eq!(tuples, vec![(5, 2, 7), (5, 3, 5), (6, 2, 6), (7, 2, 5)]);
        let names: Vec<&str> = minimal.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, vec!["HRN-7x5x2x", "HRN-5x5x3x", "HRN-6x6x2x", "HRN-5x7x2x"]);
    }

    #[test]
    fn altered_order_minimal_tuples() {
        let p = EqualizationProblem::width(order(&[3, 4, 2, 1]), vec![2, 2, 2, 2]).unwrap();
        let minimal = select_minimal(&solve(&p).unwrap(), EqualizationMode::Width);
        let lams: Vec<Vec<u32>> = minimal.iter().map(|t| t.solution.lambda.clone()).collect();
        assert!(lams.contains(&vec![5, 9, 2]), "missing (5,9,2) in {lams:?}");
        assert!(lams.contains(&vec![5, 6, 3]), "missing (5,6,3) in {lams:?}");
    }

    #[test]
    fn resnet34_minimal_tuples() {
        let p = EqualizationProblem::width(order(&[3, 2, 4, 1]), vec![3, 4, 6, 3]).unwrap();
        let minimal = select_minimal(&solve(&p).unwrap(), EqualizationMode::Width);
        let lams: Vec<Vec<u32>> = minimal.iter().map(|t| t.solution.lambda.clone()).collect();
        assert!(lams.contains(&vec![4, 6, 3]), "missing (4,6,3) in {lams:?}");
        assert!(lams.contains(&vec![4, 9, 2]), "missing (4,9,2) in {lams:?}");
    }

    #[test]
    fn tight_bounds_are_infeasible() {
        let p = r18_width().with_lambda_bounds(2, 3);
        let res = solve(&p).unwrap();
        assert!(res.infeasible_within_bounds());
    }

    #[test]
    fn feasibility_is_not_monotone() {
        // (7,7,2) satisfies βγ < 16; (7,7,3) does not.
        let res = solve(&r18_width()).unwrap();
        let has = |lam: &[u32]| res.solutions.iter().any(|s| s.lambda == lam);
        assert!(has(&[7, 7, 2]));
        assert!(!has(&[7, 7, 3]));
    }

    #[test]
    fn low_relu_tuple_replaces_alpha() {
        assert_eq!(low_relu_lambda(&[5, 5, 3]), vec![2, 5, 3]);
        assert_eq!(low_relu_lambda(&[2, 5, 3]), vec![2, 5, 3]);
    }

    #[test]
    fn low_relu_variant_channels_and_fraction() {
        let base = realize(&[2, 2, 2, 2], 16, &[5, 5, 3], InputDims::cifar(), 100).unwrap();
        let low = low_relu_variant(&[2, 2, 2, 2], 16, &[5, 5, 3], InputDims::cifar(), 100).unwrap();
        let chans: Vec<u32> = low.stages.iter().map(|s| s.channels).collect();
        assert_eq!(chans, vec![16, 32, 160, 480]);
        let f_base = crate::accounting::relu_distribution(&base)[0];
        let f_low = crate::accounting::relu_distribution(&low)[0];
        assert!(f_low > f_base);
    }

    #[test]
    fn selected_hrns_satisfy_realized_chain() {
        let res = solve(&r18_width()).unwrap();
        for t in select_minimal(&res, EqualizationMode::Width) {
            let spec =
                realize(&[2, 2, 2, 2], 16, &t.solution.lambda, InputDims::cifar(), 100).unwrap();
            let body = crate::accounting::body_stage_relus(&spec);
            assert!(
                body[2] > body[1] && body[1] > body[3] && body[3] > body[0],
                "{}: body counts {body:?} not in order",
                t.name
            );
        }
    }
}
