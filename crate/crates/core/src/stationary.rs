//! Stationary distributions of finite chains.

use crate::error::{Error, Result};
use crate::kernel::{Grid, TransitionMatrix};
use crate::measure::DiscreteDistribution;
use crate::numerics::{solve_linear, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    Power,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarySolution {
    pub distribution: DiscreteDistribution,
    /// `π` indexed like the grid (zero masses kept).
    pub pi: Vec<f64>,
    pub method: Method,
    /// `||πQ − π||∞`
    pub residual: f64,
    pub iterations: usize,
}

/// Entries of `π` this negative are treated as rounding and clamped.
pub const CLAMP_TOL: f64 = 1e-12;
/// Edge threshold of the support digraph.
pub const SUPPORT_TOL: f64 = 1e-15;
/// Largest chain solved directly by [`stationary`].
pub const DIRECT_MAX_STATES: usize = 1025;

fn residual(q: &TransitionMatrix, pi: &[f64]) -> f64 {
    q.matrix().vec_mul(pi).iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn check_grid(q: &TransitionMatrix, grid: &Grid) -> Result<()> {
    if q.len() != grid.len() {
        return Err(Error::InvalidArgument(format!("{} states but a {}-state matrix", grid.len(), q.len())));
    }
    Ok(())
}

fn package(pi: Vec<f64>, grid: &Grid, q: &TransitionMatrix, method: Method, iterations: usize) -> Result<StationarySolution> {
    let distribution = DiscreteDistribution::from_weights(grid.states().iter().copied().zip(pi.iter().copied()).collect())?;
    let residual = residual(q, &pi);
    Ok(StationarySolution { distribution, pi, method, residual, iterations })
}

/// Solves `Mπ = e₁` where `M` is `I − Qᵀ` with its first row set to ones.
pub fn stationary_direct(q: &TransitionMatrix, grid: &Grid) -> Result<StationarySolution> {
    check_grid(q, grid)?;
    let n = q.len();
    let mut m = Matrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            m[(a, b)] = if a == 0 { 1.0 } else { f64::from(u8::from(a == b)) - q.get(b, a) };
        }
    }
    let mut rhs = vec![0.0; n];
    rhs[0] = 1.0;
    let mut pi = solve_linear(&m, &rhs).map_err(|e| match e {
        Error::Singular { .. } => {
            Error::Structural("no unique absorbing communicating class (singular balance system)".into())
        }
        other => other,
    })?;
    for (i, v) in pi.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -CLAMP_TOL {
                return Err(Error::Structural(format!("stationary mass {v} at state {i} is negative")));
            }
            *v = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    package(pi, grid, q, Method::Direct, 0)
}

/// Iterates `π ← πQ` from the uniform vector until `||πQ − π||∞ <= tol`.
pub fn stationary_power(q: &TransitionMatrix, grid: &Grid, tol: f64, max_iters: usize) -> Result<StationarySolution> {
    check_grid(q, grid)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    // a periodic recurrent class never settles from a generic start
    let classes = check_absorbing_class(q);
    if classes.terminal.iter().any(|&c| classes.periods[c] > 1) {
        return Err(Error::NonConvergence { iterations: 0, residual: f64::NAN });
    }
    let n = q.len();
    let mut pi = vec![1.0 / n as f64; n];
    for it in 0..=max_iters {
        let next = q.matrix().vec_mul(&pi);
        let res = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if res <= tol {
            return package(pi, grid, q, Method::Power, it);
        }
        if it == max_iters {
            return Err(Error::NonConvergence { iterations: it, residual: res });
        }
        pi = next;
    }
    unreachable!()
}

/// Direct solve for small chains, power iteration beyond
/// [`DIRECT_MAX_STATES`] states.
pub fn stationary(q: &TransitionMatrix, grid: &Grid) -> Result<StationarySolution> {
    if q.len() <= DIRECT_MAX_STATES {
        stationary_direct(q, grid)
    } else {
        stationary_power(q, grid, 1e-14, 1_000_000)
    }
}

/// Strongly connected components of the support digraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassStructure {
    /// Component id of every state.
    pub labels: Vec<usize>,
    /// Ids of components with no edge leaving them.
    pub terminal: Vec<usize>,
    /// Period of each component (1 for transient singletons without a loop).
    pub periods: Vec<usize>,
}

impl ClassStructure {
    /// True iff exactly one closed class exists.
    pub fn has_absorbing_class(&self) -> bool {
        self.terminal.len() == 1
    }

    pub fn num_classes(&self) -> usize {
        self.periods.len()
    }
}

/// Tarjan's algorithm (iterative) on the edges `q_ij > 1e-15`.
pub fn check_absorbing_class(q: &TransitionMatrix) -> ClassStructure {
    let n = q.len();
    let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| q.get(i, j) > SUPPORT_TOL).collect()).collect();

    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut labels = vec![UNSEEN; n];
    let mut count = 0;
    let mut next_index = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        labels[w] = count;
                        if w == v {
                            break;
                        }
                    }
                    count += 1;
                }
            }
        }
    }

    let mut closed = vec![true; count];
    for v in 0..n {
        if adj[v].iter().any(|&w| labels[w] != labels[v]) {
            closed[labels[v]] = false;
        }
    }
    let terminal: Vec<usize> = (0..count).filter(|&c| closed[c]).collect();

    // period = gcd of level[u] + 1 − level[v] over edges inside the class
    let mut periods = vec![0usize; count];
    let mut level = vec![UNSEEN; n];
    for s in 0..n {
        let c = labels[s];
        if periods[c] != 0 || level[s] != UNSEEN {
            continue;
        }
        level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        let mut g = 0usize;
        while let Some(u) = queue.pop_front() {
            for &w in adj[u].iter().filter(|&&w| labels[w] == c) {
                if level[w] == UNSEEN {
                    level[w] = level[u] + 1;
                    queue.push_back(w);
                } else {
                    g = gcd(g, (level[u] + 1).abs_diff(level[w]));
                }
            }
        }
        periods[c] = g.max(1);
    }
    ClassStructure { labels, terminal, periods }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
