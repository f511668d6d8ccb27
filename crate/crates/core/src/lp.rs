//! Dense bounded-variable primal simplex.
//!
//! Solves `max c.x` subject to `A x = b`, `lower <= x <= upper` with finite
//! bounds on every structural variable. Phase one drives artificial variables
//! to zero; pricing is Dantzig's rule, switching to Bland's rule while the
//! method is stalled on degenerate pivots. The final basic solution is
//! recomputed from the original data with a fresh LU factorization.

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BoundedLp {
    pub objective: Vec<f64>,
    /// Row-major constraint matrix, `rows x objective.len()`.
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum State {
    Basic,
    Lower,
    Upper,
}

const PRICE_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-9;
const STALL_LIMIT: usize = 50;

struct Tableau {
    m: usize,
    n: usize,
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    iterations: usize,
}

impl Tableau {
    fn value_of(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Lower => self.lower[j],
            State::Upper => self.upper[j],
            State::Basic => {
                let r = self.basis.iter().position(|&b| b == j).unwrap();
                self.beta[r]
            }
        }
    }

    fn reprice(&mut self) {
        for j in 0..self.n {
            let mut d = self.cost[j];
            for i in 0..self.m {
                d -= self.cost[self.basis[i]] * self.t[i * self.n + j];
            }
            self.reduced[j] = d;
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n {
            if self.upper[j] <= self.lower[j] {
                continue;
            }
            let d = self.reduced[j];
            let gain = match self.state[j] {
                State::Lower if d > PRICE_TOL => d,
                State::Upper if d < -PRICE_TOL => -d,
                _ => continue,
            };
            if bland {
                return Some(j);
            }
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((j, gain));
            }
        }
        best.map(|(j, _)| j)
    }

    fn run(&mut self, max_iter: usize) -> Result<()> {
        let mut stalled = 0usize;
        loop {
            if self.iterations >= max_iter {
                return Err(Error::Numeric(format!(
                    "simplex did not converge in {max_iter} iterations"
                )));
            }
            let bland = stalled > STALL_LIMIT;
            let Some(q) = self.choose_entering(bland) else {
                return Ok(());
            };
            self.iterations += 1;
            let sigma = if self.state[q] == State::Lower { 1.0 } else { -1.0 };
            let mut theta = self.upper[q] - self.lower[q];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_mag = 0.0;
            for i in 0..self.m {
                let a = sigma * self.t[i * self.n + q];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let bvar = self.basis[i];
                let (lim, to_upper) = if a > 0.0 {
                    ((self.beta[i] - self.lower[bvar]) / a, false)
                } else if self.upper[bvar].is_finite() {
                    ((self.upper[bvar] - self.beta[i]) / -a, true)
                } else {
                    continue;
                };
                let lim = lim.max(0.0);
                let better = match leave {
                    None => lim < theta,
                    Some((r, _)) => {
                        if lim < theta - 1e-12 {
                            true
                        } else if lim <= theta + 1e-12 {
                            if bland {
                                bvar < self.basis[r]
                            } else {
                                a.abs() > leave_mag
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = lim.min(theta);
                    leave = Some((i, to_upper));
                    leave_mag = a.abs();
                }
            }
            if !theta.is_finite() {
                return Err(Error::Numeric("linear program is unbounded".into()));
            }
            if theta <= 1e-12 {
                stalled += 1;
            } else {
                stalled = 0;
            }
            for i in 0..self.m {
                self.beta[i] -= sigma * theta * self.t[i * self.n + q];
            }
            match leave {
                None => {
                    self.state[q] = if self.state[q] == State::Lower {
                        State::Upper
                    } else {
                        State::Lower
                    };
                }
                Some((r, to_upper)) => {
                    let entering_value = if self.state[q] == State::Lower {
                        self.lower[q] + theta
                    } else {
                        self.upper[q] - theta
                    };
                    let out = self.basis[r];
                    self.state[out] = if to_upper { State::Upper } else { State::Lower };
                    self.state[q] = State::Basic;
                    self.basis[r] = q;
                    self.beta[r] = entering_value;
                    self.pivot(r, q);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.n;
        let p = self.t[r * n + q];
        for j in 0..n {
            self.t[r * n + j] /= p;
        }
        let (head, tail) = self.t.split_at_mut(r * n);
        let (row_r, rest) = tail.split_at_mut(n);
        let eliminate = |row: &mut [f64]| {
            let f = row[q];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(row_r.iter()) {
                    *x -= f * y;
                }
                row[q] = 0.0;
            }
        };
        head.chunks_mut(n).for_each(eliminate);
        rest.chunks_mut(n).for_each(eliminate);
        let f = self.reduced[q];
        for (d, y) in self.reduced.iter_mut().zip(row_r.iter()) {
            *d -= f * y;
        }
        self.reduced[q] = 0.0;
    }
}

/// Maximize the linear program.
pub fn maximize(lp: &BoundedLp) -> Result<LpSolution> {
    let n0 = lp.objective.len();
    let m = lp.matrix.len();
    if lp.rhs.len() != m || lp.lower.len() != n0 || lp.upper.len() != n0 {
        return Err(Error::InvalidInput("inconsistent LP dimensions".into()));
    }
    if lp.matrix.iter().any(|r| r.len() != n0) {
        return Err(Error::InvalidInput("ragged LP matrix".into()));
    }
    for j in 0..n0 {
        if !(lp.lower[j].is_finite() && lp.upper[j].is_finite() && lp.lower[j] <= lp.upper[j]) {
            return Err(Error::InvalidInput(format!("bad bounds on variable {j}")));
        }
    }
    let n = n0 + m;
    let mut residual = lp.rhs.clone();
    for (i, row) in lp.matrix.iter().enumerate() {
        for j in 0..n0 {
            residual[i] -= row[j] * lp.lower[j];
        }
    }
    let signs: Vec<f64> = residual.iter().map(|r| if *r >= 0.0 { 1.0 } else { -1.0 }).collect();
    let mut t = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n0 {
            t[i * n + j] = signs[i] * lp.matrix[i][j];
        }
        t[i * n + n0 + i] = 1.0;
    }
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    lower.extend(std::iter::repeat_n(0.0, m));
    upper.extend(std::iter::repeat_n(f64::INFINITY, m));
    let mut state = vec![State::Lower; n];
    for s in state.iter_mut().skip(n0) {
        *s = State::Basic;
    }
    let mut cost = vec![0.0; n];
    for c in cost.iter_mut().skip(n0) {
        *c = -1.0;
    }
    let mut tab = Tableau {
        m,
        n,
        t,
        beta: residual.iter().map(|r| r.abs()).collect(),
        basis: (n0..n).collect(),
        state,
        lower,
        upper,
        cost,
        reduced: vec![0.0; n],
        iterations: 0,
    };
    let max_iter = 50 * (n + m) + 1000;
    tab.reprice();
    tab.run(max_iter)?;
    let infeasibility: f64 = (0..m)
        .filter(|&i| tab.basis[i] >= n0)
        .map(|i| tab.beta[i])
        .sum();
    let scale = 1.0 + lp.rhs.iter().map(|x| x.abs()).sum::<f64>();
    if infeasibility > 1e-9 * scale {
        return Err(Error::Numeric(format!(
            "linear program is infeasible (phase-one residual {infeasibility:.3e})"
        )));
    }
    for j in n0..n {
        tab.upper[j] = 0.0;
        if tab.state[j] != State::Basic {
            tab.state[j] = State::Lower;
        }
    }
    tab.cost = lp.objective.clone();
    tab.cost.extend(std::iter::repeat_n(0.0, m));
    tab.reprice();
    tab.run(max_iter)?;

    let x = polish(lp, &tab, &signs)?;
    let value = lp.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpSolution {
        x,
        value,
        iterations: tab.iterations,
    })
}

/// Recompute the basic variables from the original constraint data.
fn polish(lp: &BoundedLp, tab: &Tableau, signs: &[f64]) -> Result<Vec<f64>> {
    let n0 = lp.objective.len();
    let m = tab.m;
    let mut x: Vec<f64> = (0..n0).map(|j| tab.value_of(j)).collect();
    if m == 0 {
        return Ok(x);
    }
    let column = |j: usize, i: usize| -> f64 {
        if j < n0 {
            lp.matrix[i][j]
        } else if j - n0 == i {
            signs[i]
        } else {
            0.0
        }
    };
    let b = Mat::<f64>::from_fn(m, m, |i, r| column(tab.basis[r], i));
    let mut rhs = Mat::<f64>::zeros(m, 1);
    for i in 0..m {
        let mut s = lp.rhs[i];
        for j in 0..n0 {
            if tab.state[j] != State::Basic {
                s -= lp.matrix[i][j] * x[j];
            }
        }
        rhs[(i, 0)] = s;
    }
    let sol = b.partial_piv_lu().solve(&rhs);
    for r in 0..m {
        let j = tab.basis[r];
        if j < n0 {
            let v = sol[(r, 0)];
            if !v.is_finite() {
                return Err(Error::Numeric("singular final basis".into()));
            }
            x[j] = v.clamp(lp.lower[j], lp.upper[j]);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_box_lp() {
        // max x + y, x + y + s = 1.5, 0 <= x, y <= 1, 0 <= s <= 10
        let lp = BoundedLp {
            objective: vec![1.0, 1.0, 0.0],
            matrix: vec![vec![1.0, 1.0, 1.0]],
            rhs: vec![1.5],
            lower: vec![0.0, 0.0, 0.0],
            upper: vec![1.0, 1.0, 10.0],
        };
        let s = maximize(&lp).unwrap();
        assert!((s.value - 1.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_is_reported() {
        let lp = BoundedLp {
            objective: vec![1.0],
            matrix: vec![vec![1.0]],
            rhs: vec![3.0],
            lower: vec![0.0],
            upper: vec![1.0],
        };
        assert!(matches!(maximize(&lp), Err(Error::Numeric(_))));
    }

    #[test]
    fn degenerate_transport_like_problem() {
        // max 2a + 3b + c with a + b = 1, b + c = 1, a, b, c in [0, 1]
        let lp = BoundedLp {
            objective: vec![2.0, 3.0, 1.0],
            matrix: vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]],
            rhs: vec![1.0, 1.0],
            lower: vec![0.0; 3],
            upper: vec![1.0; 3],
        };
        let s = maximize(&lp).unwrap();
        assert!((s.value - 3.0).abs() < 1e-12, "{}", s.value);
    }
}
