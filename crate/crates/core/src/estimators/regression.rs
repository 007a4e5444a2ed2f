//! Least-squares and logistic fits on small dense designs.
//!
//! Cross products are accumulated with [`ExactSum`], so a fit depends only
//! on the multiset of rows and not on their order.

use ndarray::ArrayView2;

use crate::numeric::{cholesky_solve, ExactSum};

/// Relative pivot tolerance for declaring a design singular.
const SINGULAR_TOL: f64 = 1e-10;

pub const IRLS_TOL: f64 = 1e-8;
pub const IRLS_MAX_ITER: usize = 100;
/// Any coefficient this large during IRLS is taken as separation.
pub const SEPARATION_BOUND: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitFailure {
    Singular,
    ConstantOutcome,
    Separation,
}

impl FitFailure {
    pub fn reason(self) -> &'static str {
        match self {
            FitFailure::Singular => "singular design",
            FitFailure::ConstantOutcome => "constant outcome",
            FitFailure::Separation => "separation",
        }
    }
}

/// Design matrix with an optional trailing intercept column.
#[derive(Clone, Copy)]
pub struct Design<'a> {
    x: ArrayView2<'a, f64>,
    intercept: bool,
}

impl<'a> Design<'a> {
    pub fn new(x: ArrayView2<'a, f64>, intercept: bool) -> Self {
        Self { x, intercept }
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn cols(&self) -> usize {
        self.x.ncols() + usize::from(self.intercept)
    }

    #[inline]
    fn fill_row(&self, i: usize, row: &mut [f64]) {
        let d = self.x.ncols();
        for j in 0..d {
            row[j] = self.x[[i, j]];
        }
        if self.intercept {
            row[d] = 1.0;
        }
    }

    pub fn linear_predictor(&self, i: usize, beta: &[f64]) -> f64 {
        let d = self.x.ncols();
        let mut s = if self.intercept { beta[d] } else { 0.0 };
        for j in 0..d {
            s += self.x[[i, j]] * beta[j];
        }
        s
    }
}

/// Accumulates `Σ w_i z_i z_iᵀ` (upper triangle) and `Σ r_i z_i`.
struct NormalEquations {
    p: usize,
    gram: Vec<ExactSum>,
    rhs: Vec<ExactSum>,
}

impl NormalEquations {
    fn new(p: usize) -> Self {
        Self {
            p,
            gram: vec![ExactSum::new(); p * (p + 1) / 2],
            rhs: vec![ExactSum::new(); p],
        }
    }

    #[inline]
    fn add(&mut self, z: &[f64], weight: f64, response: f64) {
        let mut k = 0;
        for a in 0..self.p {
            let wa = weight * z[a];
            for b in a..self.p {
                self.gram[k].add(wa * z[b]);
                k += 1;
            }
            self.rhs[a].add(response * z[a]);
        }
    }

    #[inline]
    fn add_rhs_only(&mut self, z: &[f64], response: f64) {
        for a in 0..self.p {
            self.rhs[a].add(response * z[a]);
        }
    }

    fn gram_matrix(&self) -> Vec<f64> {
        let p = self.p;
        let mut m = vec![0.0; p * p];
        let mut k = 0;
        for a in 0..p {
            for b in a..p {
                let v = self.gram[k].value();
                m[a * p + b] = v;
                m[b * p + a] = v;
                k += 1;
            }
        }
        m
    }

    fn rhs_vector(&self) -> Vec<f64> {
        self.rhs.iter().map(ExactSum::value).collect()
    }
}

/// Ordinary least squares via the normal equations, with one step of
/// iterative refinement.
pub fn ols_fit(design: Design<'_>, y: &[f64]) -> Result<Vec<f64>, FitFailure> {
    let p = design.cols();
    if p == 0 {
        return Err(FitFailure::Singular);
    }
    let mut row = vec![0.0; p];
    let mut ne = NormalEquations::new(p);
    for (i, &yi) in y.iter().enumerate() {
        design.fill_row(i, &mut row);
        ne.add(&row, 1.0, yi);
    }
    let gram = ne.gram_matrix();
    let mut beta =
        cholesky_solve(&gram, &ne.rhs_vector(), p, SINGULAR_TOL).ok_or(FitFailure::Singular)?;

    let mut refine = NormalEquations::new(p);
    for (i, &yi) in y.iter().enumerate() {
        design.fill_row(i, &mut row);
        refine.add_rhs_only(&row, yi - design.linear_predictor(i, &beta));
    }
    if let Some(delta) = cholesky_solve(&gram, &refine.rhs_vector(), p, SINGULAR_TOL) {
        for (b, d) in beta.iter_mut().zip(delta) {
            *b += d;
        }
    }
    Ok(beta)
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Logistic regression maximum likelihood by iteratively reweighted least
/// squares (Newton's method), starting from zero.
///
/// Outcomes must already be validated as 0/1.
pub fn logistic_fit(design: Design<'_>, y: &[f64]) -> Result<Vec<f64>, FitFailure> {
    let p = design.cols();
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == y.len() {
        return Err(FitFailure::ConstantOutcome);
    }
    let mut beta = vec![0.0; p];
    let mut row = vec![0.0; p];
    for _ in 0..IRLS_MAX_ITER {
        let mut ne = NormalEquations::new(p);
        for (i, &yi) in y.iter().enumerate() {
            design.fill_row(i, &mut row);
            let mu = sigmoid(design.linear_predictor(i, &beta));
            ne.add(&row, mu * (1.0 - mu), yi - mu);
        }
        let step = cholesky_solve(&ne.gram_matrix(), &ne.rhs_vector(), p, SINGULAR_TOL)
            .ok_or(FitFailure::Singular)?;
        let mut max_change = 0.0f64;
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
            max_change = max_change.max(s.abs());
        }
        if beta.iter().any(|b| !b.is_finite() || b.abs() > SEPARATION_BOUND) {
            return Err(FitFailure::Separation);
        }
        if max_change < IRLS_TOL {
            break;
        }
    }
    Ok(beta)
}

/// Log-likelihood of a logistic model; used by tests as a brute-force check.
pub fn logistic_log_likelihood(design: Design<'_>, y: &[f64], beta: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, &yi)| {
            let t = design.linear_predictor(i, beta);
            // log σ(t) = -log(1 + e^{-t}); log(1 - σ(t)) = -log(1 + e^{t})
            if yi == 1.0 {
                -softplus(-t)
            } else {
                -softplus(t)
            }
        })
        .sum()
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}
