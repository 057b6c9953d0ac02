//! Linear feature maps `φ(s, a)` over one agent's (state, action) pairs.
//!
//! Features are stored pre-normalized: every raw row is divided by the largest raw
//! row norm, so `‖φ(s,a)‖₂ ≤ 1` with equality on at least one pair. Every basis is
//! checked to have linearly independent columns on the (state, action) grid.

use crate::game::StochasticGame;
use crate::oracle::QTable;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

/// Relative tolerance for rank decisions.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("state {0:?} is not of the form \"x,y\" with integer coordinates")]
    NoCoordinates(String),
    #[error("basis size {dim} is not linearly independent on agent {agent}'s pairs (rank {rank})")]
    RankDeficient { agent: usize, dim: usize, rank: usize },
    #[error("basis size {dim} exceeds the {available} available monomials of order {order}")]
    TooManyMonomials { dim: usize, available: usize, order: u32 },
    #[error("feature rows: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("feature dimension must be positive")]
    Empty,
}

/// How a basis was built; recorded in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BasisKind {
    Polynomial { order: u32, exponents: Vec<[u32; 3]> },
    Indicator,
    Custom,
}

/// Normalized features of agent `agent` with a cached thin SVD for projections.
#[derive(Debug, Clone)]
pub struct FeatureBasis {
    agent: usize,
    kind: BasisKind,
    scale: f64,
    offsets: Vec<usize>,
    matrix: DMatrix<f64>,
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v: DMatrix<f64>,
}

impl FeatureBasis {
    /// Normalize raw rows (in the agent's (state, position) order) and check rank.
    pub fn from_rows(game: &StochasticGame, agent: usize, rows: Vec<Vec<f64>>) -> Result<Self, FeatureError> {
        Self::build(game, agent, rows, BasisKind::Custom)
    }

    /// One-hot features, `d = Σ_s |A^i(s)|`.
    pub fn indicator(game: &StochasticGame, agent: usize) -> Self {
        let m = game.num_pairs(agent);
        let rows = (0..m).map(|k| (0..m).map(|j| if j == k { 1.0 } else { 0.0 }).collect()).collect();
        Self::build(game, agent, rows, BasisKind::Indicator).expect("identity has full rank")
    }

    fn build(game: &StochasticGame, agent: usize, rows: Vec<Vec<f64>>, kind: BasisKind) -> Result<Self, FeatureError> {
        let m = game.num_pairs(agent);
        if rows.len() != m {
            return Err(FeatureError::Shape { expected: m, got: rows.len() });
        }
        let d = rows.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(FeatureError::Empty);
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(FeatureError::Shape { expected: d, got: rows.iter().map(Vec::len).find(|&l| l != d).unwrap() });
        }
        let scale = rows.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
        if !(scale > 0.0) {
            return Err(FeatureError::RankDeficient { agent, dim: d, rank: 0 });
        }
        let matrix = DMatrix::from_fn(m, d, |k, j| rows[k][j] / scale);
        let svd = matrix.clone().svd(true, true);
        let sigma = svd.singular_values.clone();
        let smax = sigma.max();
        let rank = sigma.iter().filter(|&&x| x > RANK_TOL * smax * (m.max(d) as f64)).count();
        if rank < d {
            return Err(FeatureError::RankDeficient { agent, dim: d, rank });
        }
        let mut offsets = vec![0];
        for s in 0..game.num_states() {
            offsets.push(offsets[s] + game.num_actions(agent, s));
        }
        let u = svd.u.expect("requested");
        let v = svd.v_t.expect("requested").transpose();
        Ok(Self { agent, kind, scale, offsets, matrix, u, sigma, v })
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    /// Raw features were divided by this constant.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The `|pairs| × d` feature matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn num_pairs(&self) -> usize {
        self.matrix.nrows()
    }

    /// Flat pair index of (s, a).
    pub fn pair(&self, s: usize, a: usize) -> usize {
        self.offsets[s] + a
    }

    pub fn num_states(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_actions(&self, s: usize) -> usize {
        self.offsets[s + 1] - self.offsets[s]
    }

    /// `φ(s,a)ᵀθ`.
    pub fn value(&self, s: usize, a: usize, theta: &[f64]) -> f64 {
        let k = self.pair(s, a);
        let mut acc = 0.0;
        for (j, t) in theta.iter().enumerate() {
            acc += self.matrix[(k, j)] * t;
        }
        acc
    }

    /// `φ(s,a)` as a vector.
    pub fn row(&self, s: usize, a: usize) -> Vec<f64> {
        let k = self.pair(s, a);
        (0..self.dim()).map(|j| self.matrix[(k, j)]).collect()
    }

    /// `Φθ` as a table.
    pub fn q_values(&self, game: &StochasticGame, theta: &[f64]) -> QTable {
        let t = DVector::from_column_slice(theta);
        QTable::from_values(game, self.agent, (&self.matrix * t).iter().copied().collect()).expect("shape")
    }

    /// Smallest singular value of the normalized feature matrix.
    pub fn sigma_min(&self) -> f64 {
        self.sigma.min()
    }

    /// `argmin_{‖θ‖ ≤ R} ‖Φθ − q‖₂`.
    ///
    /// The unconstrained least-squares solution is returned when it lies in the ball.
    /// Otherwise the minimizer is `(ΦᵀΦ + νI)⁻¹Φᵀq` with the multiplier `ν > 0` fixed by
    /// `‖θ‖ = R`, found by bisection on the secular equation in the SVD basis.
    pub fn project(&self, q: &[f64], radius: f64) -> Vec<f64> {
        let c = self.u.transpose() * DVector::from_column_slice(q);
        let coef = |nu: f64| -> DVector<f64> {
            DVector::from_iterator(c.len(), (0..c.len()).map(|k| self.sigma[k] * c[k] / (self.sigma[k] * self.sigma[k] + nu)))
        };
        let ls = coef(0.0);
        if ls.norm() <= radius {
            return (&self.v * ls).iter().copied().collect();
        }
        if radius <= 0.0 {
            return vec![0.0; self.dim()];
        }
        let top = DVector::from_iterator(c.len(), (0..c.len()).map(|k| self.sigma[k] * c[k])).norm();
        let (mut lo, mut hi) = (0.0f64, top / radius);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if coef(mid).norm() > radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut y = coef(hi);
        let norm = y.norm();
        if norm > radius {
            y *= radius / norm;
        }
        (&self.v * y).iter().copied().collect()
    }
}

/// Parse `"x,y"` into integer coordinates.
fn coordinates(name: &str) -> Option<(i64, i64)> {
    let (a, b) = name.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn monomial(x: f64, y: f64, a: f64, c: [u32; 3]) -> f64 {
    x.powi(c[0] as i32) * y.powi(c[1] as i32) * a.powi(c[2] as i32)
}

/// Monomial features `x^{c1} y^{c2} a^{c3}` with `c ∈ {0..order}³`.
///
/// Triples are scanned in lexicographic `(c1, c2, c3)` order and a triple is kept only
/// if its column is linearly independent of the columns already kept on the agent's
/// (state, action) grid; the first `d` kept triples form the basis. The action is
/// encoded as its 1-based index in the agent's declared action order.
pub fn polynomial_basis(game: &StochasticGame, agent: usize, order: u32, d: usize) -> Result<FeatureBasis, FeatureError> {
    let available = ((order + 1) as usize).pow(3);
    if d > available {
        return Err(FeatureError::TooManyMonomials { dim: d, available, order });
    }
    if d == 0 {
        return Err(FeatureError::Empty);
    }
    let mut points = Vec::new();
    for s in 0..game.num_states() {
        let (x, y) = coordinates(game.state_name(s)).ok_or_else(|| FeatureError::NoCoordinates(game.state_name(s).into()))?;
        for &a in game.actions(agent, s) {
            points.push((x as f64, y as f64, (a + 1) as f64));
        }
    }
    let column = |c: [u32; 3]| -> DVector<f64> {
        DVector::from_iterator(
            points.len(),
            points.iter().map(|&(x, y, a)| monomial(x, y, a, c)),
        )
    };
    // Gram–Schmidt on the candidate columns decides independence.
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    let mut chosen: Vec<[u32; 3]> = Vec::new();
    'scan: for c1 in 0..=order {
        for c2 in 0..=order {
            for c3 in 0..=order {
                if chosen.len() == d {
                    break 'scan;
                }
                let c = [c1, c2, c3];
                let raw = column(c);
                let mut r = raw.clone();
                for _ in 0..2 {
                    for q in &ortho {
                        let proj = q.dot(&r);
                        r -= q * proj;
                    }
                }
                if r.norm() > RANK_TOL * raw.norm() * points.len() as f64 {
                    ortho.push(r.normalize());
                    chosen.push(c);
                }
            }
        }
    }
    if chosen.len() < d {
        return Err(FeatureError::RankDeficient { agent, dim: d, rank: chosen.len() });
    }
    let rows = points
        .iter()
        .map(|&(x, y, a)| chosen.iter().map(|&c| monomial(x, y, a, c)).collect())
        .collect();
    FeatureBasis::build(game, agent, rows, BasisKind::Polynomial { order, exponents: chosen })
}
