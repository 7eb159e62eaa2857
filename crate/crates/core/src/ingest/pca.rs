use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const FORMAT_TAG: &str = "wealthmap-pca v1";

/// Principal components of a column-centered (optionally standardized) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub column_means: Vec<f64>,
    /// Divisors applied after centering; all ones when fitted without scaling.
    pub column_scales: Vec<f64>,
    pub scaled: bool,
    /// `k` orthonormal loading vectors of length `d`.
    pub components: Vec<Vec<f64>>,
    /// Sample-covariance eigenvalues of the retained components.
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

/// Fits the leading `k` principal components by eigendecomposition of the
/// sample covariance matrix.
///
/// Loadings are canonicalized for reproducibility: inside a repeated
/// eigenvalue the first vector is rotated onto the projection of the
/// all-ones direction, and every vector's largest-magnitude entry is made
/// positive.
pub fn pca_fit(x: &Matrix, k: usize, scale: bool) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::TooFewRows {
            context: "PCA".into(),
            needed: 2,
            got: n,
        });
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::invalid(format!(
            "k = {k} outside 1..={} for a {n}x{d} matrix",
            (n - 1).min(d)
        )));
    }
    if !x.all_finite() {
        return Err(Error::invalid("non-finite value in PCA input"));
    }

    let means: Vec<f64> = (0..d)
        .map(|j| x.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let scales: Vec<f64> = if scale {
        (0..d)
            .map(|j| {
                let var = x.iter_rows().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n as f64;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect()
    } else {
        vec![1.0; d]
    };

    let centered = DMatrix::from_fn(n, d, |i, j| (x.get(i, j) - means[j]) / scales[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let total: f64 = cov.diagonal().iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("every PCA column is constant".into()));
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();

    canonicalize_degenerate(&values, &mut vectors);
    for v in &mut vectors {
        orient(v);
    }

    vectors.truncate(k);
    let eigenvalues = values[..k].to_vec();
    let explained_variance_ratio = eigenvalues.iter().map(|l| l / total).collect();
    Ok(PcaModel {
        column_means: means,
        column_scales: scales,
        scaled: scale,
        components: vectors,
        eigenvalues,
        explained_variance_ratio,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn canonicalize_degenerate(values: &[f64], vectors: &mut [Vec<f64>]) {
    let d = vectors.first().map_or(0, Vec::len);
    if d == 0 {
        return;
    }
    let tol = 1e-10 * values.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let uniform = vec![1.0 / (d as f64).sqrt(); d];
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && (values[start] - values[end]).abs() <= tol {
            end += 1;
        }
        if end - start > 1 {
            let cluster = &vectors[start..end];
            let mut lead = vec![0.0; d];
            for v in cluster {
                let c = dot(v, &uniform);
                lead.iter_mut().zip(v).for_each(|(l, x)| *l += c * x);
            }
            if normalize(&mut lead) > 1e-8 {
                let mut basis = vec![lead];
                for v in cluster {
                    if basis.len() == end - start {
                        break;
                    }
                    let mut w = v.clone();
                    for b in &basis {
                        let c = dot(&w, b);
                        w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                    }
                    if normalize(&mut w) > 1e-8 {
                        basis.push(w);
                    }
                }
                if basis.len() == end - start {
                    for (slot, b) in vectors[start..end].iter_mut().zip(basis) {
                        *slot = b;
                    }
                }
            }
        }
        start = end;
    }
}

fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.column_means.len()
    }

    pub fn cumulative_ratio(&self) -> Vec<f64> {
        self.explained_variance_ratio
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }

    pub fn project_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::Arity {
                expected: self.dim(),
                got: row.len(),
            });
        }
        let centered: Vec<f64> = row
            .iter()
            .zip(&self.column_means)
            .zip(&self.column_scales)
            .map(|((x, m), s)| (x - m) / s)
            .collect();
        Ok(self.components.iter().map(|c| dot(c, &centered)).collect())
    }

    /// Scores of every row: `n x k`.
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        let rows = x
            .iter_rows()
            .map(|r| self.project_row(r))
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_rows(self.n_components(), rows)
    }

    /// Maps scores back into the centered (and scaled) input space.
    pub fn back_project(&self, scores: &Matrix) -> Result<Matrix> {
        if scores.cols() != self.n_components() {
            return Err(Error::Arity {
                expected: self.n_components(),
                got: scores.cols(),
            });
        }
        let d = self.dim();
        let mut out = Matrix::zeros(scores.rows(), d);
        for i in 0..scores.rows() {
            let row = out.row_mut(i);
            for (s, c) in scores.row(i).iter().zip(&self.components) {
                row.iter_mut().zip(c).for_each(|(o, x)| *o += s * x);
            }
        }
        Ok(out)
    }

    /// Line-oriented text form: header, then comma-separated vectors.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_TAG}");
        let _ = writeln!(
            out,
            "dims,{},{},{}",
            self.dim(),
            self.n_components(),
            u8::from(self.scaled)
        );
        let _ = writeln!(out, "means,{}", join(&self.column_means));
        let _ = writeln!(out, "scales,{}", join(&self.column_scales));
        let _ = writeln!(out, "eigenvalues,{}", join(&self.eigenvalues));
        let _ = writeln!(out, "explained,{}", join(&self.explained_variance_ratio));
        for c in &self.components {
            let _ = writeln!(out, "component,{}", join(c));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, message: &str| Error::ModelFormat {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, FORMAT_TAG)) => {}
            _ => return Err(bad(1, "missing PCA format tag")),
        }
        let mut field = |name: &str| -> Result<(usize, Vec<f64>)> {
            let (i, line) = lines.next().ok_or_else(|| bad(0, "truncated PCA file"))?;
            let mut parts = line.split(',');
            if parts.next() != Some(name) {
                return Err(bad(i + 1, &format!("expected `{name}` row")));
            }
            let values = parts
                .filter(|p| !p.is_empty())
                .map(|p| p.parse::<f64>().map_err(|_| bad(i + 1, "unparseable number")))
                .collect::<Result<Vec<_>>>()?;
            Ok((i + 1, values))
        };
        let (line, dims) = field("dims")?;
        if dims.len() != 3 {
            return Err(bad(line, "dims row needs d, k, scaled"));
        }
        let (d, k) = (dims[0] as usize, dims[1] as usize);
        let (_, column_means) = field("means")?;
        let (_, column_scales) = field("scales")?;
        let (_, eigenvalues) = field("eigenvalues")?;
        let (_, explained_variance_ratio) = field("explained")?;
        let mut components = Vec::with_capacity(k);
        for _ in 0..k {
            let (line, c) = field("component")?;
            if c.len() != d {
                return Err(bad(line, "component length differs from d"));
            }
            components.push(c);
        }
        if column_means.len() != d || column_scales.len() != d || eigenvalues.len() != k {
            return Err(bad(0, "vector lengths inconsistent with dims"));
        }
        Ok(PcaModel {
            column_means,
            column_scales,
            scaled: dims[2] != 0.0,
            components,
            eigenvalues,
            explained_variance_ratio,
        })
    }
}
