use crate::error::{Error, Result};

/// Dense row-major design matrix with column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    column_labels: Vec<String>,
}

impl DesignMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>, column_labels: Vec<String>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n_rows}x{n_cols} design",
                values.len()
            )));
        }
        if column_labels.len() != n_cols {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {n_cols} columns",
                column_labels.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::DegenerateDesign(format!(
                "non-finite entry at row {}, column {}",
                i / n_cols.max(1),
                i % n_cols.max(1)
            )));
        }
        Ok(DesignMatrix { n_rows, n_cols, values, column_labels })
    }

    /// A single column of ones.
    pub fn intercept(n_rows: usize) -> Self {
        DesignMatrix {
            n_rows,
            n_cols: 1,
            values: vec![1.0; n_rows],
            column_labels: vec!["(intercept)".into()],
        }
    }

    /// Intercept followed by the raw covariates.
    pub fn linear(rows: &[&[f64]], names: &[String]) -> Result<Self> {
        let k = names.len();
        let mut values = Vec::with_capacity(rows.len() * (k + 1));
        for r in rows {
            if r.len() != k {
                return Err(Error::DimensionMismatch(format!("row of {} covariates, expected {k}", r.len())));
            }
            values.push(1.0);
            values.extend_from_slice(r);
        }
        let mut labels = vec!["(intercept)".to_string()];
        labels.extend(names.iter().cloned());
        Self::new(rows.len(), k + 1, values, labels)
    }

    /// Intercept, covariates, their squares and all pairwise interactions.
    pub fn quadratic(rows: &[&[f64]], names: &[String]) -> Result<Self> {
        let k = names.len();
        let mut labels = vec!["(intercept)".to_string()];
        labels.extend(names.iter().cloned());
        for a in 0..k {
            for b in a..k {
                labels.push(if a == b {
                    format!("{}^2", names[a])
                } else {
                    format!("{}*{}", names[a], names[b])
                });
            }
        }
        let p = labels.len();
        let mut values = Vec::with_capacity(rows.len() * p);
        for r in rows {
            if r.len() != k {
                return Err(Error::DimensionMismatch(format!("row of {} covariates, expected {k}", r.len())));
            }
            values.push(1.0);
            values.extend_from_slice(r);
            for a in 0..k {
                for b in a..k {
                    values.push(r[a] * r[b]);
                }
            }
        }
        Self::new(rows.len(), p, values, labels)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_labels(&self) -> &[String] {
        &self.column_labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// `X β` for a coefficient vector of matching length.
    pub fn mul_vec(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() != self.n_cols {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} columns",
                beta.len(),
                self.n_cols
            )));
        }
        Ok((0..self.n_rows)
            .map(|i| self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Keeps the rows where `keep` is true.
    pub fn select_rows(&self, keep: &[bool]) -> DesignMatrix {
        let mut values = Vec::new();
        let mut n = 0;
        for (i, &k) in keep.iter().enumerate() {
            if k {
                values.extend_from_slice(self.row(i));
                n += 1;
            }
        }
        DesignMatrix {
            n_rows: n,
            n_cols: self.n_cols,
            values,
            column_labels: self.column_labels.clone(),
        }
    }

    pub(crate) fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n_rows, self.n_cols, &self.values)
    }
}
