//! Sample moments and cumulant tensors.
//!
//! The estimators here are the plug-in kind: central moments with `1/n`
//! normalization, combined into cumulants of order 3 or 4. They are biased by
//! `O(1/n)`, which is below the noise floor of every experiment in this
//! workspace, and they are degree-`order` polynomials in the data, which is
//! the property the detection harness relies on. The module also provides the
//! planted model's population cumulant (a rank-one tensor) and the whitening
//! matrix that makes the planted covariance the identity.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{norm2, Matrix};
use crate::symtensor::{for_each_canonical, SymmetricTensor};

/// `n` observations of dimension `p`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl SampleSet {
    /// Wraps row-major data; requires `n >= 2`, `p >= 1`, and finite entries.
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("need at least 2 observations, got {n}")));
        }
        if p == 0 {
            return Err(Error::domain("observation dimension must be positive"));
        }
        if data.len() != n * p {
            return Err(Error::domain(format!(
                "expected {n} x {p} = {} entries, got {}",
                n * p,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::non_finite(format!(
                "sample entry at row {}, column {}",
                bad / p + 1,
                bad % p + 1
            )));
        }
        Ok(SampleSet { n, p, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.p)
    }

    /// Writes headerless CSV, one observation per row, 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for row in self.rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    write!(w, ",")?;
                }
                write!(w, "{v:.16e}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the headerless CSV format written by [`SampleSet::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| {
            Error::parse(path.display().to_string(), 0, format!("cannot open: {e}"))
        })?;
        let mut data = Vec::new();
        let mut p = 0usize;
        let mut n = 0usize;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if p == 0 {
                p = fields.len();
            } else if fields.len() != p {
                return Err(Error::parse(
                    path.display().to_string(),
                    lineno,
                    format!("expected {p} fields, got {}", fields.len()),
                ));
            }
            for field in fields {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::parse(
                        path.display().to_string(),
                        lineno,
                        format!("invalid number `{}`", field.trim()),
                    )
                })?;
                data.push(v);
            }
            n += 1;
        }
        if n < 2 {
            return Err(Error::parse(
                path.display().to_string(),
                n,
                format!("need at least 2 observations, got {n}"),
            ));
        }
        SampleSet::new(n, p, data)
    }
}

/// How a cumulant tensor was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Plug-in estimate from observed samples.
    PluginEmpirical,
    /// Closed-form population cumulant of the planted model.
    PopulationPlanted,
}

/// An order-3 or order-4 cumulant tensor together with its origin.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulantEstimate {
    pub order: usize,
    pub tensor: SymmetricTensor,
    pub provenance: Provenance,
}

/// Row mean and plug-in covariance `(1/n) * sum (Y_i - mean)(Y_i - mean)^T`.
pub fn sample_moments(s: &SampleSet) -> (Vec<f64>, Matrix) {
    let (n, p) = (s.n(), s.p());
    let mut mean = vec![0.0; p];
    for row in s.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = Matrix::zeros(p, p);
    let mut centered = vec![0.0; p];
    for row in s.rows() {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = v - m;
        }
        cov.add_scaled_outer(1.0, &centered);
    }
    let scale = 1.0 / n as f64;
    for v in cov.data_mut() {
        *v *= scale;
    }
    (mean, cov)
}

/// Plug-in cumulant tensor of order 3 or 4.
///
/// Order 3 is the centered third moment `(1/n) * sum c_i^{(x)3}`. Order 4
/// subtracts the three covariance pairings from the centered fourth moment,
/// so Gaussian data gives a tensor that vanishes as `n` grows.
pub fn khat(s: &SampleSet, order: usize) -> Result<CumulantEstimate> {
    if order != 3 && order != 4 {
        return Err(Error::domain(format!(
            "cumulant order must be 3 or 4, got {order}"
        )));
    }
    let (mean, cov) = sample_moments(s);
    let (n, p) = (s.n(), s.p());
    let mut tensor = SymmetricTensor::zeros(p, order)?;
    let mut centered = vec![0.0; p];
    for row in s.rows() {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = v - m;
        }
        let values = tensor.values_mut();
        for_each_canonical(p, order, |idx, pos| {
            let mut prod = 1.0;
            for &e in idx {
                prod *= centered[e - 1];
            }
            values[pos] += prod;
        });
    }
    let scale = 1.0 / n as f64;
    for v in tensor.values_mut() {
        *v *= scale;
    }
    if order == 4 {
        let values = tensor.values_mut();
        for_each_canonical(p, 4, |idx, pos| {
            let (i, j, k, l) = (idx[0] - 1, idx[1] - 1, idx[2] - 1, idx[3] - 1);
            values[pos] -= cov.get(i, j) * cov.get(k, l)
                + cov.get(i, k) * cov.get(j, l)
                + cov.get(i, l) * cov.get(j, k);
        });
    }
    Ok(CumulantEstimate {
        order,
        tensor,
        provenance: Provenance::PluginEmpirical,
    })
}

/// Checks the spike-vector contract `||u||_2 = sqrt(p)` within 1e-8.
pub(crate) fn check_spike(u: &[f64]) -> Result<()> {
    if u.is_empty() {
        return Err(Error::domain("spike vector must be nonempty"));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::non_finite("spike vector"));
    }
    let norm = norm2(u);
    let want = (u.len() as f64).sqrt();
    if (norm - want).abs() > 1e-8 {
        return Err(Error::domain(format!(
            "spike vector norm must be sqrt(p) = {want}, got {norm}"
        )));
    }
    Ok(())
}

/// The whitening matrix `S = I - a/(1+a+sqrt(1+a)) * u u^T / p`.
///
/// `S` is symmetric, satisfies `S (I + a u u^T / p) S = I`, and maps the
/// spike to `S u = u / sqrt(1+a)`.
pub fn whitening_matrix(a: f64, u: &[f64]) -> Result<Matrix> {
    if !a.is_finite() || a < 0.0 {
        return Err(Error::domain(format!(
            "spike strength must be finite and nonnegative, got {a}"
        )));
    }
    check_spike(u)?;
    let p = u.len();
    let coeff = a / (1.0 + a + (1.0 + a).sqrt());
    let mut s = Matrix::identity(p);
    s.add_scaled_outer(-coeff / p as f64, u);
    Ok(s)
}

/// Population cumulant of the planted model: the rank-one tensor
/// `wcum * (a/p)^{d/2} * (S u)^{(x)d}` with `S u = u / sqrt(1+a)`.
pub fn population_planted_cumulant(
    a: f64,
    u: &[f64],
    wcum: f64,
    d: usize,
) -> Result<CumulantEstimate> {
    if d != 3 && d != 4 {
        return Err(Error::domain(format!(
            "cumulant order must be 3 or 4, got {d}"
        )));
    }
    if !a.is_finite() || a < 0.0 {
        return Err(Error::domain(format!(
            "spike strength must be finite and nonnegative, got {a}"
        )));
    }
    if !wcum.is_finite() {
        return Err(Error::non_finite("spike cumulant"));
    }
    check_spike(u)?;
    let p = u.len() as f64;
    let shrink = 1.0 / (1.0 + a).sqrt();
    let su: Vec<f64> = u.iter().map(|v| v * shrink).collect();
    let coeff = wcum * (a / p).sqrt().powi(d as i32);
    let tensor = SymmetricTensor::rank_one(coeff, &su, d)?;
    Ok(CumulantEstimate {
        order: d,
        tensor,
        provenance: Provenance::PopulationPlanted,
    })
}

/// Spectral norm of the population cumulant: `|wcum| * (a/(1+a))^{d/2}`.
pub fn population_norm(a: f64, wcum: f64, d: usize) -> f64 {
    wcum.abs() * (a / (1.0 + a)).sqrt().powi(d as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{substream, GaussianSource};

    fn set(rows: &[&[f64]]) -> SampleSet {
        let p = rows[0].len();
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        SampleSet::new(rows.len(), p, data).unwrap()
    }

    fn gaussian_set(n: usize, p: usize, seed: u64) -> SampleSet {
        let mut g = GaussianSource::new(substream(seed, "gaussian-set", 0));
        let data: Vec<f64> = (0..n * p).map(|_| g.next_normal()).collect();
        SampleSet::new(n, p, data).unwrap()
    }

    #[test]
    fn sample_set_validates() {
        assert!(SampleSet::new(1, 2, vec![0.0, 0.0]).is_err());
        assert!(SampleSet::new(2, 2, vec![0.0; 3]).is_err());
        assert!(SampleSet::new(2, 1, vec![0.0, f64::NAN]).is_err());
        assert!(SampleSet::new(2, 0, vec![]).is_err());
    }

    #[test]
    fn moments_hand_cases() {
        let (mean, cov) = sample_moments(&set(&[&[5.0, -2.0], &[5.0, -2.0], &[5.0, -2.0]]));
        assert_eq!(mean, vec![5.0, -2.0]);
        assert_eq!(cov.data(), &[0.0, 0.0, 0.0, 0.0]);

        let (mean, cov) = sample_moments(&set(&[&[-1.0], &[1.0]]));
        assert_eq!(mean, vec![0.0]);
        assert_eq!(cov.data(), &[1.0]);

        let (mean, cov) = sample_moments(&set(&[&[1.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(mean, vec![0.5, 0.5]);
        assert_eq!(cov.data(), &[0.25, -0.25, -0.25, 0.25]);
    }

    #[test]
    fn khat_scalar_hand_cases() {
        let k3 = khat(&set(&[&[0.0], &[0.0], &[3.0]]), 3).unwrap();
        assert_eq!(k3.order, 3);
        assert_eq!(k3.provenance, Provenance::PluginEmpirical);
        assert_eq!(k3.tensor.values(), &[2.0]);

        let k4 = khat(&set(&[&[-1.0], &[1.0], &[-1.0], &[1.0]]), 4).unwrap();
        assert_eq!(k4.tensor.values(), &[-2.0]);
    }

    #[test]
    fn khat_constant_rows_vanish() {
        let s = set(&[&[2.0, -1.0], &[2.0, -1.0], &[2.0, -1.0]]);
        for order in [3, 4] {
            let k = khat(&s, order).unwrap();
            assert!(k.tensor.is_zero());
        }
    }

    #[test]
    fn khat_rejects_bad_order() {
        let s = set(&[&[0.0], &[1.0]]);
        assert!(khat(&s, 2).is_err());
        assert!(khat(&s, 5).is_err());
    }

    #[test]
    fn khat_is_shift_invariant() {
        let s = gaussian_set(200, 3, 7);
        let shift = [10.0, -3.0, 0.25];
        let shifted_data: Vec<f64> = s
            .rows()
            .flat_map(|r| r.iter().zip(&shift).map(|(v, c)| v + c))
            .collect();
        let shifted = SampleSet::new(s.n(), s.p(), shifted_data).unwrap();
        for order in [3, 4] {
            let base = khat(&s, order).unwrap();
            let moved = khat(&shifted, order).unwrap();
            for (x, y) in base.tensor.values().iter().zip(moved.tensor.values()) {
                assert!((x - y).abs() < 1e-10, "order {order}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn khat_order3_is_odd_under_negation() {
        let s = gaussian_set(150, 3, 11);
        let negated_data: Vec<f64> = s.rows().flat_map(|r| r.iter().map(|v| -v)).collect();
        let negated = SampleSet::new(s.n(), s.p(), negated_data).unwrap();
        let base = khat(&s, 3).unwrap();
        let flipped = khat(&negated, 3).unwrap();
        for (x, y) in base.tensor.values().iter().zip(flipped.tensor.values()) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        let s = gaussian_set(20, 4, 3);
        s.write_csv(&path).unwrap();
        let back = SampleSet::read_csv(&path).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn csv_rejects_malformed_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");

        std::fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        let err = SampleSet::read_csv(&path).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");

        std::fs::write(&path, "1.0,abc\n3.0,4.0\n").unwrap();
        let err = SampleSet::read_csv(&path).unwrap_err().to_string();
        assert!(err.contains("abc"), "{err}");

        std::fs::write(&path, "1.0,2.0\n").unwrap();
        assert!(SampleSet::read_csv(&path).is_err());
    }

    #[test]
    fn whitening_closed_form() {
        let u = vec![1.0; 4];
        let s = whitening_matrix(0.0, &u).unwrap();
        assert_eq!(s.data(), Matrix::identity(4).data());

        // a = 3: coefficient 3/(4+2) = 0.5, so S u = u - 0.5 u = 0.5 u.
        let s = whitening_matrix(3.0, &u).unwrap();
        let su = s.matvec(&u);
        for v in &su {
            assert!((v - 0.5).abs() < 1e-15);
        }
        let norm_sq: f64 = su.iter().map(|v| v * v).sum();
        assert!((norm_sq - 4.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn whitening_inverts_planted_covariance() {
        for &a in &[0.1, 1.0, 3.0, 10.0] {
            for &p in &[2usize, 10, 50] {
                // A valid non-uniform spike: scale a ramp to norm sqrt(p).
                let raw: Vec<f64> = (0..p).map(|i| 1.0 + 0.5 * i as f64).collect();
                let scale = (p as f64).sqrt() / norm2(&raw);
                let u: Vec<f64> = raw.iter().map(|v| v * scale).collect();
                let s = whitening_matrix(a, &u).unwrap();

                let mut cov = Matrix::identity(p);
                cov.add_scaled_outer(a / p as f64, &u);
                let prod = s.matmul(&cov).matmul(&s);
                let mut dist = 0.0f64;
                for i in 0..p {
                    for j in 0..p {
                        let want = if i == j { 1.0 } else { 0.0 };
                        dist += (prod.get(i, j) - want).powi(2);
                    }
                }
                assert!(dist.sqrt() <= 1e-12, "a={a}, p={p}: {}", dist.sqrt());

                let su = s.matvec(&u);
                let norm_sq: f64 = su.iter().map(|v| v * v).sum();
                assert!((norm_sq - p as f64 / (1.0 + a)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn whitening_rejects_bad_inputs() {
        assert!(whitening_matrix(-0.5, &[1.0, 1.0]).is_err());
        assert!(whitening_matrix(1.0, &[1.0, 0.5]).is_err());
        assert!(whitening_matrix(1.0, &[]).is_err());
    }

    #[test]
    fn population_cumulant_norms() {
        let u = vec![1.0; 3];

        let zero = population_planted_cumulant(0.0, &u, 1.5, 3).unwrap();
        assert!(zero.tensor.is_zero());
        assert_eq!(zero.provenance, Provenance::PopulationPlanted);

        // The rank-one norm is attained at su/||su||, which here is the
        // normalized all-ones direction.
        let x = [1.0 / 3.0f64.sqrt(); 3];

        // d=4, Rademacher kurtosis -2, a=1: norm |-2| * (1/2)^2 = 0.5.
        let k4 = population_planted_cumulant(1.0, &u, -2.0, 4).unwrap();
        assert!((k4.tensor.eval_form(&x).unwrap().abs() - 0.5).abs() < 1e-12);
        assert!((population_norm(1.0, -2.0, 4) - 0.5).abs() < 1e-15);

        // d=3, third cumulant 1.5, a=3: norm 1.5 * (3/4)^{3/2}.
        let want = 1.5 * (0.75f64).sqrt().powi(3);
        assert!((population_norm(3.0, 1.5, 3) - want).abs() < 1e-15);
        let k3 = population_planted_cumulant(3.0, &u, 1.5, 3).unwrap();
        assert!((k3.tensor.eval_form(&x).unwrap().abs() - want).abs() < 1e-12);
        // Frobenius dominates the spectral norm on any tensor.
        assert!(k3.tensor.frobenius() >= want - 1e-12);

        assert!(population_planted_cumulant(1.0, &u, 1.0, 5).is_err());
        assert!(population_planted_cumulant(-1.0, &u, 1.0, 3).is_err());
    }

    #[test]
    fn gaussian_null_cumulants_stay_small() {
        // Plug-in cumulants of pure noise shrink like sqrt(C/n); the envelope
        // constant 30 covers the per-entry variance of both orders at p=3.
        let n = 100_000;
        let s = gaussian_set(n, 3, 42);
        let envelope = 5.0 * (30.0 / n as f64).sqrt();
        for order in [3, 4] {
            let k = khat(&s, order).unwrap();
            for (pos, v) in k.tensor.values().iter().enumerate() {
                assert!(
                    v.abs() <= envelope,
                    "order {order}, entry {pos}: {v} vs {envelope}"
                );
            }
        }
    }
}
