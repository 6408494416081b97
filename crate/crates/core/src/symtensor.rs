//! Packed storage for real symmetric tensors of order `d` over `R^p`.
//!
//! A symmetric tensor is determined by one value per canonical multi-index,
//! i.e. per nondecreasing tuple `(i_1 <= ... <= i_d)` with entries in
//! `1..=p`. Values are stored in lexicographic order of those tuples, giving
//! a vector of length `C(p + d - 1, d)`. All indices in the public API are
//! 1-based, matching the text file format.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Hard cap on the number of stored canonical values (memory guard).
const MAX_CANONICAL: usize = 1 << 24;
/// Orders above this would overflow the exact multiplicity arithmetic.
const MAX_ORDER: usize = 12;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

const FACTORIALS: [f64; 13] = [
    1.0,
    1.0,
    2.0,
    6.0,
    24.0,
    120.0,
    720.0,
    5040.0,
    40320.0,
    362880.0,
    3628800.0,
    39916800.0,
    479001600.0,
];

/// Number of canonical multi-indices for dimension `dim` and order `order`.
pub fn canonical_count(dim: usize, order: usize) -> Result<usize> {
    let n = binomial(dim + order - 1, order);
    if n == 0 || n > MAX_CANONICAL as u128 {
        return Err(Error::UnsupportedSize(format!(
            "p={dim}, d={order} needs {n} canonical entries (cap {MAX_CANONICAL})"
        )));
    }
    Ok(n as usize)
}

fn check_shape(dim: usize, order: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    if order < 2 {
        return Err(Error::domain("order must be at least 2"));
    }
    if order > MAX_ORDER {
        return Err(Error::UnsupportedSize(format!(
            "order {order} exceeds cap {MAX_ORDER}"
        )));
    }
    Ok(())
}

/// Position of `entries` (any order, 1-based, within `1..=dim`) in the
/// lexicographic enumeration of canonical multi-indices.
pub fn canonical_position(entries: &[usize], dim: usize) -> Result<usize> {
    let order = entries.len();
    check_shape(dim, order)?;
    let mut sorted = entries.to_vec();
    sorted.sort_unstable();
    position_of_sorted(&sorted, dim)
}

fn position_of_sorted(sorted: &[usize], dim: usize) -> Result<usize> {
    let d = sorted.len();
    if sorted[0] < 1 || sorted[d - 1] > dim {
        return Err(Error::domain(format!(
            "index entry out of range 1..={dim}: {sorted:?}"
        )));
    }
    let mut rank: u128 = 0;
    let mut lo = 1usize;
    for (k, &i) in sorted.iter().enumerate() {
        let remaining = d - 1 - k;
        for v in lo..i {
            rank += binomial(dim - v + remaining, remaining);
        }
        lo = i;
    }
    Ok(rank as usize)
}

/// Number of distinct permutations of `sorted` (must be nondecreasing):
/// `d! / prod_j m_j!` over the repetition counts `m_j`.
pub fn multiplicity(sorted: &[usize]) -> Result<f64> {
    let d = sorted.len();
    if d == 0 || d > MAX_ORDER {
        return Err(Error::domain(format!("order {d} out of range 1..={MAX_ORDER}")));
    }
    if sorted.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::domain(format!(
            "multiplicity requires a nondecreasing tuple, got {sorted:?}"
        )));
    }
    let mut denom = 1.0;
    let mut run = 1usize;
    for k in 1..=d {
        if k < d && sorted[k] == sorted[k - 1] {
            run += 1;
        } else {
            denom *= FACTORIALS[run];
            run = 1;
        }
    }
    Ok(FACTORIALS[d] / denom)
}

/// Calls `f(tuple, position)` for every canonical multi-index in
/// lexicographic order. The tuple buffer is reused between calls.
pub fn for_each_canonical(dim: usize, order: usize, mut f: impl FnMut(&[usize], usize)) {
    let mut idx = vec![1usize; order];
    let mut pos = 0usize;
    loop {
        f(&idx, pos);
        pos += 1;
        let mut k = order;
        while k > 0 && idx[k - 1] == dim {
            k -= 1;
        }
        if k == 0 {
            return;
        }
        let v = idx[k - 1] + 1;
        for slot in idx.iter_mut().skip(k - 1) {
            *slot = v;
        }
    }
}

/// A canonical (sorted) multi-index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymIndex {
    entries: Vec<usize>,
}

impl SymIndex {
    /// Sorts `entries` and validates the range `1..=dim`.
    pub fn new(mut entries: Vec<usize>, dim: usize) -> Result<Self> {
        entries.sort_unstable();
        if entries.is_empty() || entries[0] < 1 || entries[entries.len() - 1] > dim {
            return Err(Error::domain(format!(
                "index entries must lie in 1..={dim}: {entries:?}"
            )));
        }
        Ok(SymIndex { entries })
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn order(&self) -> usize {
        self.entries.len()
    }

    pub fn multiplicity(&self) -> f64 {
        multiplicity(&self.entries).expect("entries are sorted by construction")
    }

    pub fn position(&self, dim: usize) -> Result<usize> {
        position_of_sorted(&self.entries, dim)
    }
}

/// Dense-free representation of a symmetric order-`d` tensor on `R^p`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricTensor {
    dim: usize,
    order: usize,
    values: Vec<f64>,
}

impl SymmetricTensor {
    pub fn zeros(dim: usize, order: usize) -> Result<Self> {
        check_shape(dim, order)?;
        let n = canonical_count(dim, order)?;
        Ok(SymmetricTensor {
            dim,
            order,
            values: vec![0.0; n],
        })
    }

    /// Wraps a full canonical value vector (lexicographic order).
    pub fn from_values(dim: usize, order: usize, values: Vec<f64>) -> Result<Self> {
        check_shape(dim, order)?;
        let n = canonical_count(dim, order)?;
        if values.len() != n {
            return Err(Error::domain(format!(
                "expected {n} canonical values for p={dim}, d={order}, got {}",
                values.len()
            )));
        }
        Ok(SymmetricTensor { dim, order, values })
    }

    /// The rank-one tensor `c * u^{(x) order}`.
    pub fn rank_one(c: f64, u: &[f64], order: usize) -> Result<Self> {
        let mut t = SymmetricTensor::zeros(u.len(), order)?;
        for_each_canonical(t.dim, t.order, |idx, pos| {
            let mut prod = c;
            for &e in idx {
                prod *= u[e - 1];
            }
            t.values[pos] = prod;
        });
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Canonical values in lexicographic order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Entry at `idx` (any permutation, 1-based).
    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        self.check_index(idx)?;
        Ok(self.values[canonical_position(idx, self.dim)?])
    }

    pub fn set(&mut self, idx: &[usize], v: f64) -> Result<()> {
        self.check_index(idx)?;
        let pos = canonical_position(idx, self.dim)?;
        self.values[pos] = v;
        Ok(())
    }

    fn check_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.order {
            return Err(Error::domain(format!(
                "index of length {} on order-{} tensor",
                idx.len(),
                self.order
            )));
        }
        Ok(())
    }

    fn check_vector(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::domain(format!(
                "vector of length {} on dimension-{} tensor",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Calls `f(tuple, value)` over canonical entries in lexicographic order.
    pub fn for_each_entry(&self, mut f: impl FnMut(&[usize], f64)) {
        for_each_canonical(self.dim, self.order, |idx, pos| f(idx, self.values[pos]));
    }

    /// The symmetric form `<T, x^{(x) d}> = sum_{i_1..i_d} T_{i_1..i_d} x_{i_1}...x_{i_d}`,
    /// computed over canonical entries weighted by their multiplicities.
    pub fn eval_form(&self, x: &[f64]) -> Result<f64> {
        self.check_vector(x)?;
        let mut acc = 0.0;
        self.for_each_entry(|idx, v| {
            if v == 0.0 {
                return;
            }
            let mut term = v * multiplicity_of_sorted(idx);
            for &e in idx {
                term *= x[e - 1];
            }
            acc += term;
        });
        Ok(acc)
    }

    /// The contraction `g_i = sum_{j_2..j_d} T_{i,j_2..j_d} x_{j_2}...x_{j_d}`.
    ///
    /// Satisfies `<g, x> = eval_form(T, x)`; the gradient of `eval_form`
    /// at `x` is `d` times this vector.
    pub fn grad_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_vector(x)?;
        let d = self.order;
        let mut g = vec![0.0; self.dim];
        self.for_each_entry(|idx, v| {
            if v == 0.0 {
                return;
            }
            // For each distinct entry e of the tuple, the full tuples
            // (e, rest) with sorted form idx contribute
            // v * (d-1)! / ((m_e - 1)! prod m_other!) * prod_{rest} x.
            let mut k = 0;
            while k < d {
                let e = idx[k];
                let mut run = 1;
                while k + run < d && idx[k + run] == e {
                    run += 1;
                }
                let mut term = v * reduced_multiplicity(idx, k, run);
                for (j, &e2) in idx.iter().enumerate() {
                    if j != k {
                        term *= x[e2 - 1];
                    }
                }
                g[e - 1] += term;
                k += run;
            }
        });
        Ok(g)
    }

    /// Frobenius norm: `sqrt(sum over canonical idx of mult(idx) * value^2)`.
    pub fn frobenius(&self) -> f64 {
        let mut acc = 0.0;
        self.for_each_entry(|idx, v| {
            if v != 0.0 {
                acc += multiplicity_of_sorted(idx) * v * v;
            }
        });
        acc.sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Errors if any stored value is NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor has a non-finite entry".into()));
        }
        Ok(())
    }

    /// Mode-1 unfolding: the `p x p^{d-1}` matrix with `M[i, col(j_2..j_d)] =
    /// T_{i,j_2..j_d}`, columns in row-major (odometer) order of `(j_2..j_d)`.
    pub fn unfold(&self) -> Result<Matrix> {
        let p = self.dim;
        let d = self.order;
        let cols = p
            .checked_pow((d - 1) as u32)
            .filter(|&c| c <= MAX_CANONICAL)
            .ok_or_else(|| {
                Error::UnsupportedSize(format!("unfolding needs p^{} columns", d - 1))
            })?;
        let mut m = Matrix::zeros(p, cols);
        let mut rest = vec![1usize; d - 1];
        let mut sorted = vec![0usize; d];
        for col in 0..cols {
            for i in 1..=p {
                sorted[0] = i;
                sorted[1..].copy_from_slice(&rest);
                sorted.sort_unstable();
                let pos = position_of_sorted(&sorted, p)?;
                m.set(i - 1, col, self.values[pos]);
            }
            for k in (0..d - 1).rev() {
                if rest[k] < p {
                    rest[k] += 1;
                    for slot in rest.iter_mut().skip(k + 1) {
                        *slot = 1;
                    }
                    break;
                }
            }
        }
        Ok(m)
    }

    /// Gram matrix `M M^T` of the mode-1 unfolding, assembled from canonical
    /// rest-tuples without materializing the `p^{d-1}` columns:
    /// `G = sum over canonical s of mult(s) * t_s t_s^T` with
    /// `t_s[i] = T[sort(i, s)]`.
    pub fn unfolding_gram(&self) -> Result<Matrix> {
        let p = self.dim;
        let d = self.order;
        let mut g = Matrix::zeros(p, p);
        let mut t = vec![0.0; p];
        let mut sorted = vec![0usize; d];
        let mut err = None;
        for_each_canonical(p, d - 1, |rest, _| {
            if err.is_some() {
                return;
            }
            for i in 1..=p {
                sorted[0] = i;
                sorted[1..].copy_from_slice(rest);
                sorted.sort_unstable();
                match position_of_sorted(&sorted, p) {
                    Ok(pos) => t[i - 1] = self.values[pos],
                    Err(e) => {
                        err = Some(e);
                        return;
                    }
                }
            }
            let w = multiplicity_of_sorted(rest);
            g.add_scaled_outer(w, &t);
        });
        match err {
            Some(e) => Err(e),
            None => Ok(g),
        }
    }

    /// Elementwise `alpha * a + b`; shapes must match.
    pub fn axpy(alpha: f64, a: &SymmetricTensor, b: &SymmetricTensor) -> Result<SymmetricTensor> {
        if a.dim != b.dim || a.order != b.order {
            return Err(Error::domain(format!(
                "shape mismatch: (p={}, d={}) vs (p={}, d={})",
                a.dim, a.order, b.dim, b.order
            )));
        }
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(&x, &y)| alpha * x + y)
            .collect();
        Ok(SymmetricTensor {
            dim: a.dim,
            order: a.order,
            values,
        })
    }

    /// Elementwise scaling by `c`.
    pub fn scale(&self, c: f64) -> SymmetricTensor {
        SymmetricTensor {
            dim: self.dim,
            order: self.order,
            values: self.values.iter().map(|&v| c * v).collect(),
        }
    }

    /// Writes the `SYMTENSOR v1` text format; zero entries are omitted and
    /// values carry 17 significant digits for exact round-trips.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        writeln!(w, "SYMTENSOR v1 d={} p={}", self.order, self.dim)?;
        let mut line = String::new();
        let mut io_err = None;
        self.for_each_entry(|idx, v| {
            if v == 0.0 || io_err.is_some() {
                return;
            }
            line.clear();
            for &e in idx {
                let _ = write!(line, "{e} ");
            }
            let _ = write!(line, "{v:.16e}");
            if let Err(e) = writeln!(w, "{line}") {
                io_err = Some(e);
            }
        });
        match io_err {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }

    /// Parses the `SYMTENSOR v1` text format. Unlisted canonical entries are
    /// zero; `#` lines are comments; indices must be nondecreasing and unique.
    pub fn read_from(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let file = std::fs::File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let header = match lines.next() {
            Some(h) => h?,
            None => return Err(Error::parse(&name, 1, "empty file, expected header")),
        };
        let (order, dim) = parse_header(&header).map_err(|msg| Error::parse(&name, 1, msg))?;
        check_shape(dim, order).map_err(|e| Error::parse(&name, 1, e.to_string()))?;
        let mut t =
            SymmetricTensor::zeros(dim, order).map_err(|e| Error::parse(&name, 1, e.to_string()))?;
        let mut seen = vec![false; t.values.len()];
        for (lineno, line) in lines.enumerate() {
            let lineno = lineno + 2;
            let line = line?;
            let body = line.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = body.split_whitespace().collect();
            if tokens.len() != order + 1 {
                return Err(Error::parse(
                    &name,
                    lineno,
                    format!("expected {} indices and a value, got {} tokens", order, tokens.len()),
                ));
            }
            let mut idx = Vec::with_capacity(order);
            for tok in &tokens[..order] {
                let e: usize = tok
                    .parse()
                    .map_err(|_| Error::parse(&name, lineno, format!("bad index `{tok}`")))?;
                if e < 1 || e > dim {
                    return Err(Error::parse(
                        &name,
                        lineno,
                        format!("index {e} out of range 1..={dim}"),
                    ));
                }
                idx.push(e);
            }
            if idx.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::parse(
                    &name,
                    lineno,
                    format!("indices must be nondecreasing, got {idx:?}"),
                ));
            }
            let v: f64 = tokens[order]
                .parse()
                .map_err(|_| Error::parse(&name, lineno, format!("bad value `{}`", tokens[order])))?;
            if !v.is_finite() {
                return Err(Error::parse(&name, lineno, "value must be finite"));
            }
            let pos = position_of_sorted(&idx, dim)
                .map_err(|e| Error::parse(&name, lineno, e.to_string()))?;
            if seen[pos] {
                return Err(Error::parse(
                    &name,
                    lineno,
                    format!("duplicate canonical index {idx:?}"),
                ));
            }
            seen[pos] = true;
            t.values[pos] = v;
        }
        Ok(t)
    }
}

fn multiplicity_of_sorted(idx: &[usize]) -> f64 {
    multiplicity(idx).expect("canonical tuples are sorted")
}

/// Multiplicity of the tuple with one copy of the run starting at `run_start`
/// removed: `(d-1)! / ((m-1)! * prod of other run factorials)`.
fn reduced_multiplicity(idx: &[usize], run_start: usize, run_len: usize) -> f64 {
    let d = idx.len();
    let mut denom = FACTORIALS[run_len - 1];
    let mut k = 0;
    while k < d {
        let e = idx[k];
        let mut run = 1;
        while k + run < d && idx[k + run] == e {
            run += 1;
        }
        if k != run_start {
            denom *= FACTORIALS[run];
        }
        k += run;
    }
    FACTORIALS[d - 1] / denom
}

fn parse_header(header: &str) -> std::result::Result<(usize, usize), String> {
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 4 || tokens[0] != "SYMTENSOR" || tokens[1] != "v1" {
        return Err("expected header `SYMTENSOR v1 d=<d> p=<p>`".into());
    }
    let d = tokens[2]
        .strip_prefix("d=")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("bad order field `{}`", tokens[2]))?;
    let p = tokens[3]
        .strip_prefix("p=")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("bad dimension field `{}`", tokens[3]))?;
    Ok((d, p))
}
