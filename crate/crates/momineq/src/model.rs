//! Parameter boxes and moment-inequality models.
//!
//! A moment model maps an observation and a parameter vector to a
//! p-vector `m(X_i, theta)`; the modeling assumption is that every
//! component of `E m(X, theta_0)` is nonnegative at the true parameter.
//! Models come in two kinds:
//!
//! - affine: `m(X_i, theta) = A_i theta + b_i` with per-observation
//!   coefficients extracted from named dataset columns. Sample means
//!   reduce to `Abar theta + bbar`, which everything downstream caches.
//! - generic: an arbitrary per-observation callback. Supported by the
//!   likelihood and samplers, but not by routines that need the affine
//!   structure (working-prior candidate evaluation).

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Compact axis-aligned parameter box with finite bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaBox {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl ThetaBox {
    /// Builds a box from coordinate bounds; requires finite
    /// `lower[j] < upper[j]` in every coordinate.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Dimension(format!(
                "box bounds of lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for j in 0..lower.len() {
            if !lower[j].is_finite() || !upper[j].is_finite() || lower[j] >= upper[j] {
                return Err(Error::InvalidArgument(format!(
                    "box coordinate {}: need finite lower < upper, got [{}, {}]",
                    j + 1,
                    lower[j],
                    upper[j]
                )));
            }
        }
        Ok(Self { lower: DVector::from_vec(lower), upper: DVector::from_vec(upper) })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    /// Side length along coordinate `j`.
    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    /// Product of side lengths.
    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.width(j)).product()
    }

    /// Whether `theta` lies inside (boundary included).
    pub fn contains(&self, theta: &DVector<f64>) -> bool {
        theta.len() == self.dim()
            && (0..self.dim()).all(|j| theta[j] >= self.lower[j] && theta[j] <= self.upper[j])
    }

    /// Nearest point of the box to `theta`, coordinatewise.
    pub fn clamp(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |j, _| theta[j].clamp(self.lower[j], self.upper[j]))
    }

    /// Sub-box over the listed coordinates (0-based, strictly
    /// increasing).
    pub fn restrict(&self, coords: &[usize]) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("cannot restrict a box to zero coordinates".into()));
        }
        for &c in coords {
            if c >= self.dim() {
                return Err(Error::Dimension(format!("coordinate {c} outside box of dim {}", self.dim())));
            }
        }
        ThetaBox::new(
            coords.iter().map(|&c| self.lower[c]).collect(),
            coords.iter().map(|&c| self.upper[c]).collect(),
        )
    }
}

/// Per-observation affine coefficients `(A_i, b_i)`.
pub type AffineExtractor = Arc<dyn Fn(&Dataset, usize) -> (DMatrix<f64>, DVector<f64>) + Send + Sync>;

/// Per-observation generic moment evaluation `m(X_i, theta)`.
pub type GenericMoment = Arc<dyn Fn(&Dataset, usize, &DVector<f64>) -> DVector<f64> + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Affine(AffineExtractor),
    Generic(GenericMoment),
}

/// Moment-inequality model of dimension p over a d-dimensional
/// parameter.
#[derive(Clone)]
pub struct MomentModel {
    p: usize,
    d: usize,
    required_columns: Vec<String>,
    kind: Kind,
}

impl fmt::Debug for MomentModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MomentModel")
            .field("p", &self.p)
            .field("d", &self.d)
            .field("kind", &match self.kind {
                Kind::Affine(_) => "affine",
                Kind::Generic(_) => "generic",
            })
            .field("required_columns", &self.required_columns)
            .finish()
    }
}

impl MomentModel {
    /// Builds an affine model from a coefficient extractor.
    pub fn affine(
        p: usize,
        d: usize,
        required_columns: &[&str],
        extract: AffineExtractor,
    ) -> Result<Self> {
        if p == 0 || d == 0 {
            return Err(Error::InvalidArgument("model needs p >= 1 and d >= 1".into()));
        }
        Ok(Self {
            p,
            d,
            required_columns: required_columns.iter().map(|s| s.to_string()).collect(),
            kind: Kind::Affine(extract),
        })
    }

    /// Builds a generic model from a per-observation callback.
    pub fn generic(
        p: usize,
        d: usize,
        required_columns: &[&str],
        eval: GenericMoment,
    ) -> Result<Self> {
        if p == 0 || d == 0 {
            return Err(Error::InvalidArgument("model needs p >= 1 and d >= 1".into()));
        }
        Ok(Self {
            p,
            d,
            required_columns: required_columns.iter().map(|s| s.to_string()).collect(),
            kind: Kind::Generic(eval),
        })
    }

    /// Number of moment inequalities.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Parameter dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Whether the model carries affine structure.
    pub fn is_affine(&self) -> bool {
        matches!(self.kind, Kind::Affine(_))
    }

    /// Dataset columns the model reads.
    pub fn required_columns(&self) -> &[String] {
        &self.required_columns
    }

    /// Checks that `data` carries every required column.
    pub fn check_columns(&self, data: &Dataset) -> Result<()> {
        for name in &self.required_columns {
            data.column_index(name)?;
        }
        Ok(())
    }

    /// `m(X_i, theta)` for observation `i`.
    pub fn moment_at(&self, data: &Dataset, i: usize, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_theta(theta)?;
        match &self.kind {
            Kind::Affine(extract) => {
                let (a, b) = extract(data, i);
                Ok(a * theta + b)
            }
            Kind::Generic(eval) => {
                let m = eval(data, i, theta);
                if m.len() != self.p {
                    return Err(Error::Dimension(format!(
                        "generic moment returned length {}, expected {}",
                        m.len(),
                        self.p
                    )));
                }
                Ok(m)
            }
        }
    }

    /// Per-observation affine coefficients, if the model is affine.
    pub fn affine_at(&self, data: &Dataset, i: usize) -> Option<(DMatrix<f64>, DVector<f64>)> {
        match &self.kind {
            Kind::Affine(extract) => Some(extract(data, i)),
            Kind::Generic(_) => None,
        }
    }

    /// Sample averages `(Abar, bbar)` of the affine coefficients.
    ///
    /// Errors for generic models; use [`MomentModel::sample_moment_mean`]
    /// there instead.
    pub fn averaged_coefficients(&self, data: &Dataset) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let Kind::Affine(extract) = &self.kind else {
            return Err(Error::InvalidArgument(
                "averaged coefficients require an affine model".into(),
            ));
        };
        self.check_columns(data)?;
        let n = data.n();
        let mut abar = DMatrix::zeros(self.p, self.d);
        let mut bbar = DVector::zeros(self.p);
        for i in 0..n {
            let (a, b) = extract(data, i);
            if a.nrows() != self.p || a.ncols() != self.d || b.len() != self.p {
                return Err(Error::Dimension(format!(
                    "extractor produced {}x{} and {} at row {i}, expected {}x{} and {}",
                    a.nrows(),
                    a.ncols(),
                    b.len(),
                    self.p,
                    self.d,
                    self.p
                )));
            }
            abar += a;
            bbar += b;
        }
        abar /= n as f64;
        bbar /= n as f64;
        Ok((abar, bbar))
    }

    /// Sample moment mean `mbar(theta) = (1/n) sum_i m(X_i, theta)`.
    pub fn sample_moment_mean(&self, data: &Dataset, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_theta(theta)?;
        self.check_columns(data)?;
        match &self.kind {
            Kind::Affine(_) => {
                let (abar, bbar) = self.averaged_coefficients(data)?;
                Ok(abar * theta + bbar)
            }
            Kind::Generic(_) => {
                let mut acc = DVector::zeros(self.p);
                for i in 0..data.n() {
                    acc += self.moment_at(data, i, theta)?;
                }
                Ok(acc / data.n() as f64)
            }
        }
    }

    fn check_theta(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.d {
            return Err(Error::Dimension(format!(
                "theta has length {}, model expects {}",
                theta.len(),
                self.d
            )));
        }
        Ok(())
    }
}

/// Interval-observed mean: scalar `theta` bounded by columns `y1 <= y2`,
/// `m = (y2 - theta, theta - y1)`, so p = 2, d = 1.
pub fn make_interval_mean_model() -> MomentModel {
    MomentModel::affine(
        2,
        1,
        &["y1", "y2"],
        Arc::new(|data: &Dataset, i: usize| {
            let y1 = data.value(i, data.column_index("y1").expect("checked"));
            let y2 = data.value(i, data.column_index("y2").expect("checked"));
            (
                DMatrix::from_column_slice(2, 1, &[-1.0, 1.0]),
                DVector::from_vec(vec![y2, -y1]),
            )
        }),
    )
    .expect("static dimensions are valid")
}

/// Mean with missing responses: columns `zy` (response times missingness
/// indicator) and `z` (indicator), `m = (theta - zy, zy - theta + 1 - z)`,
/// so p = 2, d = 1.
pub fn make_missing_data_model() -> MomentModel {
    MomentModel::affine(
        2,
        1,
        &["zy", "z"],
        Arc::new(|data: &Dataset, i: usize| {
            let zy = data.value(i, data.column_index("zy").expect("checked"));
            let z = data.value(i, data.column_index("z").expect("checked"));
            (
                DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
                DVector::from_vec(vec![-zy, zy + 1.0 - z]),
            )
        }),
    )
    .expect("static dimensions are valid")
}

/// Interval-observed regression with nonnegative instruments: columns
/// `z1..zL`, `x1..xK`, `y1`, `y2`. Rows `1..L` are
/// `z_l (y2 - x' theta)`, rows `L+1..2L` are `z_l (x' theta - y1)`,
/// so p = 2 L, d = K.
pub fn make_interval_regression_model(num_instruments: usize, num_regressors: usize) -> Result<MomentModel> {
    if num_instruments == 0 || num_regressors == 0 {
        return Err(Error::InvalidArgument(
            "interval regression needs at least one instrument and one regressor".into(),
        ));
    }
    let mut cols: Vec<String> = (1..=num_instruments).map(|l| format!("z{l}")).collect();
    cols.extend((1..=num_regressors).map(|k| format!("x{k}")));
    cols.push("y1".into());
    cols.push("y2".into());
    let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let (li, ki) = (num_instruments, num_regressors);
    MomentModel::affine(
        2 * li,
        ki,
        &col_refs,
        Arc::new(move |data: &Dataset, i: usize| {
            let z: Vec<f64> = (1..=li)
                .map(|l| data.value(i, data.column_index(&format!("z{l}")).expect("checked")))
                .collect();
            let x: Vec<f64> = (1..=ki)
                .map(|k| data.value(i, data.column_index(&format!("x{k}")).expect("checked")))
                .collect();
            let y1 = data.value(i, data.column_index("y1").expect("checked"));
            let y2 = data.value(i, data.column_index("y2").expect("checked"));
            let mut a = DMatrix::zeros(2 * li, ki);
            let mut b = DVector::zeros(2 * li);
            for l in 0..li {
                for k in 0..ki {
                    a[(l, k)] = -z[l] * x[k];
                    a[(li + l, k)] = z[l] * x[k];
                }
                b[l] = z[l] * y2;
                b[li + l] = -z[l] * y1;
            }
            (a, b)
        }),
    )
}

/// Population moment mean `E m(X, theta) = G theta + h` for an affine
/// model: the analytic counterpart of a sample's `(Abar, bbar)`. Used by
/// population oracles and region descriptions.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationMoments {
    g: DMatrix<f64>,
    h: DVector<f64>,
}

impl PopulationMoments {
    pub fn new(g: DMatrix<f64>, h: DVector<f64>) -> Result<Self> {
        if g.nrows() != h.len() || g.nrows() == 0 || g.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "population coefficients {}x{} with offset {}",
                g.nrows(),
                g.ncols(),
                h.len()
            )));
        }
        Ok(Self { g, h })
    }

    pub fn p(&self) -> usize {
        self.g.nrows()
    }

    pub fn d(&self) -> usize {
        self.g.ncols()
    }

    pub fn coefficients(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.g, &self.h)
    }

    /// `E m(X, theta)`.
    pub fn mean(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        if theta.len() != self.d() {
            return Err(Error::Dimension(format!(
                "theta has length {}, population model expects {}",
                theta.len(),
                self.d()
            )));
        }
        Ok(&self.g * theta + &self.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn interval_mean_example_values() {
        let data = Dataset::from_columns(&[("y1", vec![1.0]), ("y2", vec![3.0])]).unwrap();
        let model = make_interval_mean_model();
        let m = model.moment_at(&data, 0, &dvector![2.0]).unwrap();
        assert_eq!(m, dvector![1.0, 1.0]);
    }

    #[test]
    fn missing_data_example_values() {
        let data = Dataset::from_columns(&[("zy", vec![0.4]), ("z", vec![1.0])]).unwrap();
        let model = make_missing_data_model();
        let m = model.moment_at(&data, 0, &dvector![0.4]).unwrap();
        assert_relative_eq!(m[0], 0.0);
        assert_relative_eq!(m[1], 0.0);
        // An always-missing row: z = 0, zy = 0.
        let data = Dataset::from_columns(&[("zy", vec![0.0]), ("z", vec![0.0])]).unwrap();
        let m = model.moment_at(&data, 0, &dvector![0.5]).unwrap();
        assert_relative_eq!(m[0], 0.5);
        assert_relative_eq!(m[1], 0.5);
    }

    #[test]
    fn interval_regression_dimensions_and_orientation() {
        let model = make_interval_regression_model(2, 2).unwrap();
        assert_eq!(model.p(), 4);
        assert_eq!(model.d(), 2);
        let data = Dataset::from_columns(&[
            ("z1", vec![2.0]),
            ("z2", vec![1.0]),
            ("x1", vec![0.5]),
            ("x2", vec![1.0]),
            ("y1", vec![0.0]),
            ("y2", vec![1.0]),
        ])
        .unwrap();
        let theta = dvector![1.0, 0.25];
        // x' theta = 0.75; rows: z_l (y2 - x'theta) then z_l (x'theta - y1).
        let m = model.moment_at(&data, 0, &theta).unwrap();
        assert_relative_eq!(m[0], 2.0 * 0.25);
        assert_relative_eq!(m[1], 1.0 * 0.25);
        assert_relative_eq!(m[2], 2.0 * 0.75);
        assert_relative_eq!(m[3], 1.0 * 0.75);
    }

    #[test]
    fn affine_mean_matches_direct_loop() {
        // Superposition: mean of per-row evaluations equals Abar theta + bbar.
        let data = Dataset::from_columns(&[
            ("y1", vec![0.0, -0.5, 0.25, 0.1]),
            ("y2", vec![5.0, 4.5, 5.5, 4.9]),
        ])
        .unwrap();
        let model = make_interval_mean_model();
        let theta = dvector![1.75];
        let mean = model.sample_moment_mean(&data, &theta).unwrap();
        let mut acc = DVector::zeros(2);
        for i in 0..data.n() {
            acc += model.moment_at(&data, i, &theta).unwrap();
        }
        acc /= data.n() as f64;
        assert_relative_eq!((mean - acc).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn generic_model_matches_affine_counterpart() {
        let data = Dataset::from_columns(&[
            ("y1", vec![0.0, -0.5, 0.25]),
            ("y2", vec![5.0, 4.5, 5.5]),
        ])
        .unwrap();
        let affine = make_interval_mean_model();
        let generic = MomentModel::generic(
            2,
            1,
            &["y1", "y2"],
            Arc::new(|data: &Dataset, i, theta: &DVector<f64>| {
                let y1 = data.value(i, data.column_index("y1").unwrap());
                let y2 = data.value(i, data.column_index("y2").unwrap());
                dvector![y2 - theta[0], theta[0] - y1]
            }),
        )
        .unwrap();
        let theta = dvector![2.5];
        let a = affine.sample_moment_mean(&data, &theta).unwrap();
        let g = generic.sample_moment_mean(&data, &theta).unwrap();
        assert_relative_eq!((a - g).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn theta_box_basics() {
        let b = ThetaBox::new(vec![0.0, -1.0], vec![5.0, 1.0]).unwrap();
        assert_eq!(b.volume(), 10.0);
        assert!(b.contains(&dvector![0.0, 1.0]));
        assert!(!b.contains(&dvector![5.1, 0.0]));
        assert_eq!(b.clamp(&dvector![9.0, -3.0]), dvector![5.0, -1.0]);
        let r = b.restrict(&[1]).unwrap();
        assert_eq!(r.dim(), 1);
        assert_eq!(r.width(0), 2.0);
        assert!(ThetaBox::new(vec![1.0], vec![1.0]).is_err());
        assert!(ThetaBox::new(vec![f64::NEG_INFINITY], vec![0.0]).is_err());
    }

    #[test]
    fn population_moments_evaluate() {
        let pop = PopulationMoments::new(
            DMatrix::from_column_slice(2, 1, &[-1.0, 1.0]),
            dvector![5.0, 0.0],
        )
        .unwrap();
        assert_eq!(pop.mean(&dvector![2.0]).unwrap(), dvector![3.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let data = Dataset::from_columns(&[("y1", vec![0.0]), ("y2", vec![5.0])]).unwrap();
        let model = make_interval_mean_model();
        assert!(model.moment_at(&data, 0, &dvector![1.0, 2.0]).is_err());
    }
}
