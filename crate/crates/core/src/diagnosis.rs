//! Reconstruction-based contributions (RBC) of single sensors to the T² and
//! SPE indices.
//!
//! Both indices are quadratic forms `yᵀ Φ y`. Reconstructing `y` along a
//! unit direction `φ` removes `f = (φᵀΦφ)⁻¹ φᵀΦy` of it; the resulting drop
//! in the index is the contribution of that direction. Directions are the
//! sensor axes `e_k`, giving `RBC_k = (e_kᵀ Φ y)² / Φ_kk`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Directions with `φᵀΦφ` at or below this are undiagnosable.
pub const DIAGNOSABLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    T2,
    Spe,
}

impl std::fmt::Display for IndexKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IndexKind::T2 => "t2",
            IndexKind::Spe => "spe",
        })
    }
}

impl std::str::FromStr for IndexKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t2" => Ok(IndexKind::T2),
            "spe" => Ok(IndexKind::Spe),
            other => Err(Error::invalid(format!("unknown index {other:?}, expected t2 or spe"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexMatrix {
    pub phi_mat: DMatrix<f64>,
    pub kind: IndexKind,
}

impl IndexMatrix {
    /// `yᵀ Φ y`.
    pub fn index(&self, y: &DVector<f64>) -> Result<f64> {
        self.check(y)?;
        Ok(y.dot(&(&self.phi_mat * y)))
    }

    pub fn n_sensors(&self) -> usize {
        self.phi_mat.nrows()
    }

    fn check(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.n_sensors() {
            return Err(Error::dim(format!(
                "vector of length {} for an index over {} sensors",
                y.len(),
                self.n_sensors()
            )));
        }
        Ok(())
    }
}

/// `Φ = P dg(λ) Pᵀ` for T² and `I − P Pᵀ` for SPE.
pub fn build_index_matrix(loading: &DMatrix<f64>, lambda_diag: &[f64], kind: IndexKind) -> Result<IndexMatrix> {
    let (m, r) = loading.shape();
    let mut phi_mat = match kind {
        IndexKind::T2 => {
            if lambda_diag.len() != r {
                return Err(Error::dim(format!("{} weights for a rank-{r} loading", lambda_diag.len())));
            }
            let mut scaled = loading.clone();
            for (j, l) in lambda_diag.iter().enumerate() {
                scaled.column_mut(j).scale_mut(*l);
            }
            scaled * loading.transpose()
        }
        IndexKind::Spe => DMatrix::identity(m, m) - loading * loading.transpose(),
    };
    crate::linalg::symmetrize(&mut phi_mat);
    Ok(IndexMatrix { phi_mat, kind })
}

/// Fault magnitude `f` along the unit direction and the reconstruction
/// `ψ = y − f φ`.
pub fn fault_magnitude(y: &DVector<f64>, phi: &IndexMatrix, direction: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    phi.check(y)?;
    phi.check(direction)?;
    let phi_dir = &phi.phi_mat * direction;
    let denom = direction.dot(&phi_dir);
    if denom <= DIAGNOSABLE_TOL {
        return Err(Error::Undiagnosable);
    }
    let f = phi_dir.dot(y) / denom;
    Ok((f, y - direction * f))
}

/// Contribution of sensor `k` (0-based).
pub fn rbc(y: &DVector<f64>, phi: &IndexMatrix, k: usize) -> Result<f64> {
    phi.check(y)?;
    if k >= phi.n_sensors() {
        return Err(Error::invalid(format!("sensor {k} out of range")));
    }
    let diag = phi.phi_mat[(k, k)];
    if diag <= DIAGNOSABLE_TOL {
        return Err(Error::Undiagnosable);
    }
    let proj = phi.phi_mat.row(k).dot(&y.transpose());
    Ok(proj * proj / diag)
}

/// Contributions of every sensor at every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RbcMap {
    /// Samples × sensors; `NaN` in undiagnosable columns.
    pub values: DMatrix<f64>,
    pub kind: IndexKind,
    pub tags: Vec<String>,
    pub undiagnosable: Vec<bool>,
}

impl RbcMap {
    /// Sensor with the largest contribution at a sample, ignoring
    /// undiagnosable columns.
    pub fn dominant(&self, sample: usize) -> Option<usize> {
        let row = self.values.row(sample);
        (0..row.len())
            .filter(|&k| !self.undiagnosable[k])
            .max_by(|&a, &b| row[a].total_cmp(&row[b]))
    }

    /// Header `sample_index` plus tags; undiagnosable cells are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        let mut header = vec!["sample_index".to_string()];
        header.extend(self.tags.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.values.nrows() {
            let mut row = vec![(i + 1).to_string()];
            for k in 0..self.values.ncols() {
                row.push(if self.undiagnosable[k] {
                    String::new()
                } else {
                    self.values[(i, k)].to_string()
                });
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

pub fn rbc_map(y_test: &DataMatrix, loading: &DMatrix<f64>, lambda_diag: &[f64], kind: IndexKind) -> Result<RbcMap> {
    if y_test.n_sensors() != loading.nrows() {
        return Err(Error::dim(format!(
            "data has {} sensors, loading has {}",
            y_test.n_sensors(),
            loading.nrows()
        )));
    }
    let phi = build_index_matrix(loading, lambda_diag, kind)?;
    let m = phi.n_sensors();
    let undiagnosable: Vec<bool> = (0..m).map(|k| phi.phi_mat[(k, k)] <= DIAGNOSABLE_TOL).collect();
    let n = y_test.n_samples();
    let mut values = DMatrix::from_element(n, m, f64::NAN);
    for i in 0..n {
        let y = y_test.sample(i);
        for k in (0..m).filter(|&k| !undiagnosable[k]) {
            values[(i, k)] = rbc(&y, &phi, k)?;
        }
    }
    Ok(RbcMap {
        values,
        kind,
        tags: y_test.tags().to_vec(),
        undiagnosable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormalize;
    use crate::monitor::{t2_statistic, MonitorProfile};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normal_vec(m: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_fn(m, |_, _| rng.sample(StandardNormal))
    }

    fn random_loading(m: usize, r: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        orthonormalize(&DMatrix::from_fn(m, r, |_, _| rng.sample(StandardNormal)))
    }

    fn unit(m: usize, k: usize) -> DVector<f64> {
        let mut e = DVector::zeros(m);
        e[k] = 1.0;
        e
    }

    fn golden_section(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - ratio * (b - a);
            let d = a + ratio * (b - a);
            if g(c) < g(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn full_basis_spe_matrix_is_zero() {
        let p = random_loading(4, 4, 1);
        let phi = build_index_matrix(&p, &[], IndexKind::Spe).unwrap();
        assert!(phi.phi_mat.amax() < 1e-12);
    }

    #[test]
    fn rank_one_t2_plug_in() {
        let p = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let phi = build_index_matrix(&p, &[2.0], IndexKind::T2).unwrap();
        let mut expected = DMatrix::zeros(3, 3);
        expected[(0, 0)] = 2.0;
        assert_eq!(phi.phi_mat, expected);
        assert!(build_index_matrix(&p, &[2.0, 1.0], IndexKind::T2).is_err());
    }

    #[test]
    fn t2_index_matches_monitoring_statistic() {
        let p = random_loading(7, 3, 2);
        let lam = vec![0.5, 1.5, 3.0];
        let phi = build_index_matrix(&p, &lam, IndexKind::T2).unwrap();
        let profile = MonitorProfile {
            lambda_diag: lam,
            t2_limit: 1.0,
            spe_limit: 1.0,
            alpha: 0.95,
            bandwidth_t2: 1.0,
            bandwidth_spe: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let y = normal_vec(7, &mut rng);
            let direct = t2_statistic(&p.tr_mul(&y), &profile).unwrap();
            assert!((phi.index(&y).unwrap() - direct).abs() < 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn index_matrices_are_symmetric_psd() {
        let p = random_loading(9, 4, 4);
        for kind in [IndexKind::T2, IndexKind::Spe] {
            let phi = build_index_matrix(&p, &[1.0, 2.0, 0.5, 4.0], kind).unwrap();
            assert!((&phi.phi_mat - phi.phi_mat.transpose()).amax() < 1e-10);
            assert!(crate::linalg::min_eigenvalue(&phi.phi_mat) >= -1e-10);
        }
    }

    #[test]
    fn exact_fault_is_reconstructed() {
        let p = random_loading(6, 2, 5);
        let phi = build_index_matrix(&p, &[], IndexKind::Spe).unwrap();
        let dir = unit(6, 2);
        let (f, psi) = fault_magnitude(&(&dir * 3.5), &phi, &dir).unwrap();
        assert!((f - 3.5).abs() < 1e-12);
        assert!(psi.amax() < 1e-12);
    }

    #[test]
    fn orthogonal_sample_has_zero_magnitude() {
        let p = random_loading(6, 2, 6);
        let phi = build_index_matrix(&p, &[1.0, 2.0], IndexKind::T2).unwrap();
        let dir = unit(6, 0);
        let phi_dir = &phi.phi_mat * &dir;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y = normal_vec(6, &mut rng);
        let y_perp = &y - &phi_dir * (phi_dir.dot(&y) / phi_dir.norm_squared());
        let (f, _) = fault_magnitude(&y_perp, &phi, &dir).unwrap();
        assert!(f.abs() < 1e-12);
    }

    #[test]
    fn magnitude_minimizes_the_reconstructed_index() {
        let p = random_loading(8, 3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in [IndexKind::T2, IndexKind::Spe] {
            let phi = build_index_matrix(&p, &[0.7, 1.3, 2.2], kind).unwrap();
            for _ in 0..20 {
                let y = normal_vec(8, &mut rng) * 3.0;
                let dir = normal_vec(8, &mut rng).normalize();
                let (f, _) = fault_magnitude(&y, &phi, &dir).unwrap();
                let g = |s: f64| phi.index(&(&y - &dir * s)).unwrap();
                let oracle = golden_section(g, -100.0, 100.0);
                assert!((f - oracle).abs() < 1e-6, "{kind}: {f} vs {oracle}");
            }
        }
    }

    #[test]
    fn null_space_direction_is_undiagnosable() {
        let p = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let spe = build_index_matrix(&p, &[], IndexKind::Spe).unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(fault_magnitude(&y, &spe, &unit(3, 0)), Err(Error::Undiagnosable)));
        assert!(matches!(rbc(&y, &spe, 0), Err(Error::Undiagnosable)));
        assert!(rbc(&y, &spe, 1).is_ok());
        assert!(rbc(&y, &spe, 3).is_err());
    }

    #[test]
    fn zero_sample_contributes_nothing() {
        let p = random_loading(5, 2, 10);
        for kind in [IndexKind::T2, IndexKind::Spe] {
            let phi = build_index_matrix(&p, &[1.0, 1.0], kind).unwrap();
            for k in 0..5 {
                assert_eq!(rbc(&DVector::zeros(5), &phi, k).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn map_matches_pointwise_contributions() {
        let p = random_loading(6, 2, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let y = DataMatrix::from_values(DMatrix::from_fn(6, 20, |_, _| rng.sample(StandardNormal))).unwrap();
        for kind in [IndexKind::T2, IndexKind::Spe] {
            let lam = [0.5, 2.0];
            let map = rbc_map(&y, &p, &lam, kind).unwrap();
            let phi = build_index_matrix(&p, &lam, kind).unwrap();
            assert_eq!(map.values.shape(), (20, 6));
            for i in 0..20 {
                for k in 0..6 {
                    assert_eq!(map.values[(i, k)], rbc(&y.sample(i), &phi, k).unwrap());
                }
            }
        }
        let zeros = DataMatrix::from_values(DMatrix::zeros(6, 4)).unwrap();
        let map = rbc_map(&zeros, &p, &[1.0, 1.0], IndexKind::Spe).unwrap();
        assert!(map.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn map_flags_undiagnosable_sensors() {
        let p = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let y = DataMatrix::from_values(DMatrix::from_element(3, 2, 1.0)).unwrap();
        let map = rbc_map(&y, &p, &[], IndexKind::Spe).unwrap();
        assert_eq!(map.undiagnosable, vec![true, false, false]);
        assert!(map.values[(0, 0)].is_nan());
        assert_ne!(map.dominant(0), Some(0));
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "sample_index,x1,x2,x3");
        assert!(text.lines().nth(1).unwrap().starts_with("1,,"));
    }

    #[test]
    fn kind_parses_and_prints() {
        assert_eq!("T2".parse::<IndexKind>().unwrap(), IndexKind::T2);
        assert_eq!("spe".parse::<IndexKind>().unwrap(), IndexKind::Spe);
        assert!("q".parse::<IndexKind>().is_err());
        assert_eq!(IndexKind::Spe.to_string(), "spe");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn decomposition_identity(seed in 0u64..100_000, spe in any::<bool>()) {
            let p = random_loading(7, 3, seed);
            let kind = if spe { IndexKind::Spe } else { IndexKind::T2 };
            let phi = build_index_matrix(&p, &[0.3, 1.0, 2.5], kind).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let y = normal_vec(7, &mut rng) * 4.0;
            let total = phi.index(&y).unwrap();
            for k in 0..7 {
                let contribution = rbc(&y, &phi, k).unwrap();
                let (_, psi) = fault_magnitude(&y, &phi, &unit(7, k)).unwrap();
                let rest = phi.index(&psi).unwrap();
                prop_assert!(contribution >= 0.0);
                prop_assert!((rest + contribution - total).abs() <= 1e-10 * total.max(1.0));
            }
        }

        #[test]
        fn contributions_scale_quadratically(seed in 0u64..100_000, exp in -8i32..8) {
            let p = random_loading(6, 2, seed);
            let phi = build_index_matrix(&p, &[1.0, 3.0], IndexKind::T2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let y = normal_vec(6, &mut rng);
            let c = 2f64.powi(exp);
            for k in 0..6 {
                prop_assert_eq!(rbc(&(&y * c), &phi, k).unwrap(), c * c * rbc(&y, &phi, k).unwrap());
            }
        }

        #[test]
        fn large_spe_fault_points_at_its_sensor(seed in 0u64..100_000, k in 0usize..10, f in 6.0f64..30.0) {
            let p = random_loading(10, 3, seed);
            let phi = build_index_matrix(&p, &[], IndexKind::Spe).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
            let y = &p * normal_vec(3, &mut rng) + unit(10, k) * f;
            let best = (0..10)
                .max_by(|&a, &b| rbc(&y, &phi, a).unwrap().total_cmp(&rbc(&y, &phi, b).unwrap()))
                .unwrap();
            prop_assert_eq!(best, k);
        }
    }
}
