use super::{TfMatrix, TfScale};
use crate::error::{Error, Result};

pub const DEFAULT_FLOOR_DB: f64 = -80.0;
pub const DB_EPSILON: f64 = 1e-10;

/// `20 log10(max(m, eps) / reference)`, clamped below at `floor_db`.
pub fn magnitude_to_db(tf: &TfMatrix, reference: f64, floor_db: f64) -> Result<TfMatrix> {
    if !(reference > 0.0) {
        return Err(Error::invalid(format!("dB reference {reference} must be positive")));
    }
    if tf.scale != TfScale::Magnitude {
        return Err(Error::invalid(format!(
            "dB conversion expects a magnitude matrix, got {:?}",
            tf.scale
        )));
    }
    let values = tf
        .values
        .mapv(|m| (20.0 * ((m as f64).max(DB_EPSILON) / reference).log10()).max(floor_db) as f32);
    Ok(TfMatrix {
        scale: TfScale::Decibel,
        values,
        ..tf.clone()
    })
}

/// dB with the matrix maximum as reference, so the loudest cell is 0 dB.
pub fn magnitude_to_db_max_ref(tf: &TfMatrix, floor_db: f64) -> Result<TfMatrix> {
    let peak = tf.values.iter().fold(0.0f64, |a, &v| a.max(v as f64));
    magnitude_to_db(tf, peak.max(DB_EPSILON), floor_db)
}

/// Maps values affinely onto `[0, 1]`; a constant matrix maps to 0.5.
pub fn minmax_normalize(tf: &TfMatrix) -> TfMatrix {
    let (lo, hi) = tf
        .values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let values = if hi > lo {
        let (lo, span) = (lo as f64, hi as f64 - lo as f64);
        tf.values.mapv(|v| ((v as f64 - lo) / span) as f32)
    } else {
        tf.values.mapv(|_| 0.5)
    };
    TfMatrix {
        scale: TfScale::Normalized,
        values,
        ..tf.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::TfKind;
    use ndarray::{arr2, Array2};
    use proptest::prelude::*;

    fn mag(values: Array2<f32>) -> TfMatrix {
        let rows = values.nrows();
        TfMatrix::new(TfKind::Cqt, TfScale::Magnitude, values, vec![1.0; rows], 100.0).unwrap()
    }

    #[test]
    fn db_fixed_points() {
        let m = mag(arr2(&[[2.0, 20.0, 0.0]]));
        let db = magnitude_to_db(&m, 2.0, DEFAULT_FLOOR_DB).unwrap();
        assert_eq!(db.values[[0, 0]], 0.0);
        assert!((db.values[[0, 1]] - 20.0).abs() < 1e-5);
        assert_eq!(db.values[[0, 2]], -80.0);
        assert_eq!(db.scale, TfScale::Decibel);
        assert!(magnitude_to_db(&m, 0.0, -80.0).is_err());
        assert!(magnitude_to_db(&db, 1.0, -80.0).is_err());
    }

    #[test]
    fn normalize_endpoints_and_constant() {
        let mut m = mag(arr2(&[[-80.0, -40.0, 0.0]]));
        m.scale = TfScale::Decibel;
        let n = minmax_normalize(&m);
        assert_eq!(n.values.row(0).to_vec(), vec![0.0, 0.5, 1.0]);
        let c = minmax_normalize(&mag(Array2::from_elem((2, 2), 3.0)));
        assert!(c.values.iter().all(|&v| v == 0.5));
    }

    proptest! {
        #[test]
        fn db_is_monotone(a in 0.0f32..100.0, b in 0.0f32..100.0) {
            let m = mag(arr2(&[[a.min(b), a.max(b)]]));
            let db = magnitude_to_db(&m, 1.0, DEFAULT_FLOOR_DB).unwrap();
            prop_assert!(db.values[[0, 0]] <= db.values[[0, 1]]);
        }

        #[test]
        fn normalize_preserves_order(v in prop::collection::vec(-100.0f32..100.0, 2..40)) {
            let n = v.len();
            let m = mag(Array2::from_shape_vec((1, n), v.clone()).unwrap());
            let out = minmax_normalize(&m);
            for i in 0..n {
                for j in 0..n {
                    if v[i] < v[j] {
                        prop_assert!(out.values[[0, i]] <= out.values[[0, j]]);
                    }
                }
                prop_assert!((0.0..=1.0).contains(&out.values[[0, i]]));
            }
        }
    }
}
