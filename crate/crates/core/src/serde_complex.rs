//! Complex numbers on the wire as `{"re": .., "im": ..}` records.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct ReIm {
    re: f64,
    im: f64,
}

impl From<Complex64> for ReIm {
    fn from(c: Complex64) -> Self {
        ReIm { re: c.re, im: c.im }
    }
}

pub fn serialize<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    ReIm::from(*c).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
    let v = ReIm::deserialize(d)?;
    Ok(Complex64::new(v.re, v.im))
}

pub mod vec {
    use super::ReIm;
    use num_complex::Complex64;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for c in v {
            seq.serialize_element(&ReIm::from(*c))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let v = Vec::<ReIm>::deserialize(d)?;
        Ok(v.into_iter().map(|c| Complex64::new(c.re, c.im)).collect())
    }
}

/// Row-major nested arrays for dense complex matrices.
pub mod matrix {
    use super::ReIm;
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<ReIm>> = (0..m.nrows())
            .map(|i| m.row(i).iter().map(|c| ReIm::from(*c)).collect())
            .collect();
        s.collect_seq(rows)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<Complex64>, D::Error> {
        let rows = Vec::<Vec<ReIm>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| {
            Complex64::new(rows[i][j].re, rows[i][j].im)
        }))
    }
}
