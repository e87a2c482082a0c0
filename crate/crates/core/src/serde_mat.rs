//! Row-major JSON encodings for nalgebra types.
//!
//! Matrices are written as arrays of rows, vectors as flat arrays.

use nalgebra::{DMatrix, DVector};
use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>], ncols_hint: usize) -> Result<DMatrix<f64>, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(ncols_hint, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged matrix rows".into());
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Shaped {
            rows: usize,
            cols: usize,
            data: Vec<Vec<f64>>,
        }
        Shaped {
            rows: m.nrows(),
            cols: m.ncols(),
            data: rows_of(m),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        #[derive(Deserialize)]
        struct Shaped {
            rows: usize,
            cols: usize,
            data: Vec<Vec<f64>>,
        }
        let sh = Shaped::deserialize(d)?;
        if sh.data.len() != sh.rows {
            return Err(D::Error::custom(format!(
                "matrix declares {} rows but has {}",
                sh.rows,
                sh.data.len()
            )));
        }
        let m = from_rows(&sh.data, sh.cols).map_err(D::Error::custom)?;
        if m.ncols() != sh.cols {
            return Err(D::Error::custom(format!(
                "matrix declares {} columns but has {}",
                sh.cols,
                m.ncols()
            )));
        }
        Ok(m)
    }
}

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

pub mod vectors {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[DVector<f64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DVector<f64>>, D::Error> {
        Ok(Vec::<Vec<f64>>::deserialize(d)?
            .into_iter()
            .map(DVector::from_vec)
            .collect())
    }
}
