//! Serialization helpers: complex numbers as `[re, im]` pairs.

use nalgebra::{DMatrix, DVector};
use serde::ser::{SerializeSeq, Serializer};

use crate::C64;

fn pair(z: &C64) -> [f64; 2] {
    [z.re, z.im]
}

/// A complex matrix as a list of rows of `[re, im]` pairs.
pub fn complex_matrix<S: Serializer>(m: &DMatrix<C64>, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<[f64; 2]> = (0..m.ncols()).map(|j| pair(&m[(i, j)])).collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

/// A complex vector as a list of `[re, im]` pairs.
pub fn complex_vector<S: Serializer>(v: &DVector<C64>, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v.iter() {
        seq.serialize_element(&pair(z))?;
    }
    seq.end()
}
