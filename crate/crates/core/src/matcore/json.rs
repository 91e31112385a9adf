use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Complex, ComplexMatrix};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Pair([f64; 2]),
    Real(f64),
}

#[derive(Serialize, Deserialize)]
struct Wire {
    rows: usize,
    cols: usize,
    data: Vec<Entry>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Wire {
            rows: self.rows(),
            cols: self.cols(),
            data: self.data().iter().map(|z| Entry::Pair([z.re, z.im])).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = Wire::deserialize(d)?;
        let data = w
            .data
            .into_iter()
            .map(|e| match e {
                Entry::Pair([re, im]) => Complex::new(re, im),
                Entry::Real(re) => Complex::new(re, 0.0),
            })
            .collect();
        ComplexMatrix::new(w.rows, w.cols, data).map_err(D::Error::custom)
    }
}
