use serde::{Deserialize, Serialize};

/// A fixed, ordered collection of named parameter tensors.
///
/// Every learnable model implements this so optimizers, checkpoints and
/// finite-difference checks can treat it as one flat vector.
pub trait Params {
    fn for_each(&self, f: &mut dyn FnMut(&str, &[usize], &[f64]));
    fn for_each_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.for_each(&mut |_, _, d| n += d.len());
        n
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.for_each(&mut |_, _, d| out.extend_from_slice(d));
        out
    }

    fn assign_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.for_each_mut(&mut |_, _, d| {
            d.copy_from_slice(&flat[offset..offset + d.len()]);
            offset += d.len();
        });
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    fn fill(&mut self, value: f64) {
        self.for_each_mut(&mut |_, _, d| d.iter_mut().for_each(|v| *v = value));
    }

    /// `self += k * other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, k: f64)
    where
        Self: Sized,
    {
        let flat = other.flatten();
        let mut offset = 0;
        self.for_each_mut(&mut |_, _, d| {
            for (v, o) in d.iter_mut().zip(&flat[offset..]) {
                *v += k * o;
            }
            offset += d.len();
        });
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(&mut |_, _, d| ok &= d.iter().all(|v| v.is_finite()));
        ok
    }

    fn squared_norm(&self) -> f64 {
        let mut s = 0.0;
        self.for_each(&mut |_, _, d| s += d.iter().map(|v| v * v).sum::<f64>());
        s
    }

    /// FNV-1a over names, shapes and raw bits; detects any change in value.
    fn fingerprint(&self) -> u64 {
        let mut h = Fnv::default();
        self.for_each(&mut |name, shape, d| {
            h.write(name.as_bytes());
            for s in shape {
                h.write(&(*s as u64).to_le_bytes());
            }
            for v in d {
                h.write(&v.to_bits().to_le_bytes());
            }
        });
        h.finish()
    }

    fn to_named(&self, prefix: &str) -> Vec<NamedTensor> {
        let mut out = Vec::new();
        self.for_each(&mut |name, shape, d| {
            out.push(NamedTensor {
                name: format!("{prefix}{name}"),
                shape: shape.to_vec(),
                data: d.to_vec(),
            })
        });
        out
    }

    /// Load tensors named `prefix + name` from `tensors`; every tensor must
    /// be present with a matching shape.
    fn load_named(&mut self, tensors: &[NamedTensor], prefix: &str) -> Result<(), String> {
        let mut err = None;
        self.for_each_mut(&mut |name, shape, d| {
            if err.is_some() {
                return;
            }
            let full = format!("{prefix}{name}");
            match tensors.iter().find(|t| t.name == full) {
                None => err = Some(format!("missing tensor {full}")),
                Some(t) if t.shape != shape || t.data.len() != d.len() => {
                    err = Some(format!("tensor {full}: shape {:?} in file, {:?} expected", t.shape, shape))
                }
                Some(t) => d.copy_from_slice(&t.data),
            }
        });
        err.map_or(Ok(()), Err)
    }
}

#[derive(Default)]
pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn write(&mut self, bytes: &[u8]) {
        if self.0 == 0 {
            self.0 = 0xcbf2_9ce4_8422_2325;
        }
        for b in bytes {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}
