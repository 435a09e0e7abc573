//! Unscrambled Sobol sampling of design decisions within box bounds.
//!
//! Direction numbers are the first rows of the new-joe-kuo-6.21201 table, so
//! the unit-cube sequence matches other unscrambled implementations that use
//! the same table (index 0 is the all-zeros point).

use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SamplingError {
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("Sobol dimension must be in 1..={MAX_DIM}, got {0}")]
    UnsupportedDimension(usize),
    #[error("sample power must be in 1..=31, got {0}")]
    InvalidPower(u32),
    #[error("sequence index {0} exceeds 2^32 - 1")]
    IndexOverflow(u64),
    #[error("decision names do not match sample dimension")]
    NameMismatch,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Largest supported dimension.
pub const MAX_DIM: usize = 12;

const BITS: usize = 32;

/// (degree, interior polynomial coefficients, initial direction numbers)
const JOE_KUO: [(u32, u32, &[u32]); MAX_DIM - 1] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
];

/// Per-axis box `lower <= theta <= upper` in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SamplingError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(SamplingError::InvalidBounds(format!(
                "lower has {} entries, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (k, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(SamplingError::InvalidBounds(format!(
                    "axis {k} is not finite"
                )));
            }
            if l >= u {
                return Err(SamplingError::InvalidBounds(format!(
                    "axis {k}: lower {l} is not below upper {u}"
                )));
            }
        }
        Ok(Bounds { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Bounds {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Maps a unit-cube point into the box.
    pub fn scale(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(t, (l, h))| (l + t * (h - l)).min(*h))
            .collect()
    }

    pub fn normalization(&self) -> crate::geometry::Normalization {
        crate::geometry::Normalization {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }
}

/// Random-access unscrambled Sobol sequence on the unit cube.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    directions: Vec<[u32; BITS]>,
}

impl SobolSequence {
    pub fn new(dim: usize) -> Result<Self, SamplingError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(SamplingError::UnsupportedDimension(dim));
        }
        let mut directions = Vec::with_capacity(dim);
        let mut first = [0u32; BITS];
        for (i, v) in first.iter_mut().enumerate() {
            *v = 1 << (BITS - 1 - i);
        }
        directions.push(first);
        for &(s, a, m) in JOE_KUO.iter().take(dim - 1) {
            let s = s as usize;
            let mut v = [0u32; BITS];
            for i in 0..s {
                v[i] = m[i] << (BITS - 1 - i);
            }
            for i in s..BITS {
                v[i] = v[i - s] ^ (v[i - s] >> s);
                for k in 1..s {
                    if (a >> (s - 1 - k)) & 1 == 1 {
                        v[i] ^= v[i - k];
                    }
                }
            }
            directions.push(v);
        }
        Ok(SobolSequence { directions })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// The `index`-th point of the sequence (Gray-code order).
    pub fn point(&self, index: u64) -> Result<Vec<f64>, SamplingError> {
        if index > u32::MAX as u64 {
            return Err(SamplingError::IndexOverflow(index));
        }
        let gray = (index ^ (index >> 1)) as u32;
        Ok(self
            .directions
            .iter()
            .map(|v| {
                let mut x = 0u32;
                let mut g = gray;
                let mut bit = 0;
                while g != 0 {
                    if g & 1 == 1 {
                        x ^= v[bit];
                    }
                    g >>= 1;
                    bit += 1;
                }
                x as f64 / 4294967296.0
            })
            .collect())
    }

    /// `count` consecutive points starting at `start`.
    pub fn points(&self, start: u64, count: usize) -> Result<Vec<Vec<f64>>, SamplingError> {
        (start..start + count as u64)
            .map(|i| self.point(i))
            .collect()
    }
}

/// A batch of `2^sp` decision vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub inputs: Vec<Vec<f64>>,
    pub sp: u32,
    /// Number of leading sequence points skipped.
    pub skip: u64,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Writes a header naming each decision, then one row per sample.
    pub fn write_csv<W: Write>(&self, names: &[String], out: W) -> Result<(), SamplingError> {
        if self.inputs.first().is_some_and(|r| r.len() != names.len()) {
            return Err(SamplingError::NameMismatch);
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(names)?;
        for row in &self.inputs {
            w.write_record(row.iter().map(|x| format!("{x:?}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `2^sp` Sobol points scaled into `bounds`, starting with the all-zeros
/// point (mapped to the lower bound).
pub fn sobol(dim: usize, bounds: &Bounds, sp: u32) -> Result<SampleBatch, SamplingError> {
    sobol_with_skip(dim, bounds, sp, 0)
}

/// Like [`sobol`] but discards the first `skip` sequence points.
pub fn sobol_with_skip(
    dim: usize,
    bounds: &Bounds,
    sp: u32,
    skip: u64,
) -> Result<SampleBatch, SamplingError> {
    if sp == 0 || sp > 31 {
        return Err(SamplingError::InvalidPower(sp));
    }
    let inputs = sobol_range(dim, bounds, skip, 1usize << sp)?;
    Ok(SampleBatch { inputs, sp, skip })
}

/// `count` scaled Sobol points from sequence index `start` onwards.
pub fn sobol_range(
    dim: usize,
    bounds: &Bounds,
    start: u64,
    count: usize,
) -> Result<Vec<Vec<f64>>, SamplingError> {
    if bounds.dim() != dim {
        return Err(SamplingError::InvalidBounds(format!(
            "bounds have dimension {}, requested {dim}",
            bounds.dim()
        )));
    }
    let seq = SobolSequence::new(dim)?;
    Ok(seq
        .points(start, count)?
        .iter()
        .map(|u| bounds.scale(u))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_points_in_three_dimensions() {
        let b = sobol(3, &Bounds::unit(3), 3).unwrap();
        let expected = [
            [0.0, 0.0, 0.0],
            [0.5, 0.5, 0.5],
            [0.75, 0.25, 0.25],
            [0.25, 0.75, 0.75],
            [0.375, 0.375, 0.625],
            [0.875, 0.875, 0.125],
            [0.625, 0.125, 0.875],
            [0.125, 0.625, 0.375],
        ];
        assert_eq!(b.len(), 8);
        for (row, e) in b.inputs.iter().zip(expected) {
            assert_eq!(row.as_slice(), e.as_slice());
        }
    }

    #[test]
    fn matches_reference_rows_in_twelve_dimensions() {
        // rows 517, 1000 and 1023 of an independent unscrambled generator
        let seq = SobolSequence::new(12).unwrap();
        let r517 = [
            0.8779296875,
            0.6259765625,
            0.8291015625,
            0.6162109375,
            0.5830078125,
            0.1904296875,
            0.4892578125,
            0.5341796875,
            0.0029296875,
            0.7900390625,
            0.6025390625,
            0.2412109375,
        ];
        let r1000 = [
            0.2197265625,
            0.0966796875,
            0.5185546875,
            0.6767578125,
            0.2802734375,
            0.9072265625,
            0.0458984375,
            0.8994140625,
            0.5009765625,
            0.0693359375,
            0.0849609375,
            0.2548828125,
        ];
        let r1023 = [
            0.0009765625,
            0.7529296875,
            0.6123046875,
            0.1455078125,
            0.1865234375,
            0.4384765625,
            0.1396484375,
            0.6181640625,
            0.3447265625,
            0.8505859375,
            0.6787109375,
            0.0361328125,
        ];
        assert_eq!(seq.point(517).unwrap(), r517.to_vec());
        assert_eq!(seq.point(1000).unwrap(), r1000.to_vec());
        assert_eq!(seq.point(1023).unwrap(), r1023.to_vec());
    }

    #[test]
    fn scaling_doubles_coordinates() {
        let a = sobol(3, &Bounds::unit(3), 6).unwrap();
        let b = sobol(3, &Bounds::new(vec![0.0; 3], vec![2.0; 3]).unwrap(), 6).unwrap();
        for (x, y) in a.inputs.iter().zip(&b.inputs) {
            for (p, q) in x.iter().zip(y) {
                assert_eq!(2.0 * p, *q);
            }
        }
    }

    #[test]
    fn invalid_bounds_rejected() {
        assert!(Bounds::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(Bounds::new(vec![0.0], vec![f64::INFINITY]).is_err());
        assert!(Bounds::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(matches!(
            sobol(2, &Bounds::unit(3), 4),
            Err(SamplingError::InvalidBounds(_))
        ));
        assert!(matches!(
            sobol(3, &Bounds::unit(3), 0),
            Err(SamplingError::InvalidPower(0))
        ));
    }

    #[test]
    fn skip_drops_leading_points() {
        let b = Bounds::unit(2);
        let full = sobol(2, &b, 4).unwrap();
        let skipped = sobol_with_skip(2, &b, 3, 1).unwrap();
        assert_eq!(skipped.inputs[..], full.inputs[1..9]);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let b = sobol(2, &Bounds::unit(2), 2).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&["a".into(), "b".into()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("a,b"));
        assert_eq!(text.lines().count(), 5);
        assert!(b.write_csv(&["a".into()], Vec::new()).is_err());
    }

    /// Max local discrepancy over random anchored boxes.
    fn box_discrepancy(pts: &[Vec<f64>], boxes: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = pts.len() as f64;
        let mut worst: f64 = 0.0;
        for _ in 0..boxes {
            let corner: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            let vol: f64 = corner.iter().product();
            let inside = pts
                .iter()
                .filter(|p| p.iter().zip(&corner).all(|(x, c)| x < c))
                .count() as f64;
            worst = worst.max((inside / n - vol).abs());
        }
        worst
    }

    #[test]
    fn lower_discrepancy_than_pseudorandom() {
        let s = sobol(3, &Bounds::unit(3), 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r: Vec<Vec<f64>> = (0..4096)
            .map(|_| (0..3).map(|_| rng.gen()).collect())
            .collect();
        let ds = box_discrepancy(&s.inputs, 1000, 3);
        let dr = box_discrepancy(&r, 1000, 3);
        assert!(ds < dr, "sobol {ds} vs random {dr}");
    }

    proptest::proptest! {
        #[test]
        fn batches_nest_and_stay_in_bounds(sp in 1u32..10, skip in 0u64..3, lo in -5.0f64..5.0, w in 0.1f64..10.0) {
            let b = Bounds::new(vec![lo; 3], vec![lo + w; 3]).unwrap();
            let small = sobol_with_skip(3, &b, sp, skip).unwrap();
            let big = sobol_with_skip(3, &b, sp + 1, skip).unwrap();
            proptest::prop_assert_eq!(&big.inputs[..small.len()], &small.inputs[..]);
            proptest::prop_assert!(big.inputs.iter().all(|x| b.contains(x)));
        }
    }
}
