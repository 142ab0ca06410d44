//! Seeded random fields, pairs and normal contractions.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::forms::LocalityStructure;
use crate::space::{meet_join, Field, MeasureSpace, NormalContraction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Gaussian,
    /// Two-sided exponential.
    Laplace,
    /// Mostly zero with a few large entries.
    Spikes,
    PiecewiseConstant,
}

const PROFILES: [Profile; 4] = [
    Profile::Gaussian,
    Profile::Laplace,
    Profile::Spikes,
    Profile::PiecewiseConstant,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    Independent,
    /// `u ≥ v` pointwise.
    Ordered,
    DisjointSupport,
}

pub struct Sampler {
    rng: ChaCha8Rng,
    size: usize,
}

impl Sampler {
    pub fn new(size: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            size,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    /// Weights drawn log-uniformly from `[1/4, 4]`.
    pub fn weights(&mut self) -> MeasureSpace {
        let w = (0..self.size)
            .map(|_| 4f64.powf(self.rng.random_range(-1.0..1.0)))
            .collect();
        MeasureSpace::new(w).expect("positive weights")
    }

    pub fn field_of(&mut self, profile: Profile) -> Field {
        let n = self.size;
        let amp = 2f64.powf(self.rng.random_range(-2.0..2.0));
        let values: Vec<f64> = match profile {
            Profile::Gaussian => (0..n)
                .map(|_| amp * self.rng.sample::<f64, _>(StandardNormal))
                .collect(),
            Profile::Laplace => (0..n)
                .map(|_| {
                    let e: f64 = self.rng.sample(Exp1);
                    if self.rng.random_bool(0.5) {
                        amp * e
                    } else {
                        -amp * e
                    }
                })
                .collect(),
            Profile::Spikes => {
                let mut v = vec![0.0; n];
                let count = self.rng.random_range(1..=n.clamp(1, 3));
                for _ in 0..count {
                    let i = self.rng.random_range(0..n);
                    v[i] = amp * 4.0 * self.rng.random_range(-1.0..1.0);
                }
                v
            }
            Profile::PiecewiseConstant => {
                let mut v = Vec::with_capacity(n);
                let mut level = amp * self.rng.random_range(-1.0..1.0);
                for _ in 0..n {
                    if self.rng.random_bool(0.3) {
                        level = amp * self.rng.random_range(-1.0..1.0);
                    }
                    v.push(level);
                }
                v
            }
        };
        Field::from(values)
    }

    /// A field from a profile chosen uniformly at random.
    pub fn field(&mut self) -> Field {
        let p = *PROFILES.choose(&mut self.rng).unwrap();
        self.field_of(p)
    }

    /// A nonzero field.
    pub fn nonzero_field(&mut self) -> Field {
        loop {
            let u = self.field();
            if u.sup_norm() > 0.0 {
                return u;
            }
        }
    }

    /// A pair with `u ≥ v`.
    pub fn ordered_pair(&mut self) -> (Field, Field) {
        let a = self.field();
        let b = self.field();
        let (lo, hi) = meet_join(&a, &b).expect("same length");
        (hi, lo)
    }

    /// A pair whose supports are disjoint: `u` vanishes on the closed
    /// neighbourhood of `supp(v)` with respect to `structure`. Returns `None`
    /// when every point is coupled to every other.
    pub fn disjoint_pair(&mut self, structure: &LocalityStructure) -> Option<(Field, Field)> {
        self.separated_pair(structure, 0.0)
    }

    /// Like [`Sampler::disjoint_pair`] but `u` equals a random constant on the
    /// closed neighbourhood of `supp(v)` instead of zero.
    pub fn constant_on_support_pair(&mut self, structure: &LocalityStructure) -> Option<(Field, Field)> {
        let c = self.rng.random_range(-2.0..2.0);
        self.separated_pair(structure, c)
    }

    fn separated_pair(&mut self, structure: &LocalityStructure, level: f64) -> Option<(Field, Field)> {
        let n = self.size;
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..8 {
            order.shuffle(&mut self.rng);
            let k = self.rng.random_range(1..=n.div_ceil(2).max(1));
            let support: BTreeSet<usize> = order[..k].iter().copied().collect();
            let hull = structure.closed_neighborhood(&support);
            if hull.len() == n && level == 0.0 {
                continue;
            }
            let src_u = self.field();
            let src_v = self.field();
            let mut v = vec![0.0; n];
            for &i in &support {
                let x = src_v[i];
                v[i] = if x == 0.0 { 1.0 } else { x };
            }
            let u: Vec<f64> = (0..n)
                .map(|i| if hull.contains(&i) { level } else { src_u[i] })
                .collect();
            return Some((Field::from(u), Field::from(v)));
        }
        None
    }

    pub fn pair_of(&mut self, kind: PairKind, structure: &LocalityStructure) -> (Field, Field) {
        match kind {
            PairKind::Independent => (self.field(), self.field()),
            PairKind::Ordered => self.ordered_pair(),
            PairKind::DisjointSupport => self
                .disjoint_pair(structure)
                .unwrap_or_else(|| (self.field(), self.field())),
        }
    }

    /// Independent, ordered and disjoint-support pairs in proportion 2:1:1.
    pub fn pair(&mut self, structure: &LocalityStructure) -> (Field, Field) {
        let kind = match self.rng.random_range(0..4) {
            0 | 1 => PairKind::Independent,
            2 => PairKind::Ordered,
            _ => PairKind::DisjointSupport,
        };
        self.pair_of(kind, structure)
    }

    /// A random piecewise-linear normal contraction with up to four kinks.
    pub fn contraction(&mut self) -> NormalContraction {
        let extra = self.rng.random_range(0..=3);
        let mut breakpoints = vec![0.0];
        while breakpoints.len() < extra + 1 {
            let b: f64 = self.rng.random_range(-3.0..3.0);
            if breakpoints.iter().all(|x| (x - b).abs() > 1e-3) {
                breakpoints.push(b);
            }
        }
        breakpoints.sort_by(f64::total_cmp);
        let slopes = (0..=breakpoints.len())
            .map(|_| match self.rng.random_range(0..5) {
                0 => 0.0,
                1 => 1.0,
                2 => -1.0,
                _ => self.rng.random_range(-1.0..=1.0),
            })
            .collect();
        NormalContraction::new(breakpoints, slopes).expect("valid by construction")
    }

    /// Coordinate fields followed by `extra` random directions.
    pub fn directions(&mut self, extra: usize) -> Vec<Field> {
        let n = self.size;
        let mut out: Vec<Field> = (0..n).map(|i| Field::basis(n, i, 1.0)).collect();
        out.extend((0..extra).map(|_| self.nonzero_field()));
        out
    }
}
