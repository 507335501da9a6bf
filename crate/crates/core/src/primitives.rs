//! Compiled-in primitive registry.
//!
//! Two layers exist: low-level primitives map scalars to a scalar, mezzanine
//! primitives reduce one input-vector window to a scalar. Every primitive is
//! protected: for finite inputs it returns a finite value, and all outputs
//! are clamped to `±MAGNITUDE_CEILING` so nested applications cannot overflow.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GpError, Result};

/// Denominators smaller than this in magnitude make `DIV` return 1.
pub const DIV_EPSILON: f64 = 1e-9;

/// Largest magnitude any primitive may return.
pub const MAGNITUDE_CEILING: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    LowLevel,
    Mezzanine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    Div,
    Relu,
    Max,
    Min,
    Mean,
    X2,
    Sqrt,
    VMean,
    VMin,
    VMax,
}

/// Static description of a primitive: name, layer and arity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimitiveSignature {
    pub id: &'static str,
    pub layer: Layer,
    /// Scalar argument count for low-level primitives; always 1 (one vector) for mezzanine.
    pub arity: usize,
}

impl Primitive {
    pub const ALL: [Primitive; 13] = [
        Primitive::Add,
        Primitive::Sub,
        Primitive::Mul,
        Primitive::Div,
        Primitive::Relu,
        Primitive::Max,
        Primitive::Min,
        Primitive::Mean,
        Primitive::X2,
        Primitive::Sqrt,
        Primitive::VMean,
        Primitive::VMin,
        Primitive::VMax,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Primitive::Add => "ADD",
            Primitive::Sub => "SUB",
            Primitive::Mul => "MUL",
            Primitive::Div => "DIV",
            Primitive::Relu => "RELU",
            Primitive::Max => "MAX",
            Primitive::Min => "MIN",
            Primitive::Mean => "MEAN",
            Primitive::X2 => "X2",
            Primitive::Sqrt => "SQRT",
            Primitive::VMean => "VMEAN",
            Primitive::VMin => "VMIN",
            Primitive::VMax => "VMAX",
        }
    }

    pub fn layer(self) -> Layer {
        match self {
            Primitive::VMean | Primitive::VMin | Primitive::VMax => Layer::Mezzanine,
            _ => Layer::LowLevel,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Primitive::Relu | Primitive::X2 | Primitive::Sqrt => 1,
            Primitive::VMean | Primitive::VMin | Primitive::VMax => 1,
            _ => 2,
        }
    }

    pub fn signature(self) -> PrimitiveSignature {
        PrimitiveSignature {
            id: self.id(),
            layer: self.layer(),
            arity: self.arity(),
        }
    }

    pub fn is_mezzanine(self) -> bool {
        self.layer() == Layer::Mezzanine
    }

    /// Checked application. Low-level primitives take `arity` scalars; mezzanine
    /// primitives take the (non-empty) vector window as `args`.
    pub fn apply(self, args: &[f64]) -> Result<f64> {
        match self.layer() {
            Layer::LowLevel if args.len() != self.arity() => Err(GpError::MalformedTree(format!(
                "{} expects {} argument(s), got {}",
                self.id(),
                self.arity(),
                args.len()
            ))),
            Layer::Mezzanine if args.is_empty() => Err(GpError::MalformedTree(format!(
                "{} expects a non-empty vector",
                self.id()
            ))),
            Layer::LowLevel if args.len() == 1 => Ok(self.apply1(args[0])),
            Layer::LowLevel => Ok(self.apply2(args[0], args[1])),
            Layer::Mezzanine => Ok(self.reduce(args)),
        }
    }

    /// Unary kernel. Only meaningful for arity-1 low-level primitives.
    #[inline]
    pub(crate) fn apply1(self, a: f64) -> f64 {
        let v = match self {
            Primitive::Relu => a.max(0.0),
            Primitive::X2 => a * a,
            Primitive::Sqrt => a.abs().sqrt(),
            _ => unreachable!("{} is not unary", self.id()),
        };
        protect(v)
    }

    /// Binary kernel. Only meaningful for arity-2 low-level primitives.
    #[inline]
    pub(crate) fn apply2(self, a: f64, b: f64) -> f64 {
        let v = match self {
            Primitive::Add => a + b,
            Primitive::Sub => a - b,
            Primitive::Mul => a * b,
            Primitive::Div => {
                if b.abs() < DIV_EPSILON {
                    1.0
                } else {
                    a / b
                }
            }
            Primitive::Max => a.max(b),
            Primitive::Min => a.min(b),
            Primitive::Mean => 0.5 * a + 0.5 * b,
            _ => unreachable!("{} is not binary", self.id()),
        };
        protect(v)
    }

    /// Vector reducer kernel. `v` must be non-empty.
    #[inline]
    pub(crate) fn reduce(self, v: &[f64]) -> f64 {
        let r = match self {
            Primitive::VMean => v.iter().sum::<f64>() / v.len() as f64,
            Primitive::VMin => v.iter().copied().fold(f64::INFINITY, f64::min),
            Primitive::VMax => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            _ => unreachable!("{} is not a reducer", self.id()),
        };
        protect(r)
    }
}

#[inline]
fn protect(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-MAGNITUDE_CEILING, MAGNITUDE_CEILING)
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Primitive {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        Primitive::ALL
            .into_iter()
            .find(|p| p.id() == s)
            .ok_or_else(|| GpError::Config(format!("unknown primitive '{s}'")))
    }
}

/// The primitives available to a run, split by layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimitiveSet {
    low: Vec<Primitive>,
    mezz: Vec<Primitive>,
}

impl PrimitiveSet {
    pub const DEFAULT_LOW: [&'static str; 10] = [
        "ADD", "SUB", "MUL", "DIV", "RELU", "MAX", "MIN", "MEAN", "X2", "SQRT",
    ];
    pub const DEFAULT_MEZZANINE: [&'static str; 3] = ["VMEAN", "VMIN", "VMAX"];

    /// Builds a set from id lists, checking that every id exists, sits in the
    /// requested layer and appears once.
    pub fn from_ids<S: AsRef<str>>(low: &[S], mezz: &[S]) -> Result<Self> {
        let low = parse_layer(low, Layer::LowLevel)?;
        let mezz = parse_layer(mezz, Layer::Mezzanine)?;
        if low.is_empty() {
            return Err(GpError::Config(
                "at least one low-level primitive is required".into(),
            ));
        }
        Ok(PrimitiveSet { low, mezz })
    }

    /// The full default low-level set with no mezzanine layer.
    pub fn scalar_default() -> Self {
        Self::from_ids(&Self::DEFAULT_LOW, &[] as &[&str]).expect("default ids are valid")
    }

    /// Default low-level set plus the default mezzanine reducers.
    pub fn with_mezzanine_default() -> Self {
        Self::from_ids(&Self::DEFAULT_LOW, &Self::DEFAULT_MEZZANINE).expect("default ids are valid")
    }

    pub fn low(&self) -> &[Primitive] {
        &self.low
    }

    pub fn mezzanine(&self) -> &[Primitive] {
        &self.mezz
    }

    pub fn has_mezzanine(&self) -> bool {
        !self.mezz.is_empty()
    }

    pub fn contains(&self, p: Primitive) -> bool {
        self.low.contains(&p) || self.mezz.contains(&p)
    }

    pub fn lookup(&self, id: &str) -> Result<PrimitiveSignature> {
        self.low
            .iter()
            .chain(&self.mezz)
            .find(|p| p.id() == id)
            .map(|p| p.signature())
            .ok_or_else(|| GpError::Config(format!("primitive '{id}' is not in the set")))
    }

    /// Members of the same layer and arity as `p`, excluding `p`.
    pub fn alternatives(&self, p: Primitive) -> impl Iterator<Item = Primitive> + '_ {
        self.low
            .iter()
            .chain(&self.mezz)
            .copied()
            .filter(move |q| *q != p && q.layer() == p.layer() && q.arity() == p.arity())
    }
}

impl Default for PrimitiveSet {
    fn default() -> Self {
        Self::with_mezzanine_default()
    }
}

fn parse_layer<S: AsRef<str>>(ids: &[S], layer: Layer) -> Result<Vec<Primitive>> {
    let mut out: Vec<Primitive> = Vec::with_capacity(ids.len());
    for id in ids {
        let p: Primitive = id.as_ref().parse()?;
        if p.layer() != layer {
            return Err(GpError::Config(format!(
                "primitive '{}' belongs to layer {:?}, not {:?}",
                p.id(),
                p.layer(),
                layer
            )));
        }
        if out.contains(&p) {
            return Err(GpError::Config(format!("duplicate primitive '{}'", p.id())));
        }
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ap(id: &str, args: &[f64]) -> f64 {
        id.parse::<Primitive>().unwrap().apply(args).unwrap()
    }

    #[test]
    fn worked_examples() {
        assert_eq!(ap("ADD", &[2.0, 3.0]), 5.0);
        assert_eq!(ap("DIV", &[7.0, 0.0]), 1.0);
        assert_eq!(ap("SQRT", &[-4.0]), 2.0);
        assert_eq!(ap("RELU", &[-1.5]), 0.0);
        assert_eq!(ap("VMEAN", &[1.0, 2.0, 3.0, 6.0]), 3.0);
    }

    #[test]
    fn near_zero_denominator_is_protected() {
        assert_eq!(ap("DIV", &[7.0, 5e-10]), 1.0);
        assert_eq!(ap("DIV", &[7.0, -5e-10]), 1.0);
        assert_eq!(ap("DIV", &[3.0, 1e-9]), 3.0 / 1e-9);
    }

    #[test]
    fn square_is_clamped() {
        assert_eq!(ap("X2", &[1e100]), MAGNITUDE_CEILING);
        assert_eq!(ap("MUL", &[-1e100, 1e100]), -MAGNITUDE_CEILING);
        assert_eq!(ap("ADD", &[f64::MAX, f64::MAX]), MAGNITUDE_CEILING);
    }

    #[test]
    fn lookup_default_set() {
        let set = PrimitiveSet::default();
        let add = set.lookup("ADD").unwrap();
        assert_eq!((add.layer, add.arity), (Layer::LowLevel, 2));
        let vmean = set.lookup("VMEAN").unwrap();
        assert_eq!((vmean.layer, vmean.arity), (Layer::Mezzanine, 1));
        assert!(matches!(set.lookup("FOO"), Err(GpError::Config(_))));
    }

    #[test]
    fn default_sets_are_exact() {
        let set = PrimitiveSet::default();
        let low: Vec<_> = set.low().iter().map(|p| p.id()).collect();
        let mezz: Vec<_> = set.mezzanine().iter().map(|p| p.id()).collect();
        assert_eq!(low, PrimitiveSet::DEFAULT_LOW);
        assert_eq!(mezz, PrimitiveSet::DEFAULT_MEZZANINE);
    }

    #[test]
    fn arity_mismatch_is_malformed() {
        assert!(matches!(
            Primitive::Add.apply(&[1.0]),
            Err(GpError::MalformedTree(_))
        ));
        assert!(matches!(
            Primitive::VMax.apply(&[]),
            Err(GpError::MalformedTree(_))
        ));
    }

    #[test]
    fn set_construction_rejects_bad_ids() {
        assert!(PrimitiveSet::from_ids(&["ADD", "ADD"], &[]).is_err());
        assert!(PrimitiveSet::from_ids(&["VMEAN"], &[]).is_err());
        assert!(PrimitiveSet::from_ids(&["ADD"], &["SUB"]).is_err());
        assert!(PrimitiveSet::from_ids(&["NOPE"], &[]).is_err());
        assert!(PrimitiveSet::from_ids::<&str>(&[], &[]).is_err());
    }

    #[test]
    fn alternatives_share_layer_and_arity() {
        let set = PrimitiveSet::default();
        let alts: Vec<_> = set.alternatives(Primitive::Relu).collect();
        assert_eq!(alts, vec![Primitive::X2, Primitive::Sqrt]);
        let alts: Vec<_> = set.alternatives(Primitive::VMin).collect();
        assert_eq!(alts, vec![Primitive::VMean, Primitive::VMax]);
    }

    #[test]
    fn total_over_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut evaluations = 0usize;
        for _ in 0..10_000 {
            for p in Primitive::ALL {
                let n = if p.is_mezzanine() {
                    rng.random_range(1..16)
                } else {
                    p.arity()
                };
                let args: Vec<f64> = (0..n).map(|_| rng.random_range(-1e6..1e6)).collect();
                assert!(p.apply(&args).unwrap().is_finite(), "{p} on {args:?}");
                evaluations += 1;
            }
        }
        assert!(evaluations >= 100_000);
    }

    proptest! {
        #[test]
        fn division_inverts_multiplication(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            prop_assume!(b.abs() >= DIV_EPSILON);
            let q = ap("DIV", &[a, b]);
            let back = q * b;
            prop_assert!((back - a).abs() <= 1e-12 * a.abs().max(f64::MIN_POSITIVE), "{back} vs {a}");
        }

        #[test]
        fn reducers_are_ordered(v in prop::collection::vec(-1e6f64..1e6, 1..64)) {
            let lo = ap("VMIN", &v);
            let mid = ap("VMEAN", &v);
            let hi = ap("VMAX", &v);
            prop_assert!(lo <= mid + 1e-9 * mid.abs().max(1.0));
            prop_assert!(mid <= hi + 1e-9 * mid.abs().max(1.0));
        }
    }
}
