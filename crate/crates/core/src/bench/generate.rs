//! Synthetic test matrices with controlled decay.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SpammError};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeneratorKind {
    /// `|a_ij| <= c lambda^|i-j|`
    Exponential,
    /// `|a_ij| <= c / (|i-j|^lambda + 1)`
    Algebraic,
    /// Exponential decay in the distance between the atoms owning `i` and `j`.
    #[default]
    BlockedDecay,
    /// Uniform in `[-c, c]`.
    RandomDense,
}

impl GeneratorKind {
    pub fn label(self) -> &'static str {
        match self {
            GeneratorKind::Exponential => "exponential",
            GeneratorKind::Algebraic => "algebraic",
            GeneratorKind::BlockedDecay => "blocked-decay",
            GeneratorKind::RandomDense => "random-dense",
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = SpammError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" => Ok(GeneratorKind::Exponential),
            "algebraic" => Ok(GeneratorKind::Algebraic),
            "blocked-decay" | "blocked" => Ok(GeneratorKind::BlockedDecay),
            "random-dense" | "random" => Ok(GeneratorKind::RandomDense),
            _ => Err(SpammError::InvalidArgument(format!(
                "unknown generator kind '{s}'"
            ))),
        }
    }
}

impl std::fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub lambda: f64,
    pub c: f64,
    /// Atom sizes, repeated cyclically along the diagonal.
    pub blocks: Vec<usize>,
    pub seed: u64,
    pub symmetrize: bool,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            kind: GeneratorKind::BlockedDecay,
            n: 256,
            lambda: 0.5,
            c: 1.0,
            blocks: vec![5, 15],
            seed: 0,
            symmetrize: true,
        }
    }
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize) -> Self {
        GeneratorSpec {
            kind,
            n,
            ..Default::default()
        }
    }

    pub fn lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn magnitude(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn blocks(mut self, blocks: Vec<usize>) -> Self {
        self.blocks = blocks;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn symmetrize(mut self, on: bool) -> Self {
        self.symmetrize = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SpammError::InvalidArgument(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if !(self.c.is_finite() && self.c >= 0.0) || self.c > f32::MAX as f64 {
            return bad(format!(
                "magnitude c must be finite, >= 0 and representable, got {}",
                self.c
            ));
        }
        match self.kind {
            GeneratorKind::Exponential | GeneratorKind::BlockedDecay => {
                if !(self.lambda > 0.0 && self.lambda < 1.0) {
                    return bad(format!(
                        "{} decay requires 0 < lambda < 1, got {}",
                        self.kind, self.lambda
                    ));
                }
            }
            GeneratorKind::Algebraic => {
                if !(self.lambda > 0.0 && self.lambda.is_finite()) {
                    return bad(format!(
                        "algebraic decay requires lambda > 0, got {}",
                        self.lambda
                    ));
                }
            }
            GeneratorKind::RandomDense => {}
        }
        if self.kind == GeneratorKind::BlockedDecay
            && (self.blocks.is_empty() || self.blocks.contains(&0))
        {
            return bad("block pattern must be non-empty with positive sizes".into());
        }
        Ok(())
    }

    /// Atom index of every row for the blocked-decay kind.
    pub fn atoms(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n);
        let mut atom = 0;
        'fill: for size in self.blocks.iter().cycle() {
            for _ in 0..*size {
                if out.len() == self.n {
                    break 'fill;
                }
                out.push(atom);
            }
            atom += 1;
        }
        out
    }

    /// Decay envelope evaluated in double precision.
    pub fn envelope(&self, i: usize, j: usize, atoms: &[usize]) -> f64 {
        let d = i.abs_diff(j);
        match self.kind {
            GeneratorKind::Exponential => self.c * self.lambda.powf(d as f64),
            GeneratorKind::Algebraic => self.c / ((d as f64).powf(self.lambda) + 1.0),
            GeneratorKind::BlockedDecay => {
                self.c * self.lambda.powf(atoms[i].abs_diff(atoms[j]) as f64)
            }
            GeneratorKind::RandomDense => self.c,
        }
    }
}

/// Elements below this envelope are stored as exact zeros.
pub const ENVELOPE_FLOOR: f64 = f32::MIN_POSITIVE as f64;

/// Rounds `x` to `f32` without exceeding `bound` in magnitude.
fn bounded_f32(x: f64, bound: f64) -> f32 {
    let v = x as f32;
    if (v.abs() as f64) > bound {
        f32::from_bits(v.to_bits() - 1)
    } else {
        v
    }
}

/// Generates a matrix from `spec`. Each row draws from its own ChaCha
/// stream, so the result depends only on the spec.
pub fn generate(spec: &GeneratorSpec) -> Result<DenseMatrix<f32>> {
    spec.validate()?;
    let n = spec.n;
    let atoms = if spec.kind == GeneratorKind::BlockedDecay {
        spec.atoms()
    } else {
        Vec::new()
    };
    let mut data = vec![0.0f32; n * n];
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let cols = if spec.symmetrize { 0..i + 1 } else { 0..n };
        for j in cols {
            let env = spec.envelope(i, j, &atoms);
            if env < ENVELOPE_FLOOR {
                continue;
            }
            let u: f64 = rng.gen();
            let x = if spec.kind == GeneratorKind::RandomDense {
                env * (2.0 * u - 1.0)
            } else {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                env * sign * (0.5 + 0.5 * u)
            };
            data[i * n + j] = bounded_f32(x, env);
        }
    }
    if spec.symmetrize {
        for i in 0..n {
            for j in i + 1..n {
                data[i * n + j] = data[j * n + i];
            }
        }
    }
    DenseMatrix::new(n, n, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        for l in [0.0, 1.0, 1.5, -0.1, f64::NAN] {
            assert!(
                generate(&GeneratorSpec::new(GeneratorKind::Exponential, 8).lambda(l)).is_err()
            );
        }
        assert!(generate(&GeneratorSpec::new(GeneratorKind::Algebraic, 8).lambda(0.0)).is_err());
        assert!(generate(&GeneratorSpec::new(GeneratorKind::Algebraic, 8).lambda(3.0)).is_ok());
        assert!(
            generate(&GeneratorSpec::new(GeneratorKind::BlockedDecay, 8).blocks(vec![])).is_err()
        );
        assert!(
            generate(&GeneratorSpec::new(GeneratorKind::BlockedDecay, 8).blocks(vec![2, 0]))
                .is_err()
        );
        assert!(generate(&GeneratorSpec::new(GeneratorKind::RandomDense, 0)).is_err());
    }

    #[test]
    fn atoms_cycle_pattern() {
        let s = GeneratorSpec::new(GeneratorKind::BlockedDecay, 9).blocks(vec![1, 3]);
        assert_eq!(s.atoms(), vec![0, 1, 1, 1, 2, 3, 3, 3, 4]);
    }

    #[test]
    fn deterministic_and_symmetric() {
        for kind in [
            GeneratorKind::Exponential,
            GeneratorKind::Algebraic,
            GeneratorKind::BlockedDecay,
            GeneratorKind::RandomDense,
        ] {
            let s = GeneratorSpec::new(kind, 37).seed(11);
            let a = generate(&s).unwrap();
            assert_eq!(a, generate(&s).unwrap());
            assert!(a.is_symmetric());
            assert_ne!(a, generate(&s.clone().seed(12)).unwrap());
            let u = generate(&s.clone().symmetrize(false)).unwrap();
            assert!(!u.is_symmetric());
        }
    }

    #[test]
    fn tiny_lambda_is_diagonal() {
        let a =
            generate(&GeneratorSpec::new(GeneratorKind::Exponential, 20).lambda(1e-300)).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                if i != j {
                    assert_eq!(a.get(i, j), 0.0);
                } else {
                    assert!(a.get(i, i).abs() >= 0.5);
                }
            }
        }
    }

    #[test]
    fn envelope_holds_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let specs = [
            GeneratorSpec::new(GeneratorKind::Exponential, 300)
                .lambda(0.9)
                .magnitude(3.0),
            GeneratorSpec::new(GeneratorKind::Algebraic, 300)
                .lambda(1.7)
                .magnitude(0.1),
            GeneratorSpec::new(GeneratorKind::BlockedDecay, 300)
                .lambda(0.5)
                .blocks(vec![1, 5]),
            GeneratorSpec::new(GeneratorKind::RandomDense, 300)
                .magnitude(2.0)
                .symmetrize(false),
        ];
        for s in &specs {
            let a = generate(s).unwrap();
            let atoms: Vec<usize> = {
                // independent atom map: prefix sums of the cyclic pattern
                let mut m = vec![0; s.n];
                let (mut start, mut atom) = (0, 0);
                while start < s.n {
                    let size = s.blocks[atom % s.blocks.len()];
                    for r in start..(start + size).min(s.n) {
                        m[r] = atom;
                    }
                    start += size;
                    atom += 1;
                }
                m
            };
            for _ in 0..10_000 {
                let (i, j) = (rng.gen_range(0..s.n), rng.gen_range(0..s.n));
                let d = i.abs_diff(j) as f64;
                let env = match s.kind {
                    GeneratorKind::Exponential => s.c * s.lambda.powf(d),
                    GeneratorKind::Algebraic => s.c / (d.powf(s.lambda) + 1.0),
                    GeneratorKind::BlockedDecay => {
                        s.c * s.lambda.powf(atoms[i].abs_diff(atoms[j]) as f64)
                    }
                    GeneratorKind::RandomDense => s.c,
                };
                assert!((a.get(i, j).abs() as f64) <= env, "{:?} ({i},{j})", s.kind);
            }
            assert!(a.max_abs() <= s.c);
        }
    }
}
