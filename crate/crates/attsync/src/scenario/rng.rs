//! Deterministic random number generation for seeded scenarios and sweeps.
//!
//! A hand-rolled splitmix-style 64-bit counter generator is used instead of a
//! library RNG so that a seed pins down the exact draw sequence independently
//! of any crate version; reruns of a seeded scenario are byte-identical.

/// Counter-based 64-bit generator: each output is a finalizer applied to a
/// state advanced by a fixed odd constant.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in the half-open interval (0, 1].
    ///
    /// The open lower end keeps logarithms of draws finite.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Pair of independent standard normal draws (Box-Muller).
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        (r * phi.cos(), r * phi.sin())
    }

    /// Uniformly distributed unit 3-vector (normalized Gaussian triple).
    pub fn direction(&mut self) -> nalgebra::Vector3<f64> {
        let (a, b) = self.normal_pair();
        let (c, _) = self.normal_pair();
        let v = nalgebra::Vector3::new(a, b, c);
        let n = v.norm();
        if n < 1e-12 {
            // essentially impossible; keep the draw count fixed anyway
            return nalgebra::Vector3::x();
        }
        v / n
    }
}
