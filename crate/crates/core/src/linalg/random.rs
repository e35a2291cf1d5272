/// Seeded source of uniform and standard-normal variates.
///
/// The generator is xorshift64* (Marsaglia's xorshift shift register followed
/// by a multiplicative output scramble). The 64-bit seed is expanded through
/// one round of splitmix64 so that small or similar seeds still give
/// well-mixed initial states; the all-zero state is avoided. Normal variates
/// come from the Box–Muller transform, with the second variate of each pair
/// cached for the next call. Identical seeds reproduce identical streams on
/// every platform.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    state: u64,
    spare: Option<f64>,
}

/// The splitmix64 finalizer, used for seed expansion and seed derivation.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        let mut state = splitmix64(seed);
        if state == 0 {
            state = 0x9E37_79B9_7F4A_7C15;
        }
        Self {
            seed,
            state,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent child stream, e.g. one per Monte Carlo batch.
    pub fn derive(&self, index: u64) -> RandomSource {
        RandomSource::new(self.seed ^ splitmix64(index.wrapping_add(1)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform on `(0, 1)`; never returns exactly zero.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// `n` independent standard-normal variates.
    pub fn gaussian_vector(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.standard_normal()).collect()
    }
}
