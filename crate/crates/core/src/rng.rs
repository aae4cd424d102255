//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, domain, stream, counter)`, computed
//! with the Philox4x32-10 block function. Particle noise is keyed by
//! `(seed, particle, step, axis)`, so a trajectory does not depend on thread
//! scheduling, and particle `i` sees the same noise whatever the system size.

use crate::math::{cos, log, sin, sqrt, PI};

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

/// Philox4x32 with 10 rounds.
pub fn philox4x32_10(mut ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let p0 = u64::from(M0) * u64::from(ctr[0]);
        let p1 = u64::from(M1) * u64::from(ctr[2]);
        ctr = [
            ((p1 >> 32) as u32) ^ ctr[1] ^ k[0],
            p1 as u32,
            ((p0 >> 32) as u32) ^ ctr[3] ^ k[1],
            p0 as u32,
        ];
    }
    ctr
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th independent replica derived from a master seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5EED)))
}

/// Purpose tag separating otherwise identical counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Increments,
    Initial,
    Bootstrap,
    Directions,
    Reference,
    Misc,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Increments => 0x1111_0000_0000_0001,
            Domain::Initial => 0x2222_0000_0000_0002,
            Domain::Bootstrap => 0x3333_0000_0000_0003,
            Domain::Directions => 0x4444_0000_0000_0004,
            Domain::Reference => 0x5555_0000_0000_0005,
            Domain::Misc => 0x6666_0000_0000_0006,
        }
    }
}

#[inline]
fn to_unit_open(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Stateless keyed generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: [u32; 2],
}

impl CounterRng {
    pub fn new(seed: u64, domain: Domain) -> Self {
        let k = splitmix64(seed ^ domain.tag());
        Self {
            key: [k as u32, (k >> 32) as u32],
        }
    }

    #[inline]
    pub fn block(&self, ctr: [u32; 4]) -> [u32; 4] {
        philox4x32_10(ctr, self.key)
    }

    /// Two uniforms in (0, 1) for `(stream, step, slot)`.
    #[inline]
    pub fn uniform_pair(&self, stream: u32, step: u64, slot: u32) -> (f64, f64) {
        let b = self.block([slot, step as u32, (step >> 32) as u32, stream]);
        let a = (u64::from(b[0]) << 32) | u64::from(b[1]);
        let c = (u64::from(b[2]) << 32) | u64::from(b[3]);
        (to_unit_open(a), to_unit_open(c))
    }

    /// Two independent standard normals (Box–Muller) for `(stream, step, slot)`.
    #[inline]
    pub fn normal_pair(&self, stream: u32, step: u64, slot: u32) -> (f64, f64) {
        let (u1, u2) = self.uniform_pair(stream, step, slot);
        let r = sqrt(-2.0 * log(u1));
        let theta = 2.0 * PI * u2;
        (r * cos(theta), r * sin(theta))
    }

    /// Fills `out` with standard normals for `(stream, step)`; axis `k` uses
    /// slot `k / 2`.
    pub fn normals(&self, stream: u32, step: u64, out: &mut [f64]) {
        let mut k = 0;
        while k < out.len() {
            let (a, b) = self.normal_pair(stream, step, (k / 2) as u32);
            out[k] = a;
            if k + 1 < out.len() {
                out[k + 1] = b;
            }
            k += 2;
        }
    }

    pub fn uniforms(&self, stream: u32, step: u64, out: &mut [f64]) {
        let mut k = 0;
        while k < out.len() {
            let (a, b) = self.uniform_pair(stream, step, (k / 2) as u32);
            out[k] = a;
            if k + 1 < out.len() {
                out[k + 1] = b;
            }
            k += 2;
        }
    }
}

/// Sequential view of one stream, for bootstrap resampling, random
/// directions and similar bookkeeping draws.
#[derive(Debug, Clone)]
pub struct StreamRng {
    rng: CounterRng,
    stream: u32,
    counter: u64,
    buf: [u32; 4],
    pos: usize,
    spare_normal: Option<f64>,
}

impl StreamRng {
    pub fn new(seed: u64, domain: Domain, stream: u32) -> Self {
        Self {
            rng: CounterRng::new(seed, domain),
            stream,
            counter: 0,
            buf: [0; 4],
            pos: 4,
            spare_normal: None,
        }
    }

    fn next_u32(&mut self) -> u32 {
        if self.pos == 4 {
            let c = self.counter;
            self.buf = self
                .rng
                .block([0xFFFF_FFFF, c as u32, (c >> 32) as u32, self.stream]);
            self.counter += 1;
            self.pos = 0;
        }
        let v = self.buf[self.pos];
        self.pos += 1;
        v
    }

    pub fn next_u64(&mut self) -> u64 {
        (u64::from(self.next_u32()) << 32) | u64::from(self.next_u32())
    }

    /// Uniform in (0, 1).
    pub fn next_f64(&mut self) -> f64 {
        to_unit_open(self.next_u64())
    }

    /// Uniform integer in `[0, n)` (Lemire's multiply-shift with rejection).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(n);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        let r = sqrt(-2.0 * log(u1));
        let theta = 2.0 * PI * u2;
        self.spare_normal = Some(r * sin(theta));
        r * cos(theta)
    }
}
