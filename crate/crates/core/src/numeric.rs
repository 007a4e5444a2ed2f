//! Small numerical kernels shared by the estimators and baselines.

const CHUNK_BITS: u32 = 32;
const CHUNK_MASK: u64 = (1 << CHUNK_BITS) - 1;
/// Bit positions 0..2098 (every finite double scaled by 2^1074) plus room
/// for carries.
const CHUNKS: usize = 68;
/// Each add puts less than 2^32 into a chunk, so 2^30 adds cannot overflow.
const FLUSH_EVERY: u32 = 1 << 30;

/// Correctly rounded floating-point summation.
///
/// Every finite double is an integer multiple of 2^-1074, so the terms are
/// accumulated exactly in a fixed-point integer with signed 32-bit chunks
/// and rounded (half to even) once at the end. The result is the exact sum
/// rounded once, so it does not depend on the order in which terms are
/// added. Every estimator accumulates through this type, which is what
/// makes them bit-for-bit permutation invariant.
#[derive(Debug, Clone)]
pub struct ExactSum {
    chunks: [i64; CHUNKS],
    pending: u32,
    /// Sum of the non-finite terms, if any.
    special: f64,
    has_special: bool,
    any_finite: bool,
    only_negative_zeros: bool,
}

impl Default for ExactSum {
    fn default() -> Self {
        Self::new()
    }
}

impl ExactSum {
    pub fn new() -> Self {
        Self {
            chunks: [0; CHUNKS],
            pending: 0,
            special: 0.0,
            has_special: false,
            any_finite: false,
            only_negative_zeros: true,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let bits = x.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as u32;
        if biased == 0x7ff {
            self.special += x;
            self.has_special = true;
            return;
        }
        let frac = bits & ((1 << 52) - 1);
        self.any_finite = true;
        if bits != (1 << 63) {
            self.only_negative_zeros = false;
        }
        let (mant, shift) = if biased == 0 {
            (frac, 0)
        } else {
            (frac | (1 << 52), biased - 1)
        };
        if mant == 0 {
            return;
        }
        let c = (shift / CHUNK_BITS) as usize;
        let wide = u128::from(mant) << (shift % CHUNK_BITS);
        let parts = [
            (wide as u64 & CHUNK_MASK) as i64,
            ((wide >> 32) as u64 & CHUNK_MASK) as i64,
            (wide >> 64) as i64,
        ];
        if bits >> 63 == 1 {
            self.chunks[c] -= parts[0];
            self.chunks[c + 1] -= parts[1];
            self.chunks[c + 2] -= parts[2];
        } else {
            self.chunks[c] += parts[0];
            self.chunks[c + 1] += parts[1];
            self.chunks[c + 2] += parts[2];
        }
        self.pending += 1;
        if self.pending == FLUSH_EVERY {
            carry(&mut self.chunks);
            self.pending = 0;
        }
    }

    pub fn value(&self) -> f64 {
        if self.has_special {
            return self.special;
        }
        let mut c = self.chunks;
        carry(&mut c);
        let negative = c[CHUNKS - 1] < 0;
        if negative {
            c.iter_mut().for_each(|v| *v = -*v);
            carry(&mut c);
        }
        let Some(h) = c.iter().rposition(|&v| v != 0) else {
            // As in IEEE addition, only a sum of negative zeros is -0.
            return if self.any_finite && self.only_negative_zeros { -0.0 } else { 0.0 };
        };
        let limb = |i: usize| c[i] as u64;
        let top = h as u32 * CHUNK_BITS + 63 - limb(h).leading_zeros();
        let magnitude = if top < 53 {
            // Below 2^53 · 2^-1074 the sum is exactly representable.
            (limb(0) | limb(1) << CHUNK_BITS) as f64 * f64::from_bits(1)
        } else {
            let lo = top - 52;
            let mut q = read_bits(&c, lo, 53);
            let round = read_bits(&c, lo - 1, 1) == 1;
            let sticky = lo >= 2 && any_bits_below(&c, lo - 1);
            if round && (sticky || q & 1 == 1) {
                q += 1;
            }
            // q·2^(lo−1074) with q in [2^52, 2^53) has biased exponent lo + 1.
            let mut exp = u64::from(lo) + 1;
            if q == 1 << 53 {
                q >>= 1;
                exp += 1;
            }
            if exp >= 0x7ff {
                f64::INFINITY
            } else {
                f64::from_bits(exp << 52 | (q & ((1 << 52) - 1)))
            }
        };
        if negative {
            -magnitude
        } else {
            magnitude
        }
    }
}

/// Brings every chunk but the last into `[0, 2^32)`.
fn carry(c: &mut [i64; CHUNKS]) {
    for i in 0..CHUNKS - 1 {
        let k = c[i] >> CHUNK_BITS;
        c[i] -= k << CHUNK_BITS;
        c[i + 1] += k;
    }
}

/// `len <= 64` bits starting at bit `lo` of a normalised non-negative value.
fn read_bits(c: &[i64; CHUNKS], lo: u32, len: u32) -> u64 {
    let first = (lo / CHUNK_BITS) as usize;
    let mut acc: u128 = 0;
    for k in 0..4 {
        if let Some(&v) = c.get(first + k) {
            acc |= u128::from(v as u64) << (32 * k);
        }
    }
    ((acc >> (lo % CHUNK_BITS)) as u64) & (u64::MAX >> (64 - len))
}

/// Whether any bit strictly below position `pos` is set.
fn any_bits_below(c: &[i64; CHUNKS], pos: u32) -> bool {
    let i = (pos / CHUNK_BITS) as usize;
    let partial = (c[i] as u64) & ((1u64 << (pos % CHUNK_BITS)) - 1);
    partial != 0 || c[..i].iter().any(|&v| v != 0)
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = ExactSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn exact_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<ExactSum>().value()
}

/// Symmetric positive-definite solve via Cholesky.
///
/// `a` is row-major `p × p`. Returns `None` when a pivot falls below
/// `rel_tol` times the original diagonal entry, i.e. the column is (nearly)
/// a linear combination of the previous ones.
pub fn cholesky_solve(a: &[f64], b: &[f64], p: usize, rel_tol: f64) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), p * p);
    debug_assert_eq!(b.len(), p);
    let mut l = vec![0.0; p * p];
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= l[j * p + k] * l[j * p + k];
        }
        let diag = a[j * p + j];
        if !(d > rel_tol * diag.abs()) || !d.is_finite() || diag <= 0.0 {
            return None;
        }
        let ljj = d.sqrt();
        l[j * p + j] = ljj;
        for i in (j + 1)..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            l[i * p + j] = s / ljj;
        }
    }
    let mut z = vec![0.0; p];
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * z[k];
        }
        z[i] = s / l[i * p + i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = z[i];
        for k in (i + 1)..p {
            s -= l[k * p + i] * x[k];
        }
        x[i] = s / l[i * p + i];
    }
    Some(x)
}

/// Standard normal quantile function, Wichura's AS 241 (PPND16).
///
/// Relative accuracy is about 1e-16 over (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_7e2)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5.226_495_278_852_854_5e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Unbiased sample variance (two-pass). Requires at least two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    sample_covariance(xs, xs)
}

/// Unbiased sample covariance (two-pass). Requires equal lengths >= 2.
pub fn sample_covariance(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let m = xs.len() as f64;
    let mx = exact_sum(xs.iter().copied()) / m;
    let my = exact_sum(ys.iter().copied()) / m;
    exact_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my))) / (m - 1.0)
}
