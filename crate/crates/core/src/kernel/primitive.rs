//! Interpolated primitive of the unit kernel `k(x) = K(1, x)`.
//!
//! The kernel is homogeneous, `K(ct, cs) = c^{H-1/2} K(t, s)`, so every cell
//! integral on a uniform grid reduces to a difference of
//! `G(x) = ∫_0^x k(y) dy` at rational points `i/j`. `G` is tabulated as
//! Chebyshev series on dyadic shells `[2^{-k-1}, 2^{-k}]` that shrink
//! towards both endpoints, where `k` has power-law singularities. The right
//! half is stored through `Gc(y) = ∫_{1-y}^1 k`, so differences near `x = 1`
//! never subtract two numbers close to `G(1)`.

use crate::error::Result;
use crate::quad::{integrate, integrate_singular, Endpoint, QuadratureConfig};

use super::VolterraKernel;

const ORDER: usize = 24;
/// Shells cover `[2^{-SHELLS-1}, 1/2]` on each side.
const SHELLS: usize = 50;

#[derive(Debug, Clone)]
struct Side {
    /// `coeffs[k-1]` holds the series on `[2^{-k-1}, 2^{-k}]`.
    coeffs: Vec<[f64; ORDER]>,
    at_half: f64,
}

/// Tabulated `G` for one `H ≠ 1/2`. Immutable once built and shared freely.
#[derive(Debug, Clone)]
pub struct UnitPrimitive {
    kernel: VolterraKernel,
    left: Side,
    right: Side,
}

fn cheb_nodes() -> [f64; ORDER] {
    let mut z = [0.0; ORDER];
    for (j, zj) in z.iter_mut().enumerate() {
        *zj = (std::f64::consts::PI * (j as f64 + 0.5) / ORDER as f64).cos();
    }
    z
}

fn cheb_coeffs(values: &[f64; ORDER]) -> [f64; ORDER] {
    let n = ORDER as f64;
    let mut c = [0.0; ORDER];
    for (k, ck) in c.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, v) in values.iter().enumerate() {
            acc += v * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / n).cos();
        }
        *ck = 2.0 * acc / n;
    }
    c[0] *= 0.5;
    c
}

#[inline]
fn clenshaw(c: &[f64; ORDER], z: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * z * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    z * b1 - b2 + c[0]
}

/// Splits `x ∈ (0, 1/2)` into its dyadic shell index `k ≥ 1` and the local
/// coordinate in `[-1, 1)`.
#[inline]
fn shell(x: f64) -> Option<(usize, f64)> {
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i64;
    if biased == 0 {
        return None;
    }
    // x = m · 2^e with m ∈ [1/2, 1)
    let e = biased - 1022;
    let k = (-e) as usize;
    if k == 0 || k > SHELLS {
        return None;
    }
    let m = f64::from_bits((bits & !(0x7ff << 52)) | (1022u64 << 52));
    Some((k, 4.0 * m - 3.0))
}

impl UnitPrimitive {
    pub fn build(kernel: VolterraKernel) -> Result<Self> {
        let cfg = kernel.config().tightened(1e-13, 1e-17);
        let cfg = QuadratureConfig {
            max_subdivisions: cfg.max_subdivisions.max(200),
            ..cfg
        };
        let k = kernel.inner();
        // Left side: the integrand is k(x), gap to the diagonal is 1 - x.
        let left = Self::tabulate(
            |x| k.eval_gap(x, 1.0 - x).unwrap_or(f64::NAN),
            kernel.origin_exponent(),
            &cfg,
        )?;
        // Right side in the reflected variable w = 1 - x.
        let right = Self::tabulate(
            |w| k.eval_gap(1.0 - w, w).unwrap_or(f64::NAN),
            kernel.diagonal_exponent(),
            &cfg,
        )?;
        Ok(Self {
            kernel,
            left,
            right,
        })
    }

    fn tabulate<F: Fn(f64) -> f64>(f: F, exponent: f64, cfg: &QuadratureConfig) -> Result<Side> {
        let nodes = cheb_nodes();
        let floor = 0.5f64.powi(SHELLS as i32 + 1);
        // Mass below the innermost shell, with the endpoint singularity mapped.
        let mut anchor = integrate_singular(
            |x, _| f(x),
            0.0,
            floor,
            Endpoint::power(exponent.min(0.0)),
            Endpoint::REGULAR,
            cfg,
        )?;
        let mut coeffs = vec![[0.0; ORDER]; SHELLS];
        for k in (1..=SHELLS).rev() {
            let lo = 0.5f64.powi(k as i32 + 1);
            let hi = 2.0 * lo;
            let mut values = [0.0; ORDER];
            // Nodes come in decreasing order; accumulate from the left end.
            let mut prev_x = lo;
            let mut acc = anchor;
            for j in (0..ORDER).rev() {
                let x = lo + 0.5 * (nodes[j] + 1.0) * (hi - lo);
                acc += integrate(&f, prev_x, x, cfg)?;
                values[j] = acc;
                prev_x = x;
            }
            anchor = acc + integrate(&f, prev_x, hi, cfg)?;
            coeffs[k - 1] = cheb_coeffs(&values);
        }
        Ok(Side {
            coeffs,
            at_half: anchor,
        })
    }

    pub fn kernel(&self) -> &VolterraKernel {
        &self.kernel
    }

    fn side_eval(&self, side: &Side, x: f64, exponent: f64, reflected: bool) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 0.5 {
            return side.at_half;
        }
        match shell(x) {
            Some((k, z)) => clenshaw(&side.coeffs[k - 1], z),
            None => {
                // Below the tabulated range: integrate directly.
                let k = self.kernel.inner();
                integrate_singular(
                    |y, _| {
                        if reflected {
                            k.eval_gap(1.0 - y, y).unwrap_or(f64::NAN)
                        } else {
                            k.eval_gap(y, 1.0 - y).unwrap_or(f64::NAN)
                        }
                    },
                    0.0,
                    x,
                    Endpoint::power(exponent.min(0.0)),
                    Endpoint::REGULAR,
                    self.kernel.config(),
                )
                .unwrap_or(f64::NAN)
            }
        }
    }

    /// `G(x) = ∫_0^x k` for `x ∈ [0, 1/2]`.
    pub fn left(&self, x: f64) -> f64 {
        self.side_eval(&self.left, x, self.kernel.origin_exponent(), false)
    }

    /// `Gc(w) = ∫_{1-w}^1 k` for `w ∈ [0, 1/2]`.
    pub fn right(&self, w: f64) -> f64 {
        self.side_eval(&self.right, w, self.kernel.diagonal_exponent(), true)
    }

    /// `∫_0^1 k = DB_1(1)`.
    pub fn total(&self) -> f64 {
        self.left.at_half + self.right.at_half
    }

    /// `∫_{lo/den}^{hi/den} k(x) dx` for integers `0 ≤ lo < hi ≤ den`.
    pub fn mass(&self, lo: u64, hi: u64, den: u64) -> f64 {
        debug_assert!(lo < hi && hi <= den);
        let d = den as f64;
        if 2 * hi <= den {
            self.left(hi as f64 / d) - self.left(lo as f64 / d)
        } else if 2 * lo >= den {
            self.right((den - lo) as f64 / d) - self.right((den - hi) as f64 / d)
        } else {
            (self.left.at_half - self.left(lo as f64 / d))
                + (self.right.at_half - self.right((den - hi) as f64 / d))
        }
    }

    /// Writes `m[i] = ∫_{i/den}^{(i+1)/den} k` for `i < den` into `out`,
    /// reusing each primitive value for two neighbouring cells.
    pub fn row_masses(&self, den: u64, out: &mut [f64]) {
        debug_assert_eq!(out.len() as u64, den);
        let d = den as f64;
        let half = den / 2;
        // Left half: consecutive differences of G.
        let mut prev = 0.0;
        for i in 0..half {
            let g = self.left((i + 1) as f64 / d);
            out[i as usize] = g - prev;
            prev = g;
        }
        // Right half: consecutive differences of Gc, walking inwards from x = 1.
        let mut prev = 0.0;
        let mut i = den;
        while i > half + 1 {
            let g = self.right((den - (i - 1)) as f64 / d);
            out[(i - 1) as usize] = g - prev;
            prev = g;
            i -= 1;
        }
        // The cell [half/den, (half+1)/den] may straddle 1/2.
        if half < den {
            out[half as usize] = self.mass(half, half + 1, den);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::HurstParameter;

    fn prim(h: f64) -> UnitPrimitive {
        let k = VolterraKernel::new(HurstParameter::new(h).unwrap(), QuadratureConfig::default());
        UnitPrimitive::build(k).unwrap()
    }

    #[test]
    fn shell_decomposition() {
        let (k, z) = shell(0.375).unwrap();
        assert_eq!(k, 1);
        assert!((z - 0.0).abs() < 1e-15);
        let (k, z) = shell(0.25).unwrap();
        assert_eq!(k, 1);
        assert_eq!(z, -1.0);
        let (k, z) = shell(0.1875).unwrap();
        assert_eq!(k, 2);
        assert_eq!(z, 0.0);
        assert!(shell(0.5).is_none());
    }

    #[test]
    fn masses_agree_with_direct_cell_integrals() {
        for h in [0.25, 0.75] {
            let p = prim(h);
            let k = *p.kernel();
            let den = 7u64;
            let mut row = vec![0.0; den as usize];
            p.row_masses(den, &mut row);
            for i in 0..den {
                let direct = k
                    .cell_integral(1.0, i as f64 / den as f64, (i + 1) as f64 / den as f64)
                    .unwrap();
                let via = p.mass(i, i + 1, den);
                assert!(
                    ((via - direct) / direct).abs() < 1e-10,
                    "H={h} i={i}: {via} vs {direct}"
                );
                assert!(((row[i as usize] - direct) / direct).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn interpolant_matches_quadrature_inside_shells() {
        let p = prim(0.3);
        let k = p.kernel().inner();
        for x in [1e-9, 3.3e-4, 0.013, 0.2, 0.4999] {
            let direct = integrate_singular(
                |y, _| k.eval_gap(y, 1.0 - y).unwrap(),
                0.0,
                x,
                Endpoint::power(-0.2),
                Endpoint::REGULAR,
                &QuadratureConfig::default().tightened(1e-13, 1e-17),
            )
            .unwrap();
            assert!(((p.left(x) - direct) / direct).abs() < 1e-11, "x={x}");
        }
    }
}
