//! Iterative radix-2 decimation-in-time FFT over complex pairs.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    pub fn norm(self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    fn mul(self, o: Complex) -> Complex {
        Complex::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }

    fn add(self, o: Complex) -> Complex {
        Complex::new(self.re + o.re, self.im + o.im)
    }

    fn sub(self, o: Complex) -> Complex {
        Complex::new(self.re - o.re, self.im - o.im)
    }
}

/// In-place forward transform `X[k] = Σ x[n] e^{-2πikn/P}` (unnormalized).
///
/// Panics if the length is not a power of two.
pub fn fft_in_place(data: &mut [Complex]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "radix-2 FFT needs a power-of-two length, got {n}");
    if n <= 1 {
        return;
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }

    // Twiddles for the largest stage; smaller stages stride through them.
    let twiddles: Vec<Complex> = (0..n / 2)
        .map(|k| {
            let theta = -2.0 * PI * k as f64 / n as f64;
            Complex::new(theta.cos(), theta.sin())
        })
        .collect();

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let even = data[start + k];
                let odd = data[start + k + half].mul(w);
                data[start + k] = even.add(odd);
                data[start + k + half] = even.sub(odd);
            }
        }
        len <<= 1;
    }
}

/// Zero-pads `values` to the next power of two and transforms.
pub fn fft_real_padded(values: &[f64]) -> Vec<Complex> {
    let p = values.len().next_power_of_two();
    let mut buf = vec![Complex::ZERO; p];
    for (slot, &v) in buf.iter_mut().zip(values) {
        slot.re = v;
    }
    fft_in_place(&mut buf);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_point_sine() {
        let x = fft_real_padded(&[0.0, 1.0, 0.0, -1.0]);
        let mags: Vec<f64> = x.iter().map(|c| c.norm()).collect();
        assert!(mags[0].abs() < 1e-15);
        assert!((mags[1] - 2.0).abs() < 1e-15);
        assert!(mags[2].abs() < 1e-15);
        assert!((mags[3] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_is_exact_dc() {
        let x = fft_real_padded(&[3.0; 16]);
        assert_eq!(x[0].re, 48.0);
        assert!(x[1..].iter().all(|c| c.re == 0.0 && c.im == 0.0));
    }

    #[test]
    #[should_panic]
    fn rejects_non_power_of_two() {
        let mut d = vec![Complex::ZERO; 6];
        fft_in_place(&mut d);
    }
}
