//! Separable Gaussian smoothing and FFT low-pass filtering of 2-D planes.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Half-sample reflection (`d c b a | a b c d | d c b a`).
#[inline]
fn reflect(mut i: isize, n: isize) -> usize {
    let period = 2 * n;
    i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

/// Normalized Gaussian kernel with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

pub fn gaussian_blur_plane_f64(plane: &[f64], height: usize, width: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return plane.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                acc += kv * row[reflect(x as isize + j as isize - r, width as isize)];
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let yy = reflect(y as isize + j as isize - r, height as isize);
                acc += kv * tmp[yy * width + x];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

pub fn gaussian_blur_plane(plane: &[f32], height: usize, width: usize, sigma: f64) -> Vec<f32> {
    let p: Vec<f64> = plane.iter().map(|&v| f64::from(v)).collect();
    gaussian_blur_plane_f64(&p, height, width, sigma)
        .into_iter()
        .map(|v| v as f32)
        .collect()
}

/// Ideal low-pass: keeps 2-D frequencies with normalized radius
/// `sqrt(fx^2 + fy^2) <= cutoff * 0.5` (cycles/pixel, Nyquist = 0.5).
pub fn lowpass_plane(plane: &[f64], height: usize, width: usize, cutoff: f64) -> Vec<f64> {
    if cutoff >= 1.0 {
        return plane.to_vec();
    }
    let mut planner = FftPlanner::<f64>::new();
    let row_fwd = planner.plan_fft_forward(width);
    let col_fwd = planner.plan_fft_forward(height);
    let row_inv = planner.plan_fft_inverse(width);
    let col_inv = planner.plan_fft_inverse(height);

    let mut buf: Vec<Complex<f64>> = plane.iter().map(|&v| Complex::new(v, 0.0)).collect();
    for row in buf.chunks_exact_mut(width) {
        row_fwd.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            col[y] = buf[y * width + x];
        }
        col_fwd.process(&mut col);
        for y in 0..height {
            col[y] = if passes(x, y, height, width, cutoff) {
                col[y]
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        col_inv.process(&mut col);
        for y in 0..height {
            buf[y * width + x] = col[y];
        }
    }
    for row in buf.chunks_exact_mut(width) {
        row_inv.process(row);
    }
    let scale = 1.0 / (height * width) as f64;
    buf.into_iter().map(|c| c.re * scale).collect()
}

fn passes(x: usize, y: usize, height: usize, width: usize, cutoff: f64) -> bool {
    let freq = |i: usize, n: usize| {
        let i = if i > n / 2 { i as f64 - n as f64 } else { i as f64 };
        i / n as f64
    };
    let fx = freq(x, width);
    let fy = freq(y, height);
    (fx * fx + fy * fy).sqrt() <= cutoff * 0.5 + 1e-12
}
