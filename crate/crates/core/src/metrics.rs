//! Image and video quality metrics (MSE, SSIM) and evaluation reports.
//!
//! SSIM here is fully parameterized and echoed into every report so scores
//! stay comparable across implementations: Gaussian-weighted local windows
//! (default 11x11, sigma 1.5), K1 = 0.01, K2 = 0.03, valid-mode filtering
//! (no padding), uniform average of the local SSIM map.

use crate::ensure;
use crate::error::Result;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// SSIM parameterization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03, data_range: 1.0 }
    }
}

/// Mean squared error over all pixels.
pub fn mse(pred: &Array2<f32>, gt: &Array2<f32>) -> Result<f64> {
    ensure!(
        pred.dim() == gt.dim(),
        "shape mismatch: {:?} vs {:?}",
        pred.dim(),
        gt.dim()
    );
    let n = pred.len() as f64;
    let sum: f64 = pred
        .iter()
        .zip(gt.iter())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(sum / n)
}

/// Mean local SSIM between two grayscale images with the given settings.
pub fn ssim_with(pred: &Array2<f32>, gt: &Array2<f32>, cfg: &SsimConfig) -> Result<f64> {
    ensure!(
        pred.dim() == gt.dim(),
        "shape mismatch: {:?} vs {:?}",
        pred.dim(),
        gt.dim()
    );
    let (h, w) = pred.dim();
    ensure!(
        h >= cfg.window && w >= cfg.window,
        "image {}x{} smaller than the {} window",
        h,
        w,
        cfg.window
    );
    ensure!(cfg.window % 2 == 1, "window must be odd, got {}", cfg.window);

    let x = pred.mapv(|v| v as f64);
    let y = gt.mapv(|v| v as f64);
    let kernel = gaussian_kernel(cfg.window, cfg.sigma);

    let mu_x = filter_valid(&x, &kernel);
    let mu_y = filter_valid(&y, &kernel);
    let xx = filter_valid(&(&x * &x), &kernel);
    let yy = filter_valid(&(&y * &y), &kernel);
    let xy = filter_valid(&(&x * &y), &kernel);

    let c1 = (cfg.k1 * cfg.data_range).powi(2);
    let c2 = (cfg.k2 * cfg.data_range).powi(2);

    let (oh, ow) = mu_x.dim();
    let mut sum = 0.0;
    for i in 0..oh {
        for j in 0..ow {
            let (mx, my) = (mu_x[[i, j]], mu_y[[i, j]]);
            let sxx = xx[[i, j]] - mx * mx;
            let syy = yy[[i, j]] - my * my;
            let sxy = xy[[i, j]] - mx * my;
            let num = (2.0 * mx * my + c1) * (2.0 * sxy + c2);
            let den = (mx * mx + my * my + c1) * (sxx + syy + c2);
            sum += num / den;
        }
    }
    Ok(sum / (oh * ow) as f64)
}

/// SSIM with the default parameterization.
pub fn ssim(pred: &Array2<f32>, gt: &Array2<f32>) -> Result<f64> {
    ssim_with(pred, gt, &SsimConfig::default())
}

fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let half = (window / 2) as isize;
    let mut k: Vec<f64> = (-half..=half)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = k.iter().sum();
    for v in &mut k {
        *v /= norm;
    }
    k
}

/// Separable Gaussian filtering, valid mode: output is
/// `(H - window + 1, W - window + 1)`.
fn filter_valid(img: &Array2<f64>, kernel: &[f64]) -> Array2<f64> {
    let (h, w) = img.dim();
    let k = kernel.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    // Horizontal pass.
    let mut tmp = Array2::<f64>::zeros((h, ow));
    for i in 0..h {
        for j in 0..ow {
            let mut acc = 0.0;
            for (d, &kv) in kernel.iter().enumerate() {
                acc += kv * img[[i, j + d]];
            }
            tmp[[i, j]] = acc;
        }
    }
    // Vertical pass.
    let mut out = Array2::<f64>::zeros((oh, ow));
    for i in 0..oh {
        for j in 0..ow {
            let mut acc = 0.0;
            for (d, &kv) in kernel.iter().enumerate() {
                acc += kv * tmp[[i + d, j]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

/// Per-frame metrics for one reconstructed frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: usize,
    pub mse: f64,
    pub ssim: f64,
}

/// Per-sequence evaluation report: per-frame rows plus their means.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_frame: Vec<FrameMetrics>,
    pub mean_mse: f64,
    pub mean_ssim: f64,
    pub ssim_config: SsimConfig,
}

/// Evaluates a reconstructed video against ground truth frame by frame.
pub fn evaluate_sequence(pred: &[Array2<f32>], gt: &[Array2<f32>]) -> Result<MetricsReport> {
    ensure!(
        pred.len() == gt.len(),
        "length mismatch: {} predicted vs {} ground-truth frames",
        pred.len(),
        gt.len()
    );
    ensure!(!pred.is_empty(), "empty sequence");
    let cfg = SsimConfig::default();
    let mut per_frame = Vec::with_capacity(pred.len());
    for (i, (p, g)) in pred.iter().zip(gt.iter()).enumerate() {
        per_frame.push(FrameMetrics { frame: i, mse: mse(p, g)?, ssim: ssim_with(p, g, &cfg)? });
    }
    let n = per_frame.len() as f64;
    let mean_mse = per_frame.iter().map(|m| m.mse).sum::<f64>() / n;
    let mean_ssim = per_frame.iter().map(|m| m.ssim).sum::<f64>() / n;
    Ok(MetricsReport { per_frame, mean_mse, mean_ssim, ssim_config: cfg })
}

/// Renders labeled reports as an aligned `method x (MSE, SSIM)` table.
pub fn format_table(rows: &[(String, &MetricsReport)]) -> String {
    let name_w = rows
        .iter()
        .map(|(n, _)| n.len())
        .chain(std::iter::once("method".len()))
        .max()
        .unwrap_or(6);
    let mut out = String::new();
    out.push_str(&format!("{:<name_w$}  {:>8}  {:>8}\n", "method", "MSE↓", "SSIM↑"));
    for (name, report) in rows {
        out.push_str(&format!(
            "{:<name_w$}  {:>8.4}  {:>8.4}\n",
            name, report.mean_mse, report.mean_ssim
        ));
    }
    out
}

/// Parses a table produced by [`format_table`] back into
/// `(method, mse, ssim)` rows.
pub fn parse_table(text: &str) -> Result<Vec<(String, f64, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        ensure!(parts.len() >= 3, "bad table row: {line:?}");
        let ssim: f64 = parts[parts.len() - 1]
            .parse()
            .map_err(|e| crate::Error::Format(format!("bad SSIM field: {e}")))?;
        let mse: f64 = parts[parts.len() - 2]
            .parse()
            .map_err(|e| crate::Error::Format(format!("bad MSE field: {e}")))?;
        rows.push((parts[..parts.len() - 2].join(" "), mse, ssim));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_image(rng: &mut impl Rng, h: usize, w: usize) -> Array2<f32> {
        Array2::from_shape_fn((h, w), |_| rng.random::<f32>())
    }

    /// Direct (non-separable) SSIM evaluation used as a cross-implementation
    /// oracle. Same parameterization, naive nested loops.
    fn ssim_reference(x: &Array2<f32>, y: &Array2<f32>, cfg: &SsimConfig) -> f64 {
        let k = cfg.window;
        let half = k / 2;
        let (h, w) = x.dim();
        let kern1 = {
            let mut v: Vec<f64> = (0..k)
                .map(|i| {
                    let d = i as f64 - half as f64;
                    (-d * d / (2.0 * cfg.sigma * cfg.sigma)).exp()
                })
                .collect();
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|e| *e /= s);
            v
        };
        let c1 = (cfg.k1 * cfg.data_range).powi(2);
        let c2 = (cfg.k2 * cfg.data_range).powi(2);
        let mut sum = 0.0;
        let mut count = 0usize;
        for i0 in 0..=(h - k) {
            for j0 in 0..=(w - k) {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for di in 0..k {
                    for dj in 0..k {
                        let wgt = kern1[di] * kern1[dj];
                        let a = x[[i0 + di, j0 + dj]] as f64;
                        let b = y[[i0 + di, j0 + dj]] as f64;
                        mx += wgt * a;
                        my += wgt * b;
                        sxx += wgt * a * a;
                        syy += wgt * b * b;
                        sxy += wgt * a * b;
                    }
                }
                sxx -= mx * mx;
                syy -= my * my;
                sxy -= mx * my;
                let v = ((2.0 * mx * my + c1) * (2.0 * sxy + c2))
                    / ((mx * mx + my * my + c1) * (sxx + syy + c2));
                sum += v;
                count += 1;
            }
        }
        sum / count as f64
    }

    #[test]
    fn mse_basics() {
        let a = Array2::<f32>::from_elem((8, 8), 0.5);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let b = a.mapv(|v| v + 0.1);
        assert!((mse(&b, &a).unwrap() - 0.01).abs() < 1e-7);
        let c = Array2::<f32>::zeros((8, 9));
        assert!(mse(&a, &c).is_err());
    }

    #[test]
    fn mse_matches_arithmetic_oracle() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let a = random_image(&mut rng, 13, 17);
        let b = random_image(&mut rng, 13, 17);
        let mut acc = 0.0f64;
        for (x, y) in a.iter().zip(b.iter()) {
            acc += (*x as f64 - *y as f64).powi(2);
        }
        acc /= (13 * 17) as f64;
        assert!((mse(&a, &b).unwrap() - acc).abs() < 1e-12);
    }

    #[test]
    fn mse_translation_identity() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(6);
        let a = random_image(&mut rng, 12, 12).mapv(|v| v * 0.5);
        let b = random_image(&mut rng, 12, 12).mapv(|v| v * 0.5);
        let c = 0.25f32;
        let base = mse(&a, &b).unwrap();
        let shifted = mse(&a.mapv(|v| v + c), &b.mapv(|v| v + c)).unwrap();
        assert!((base - shifted).abs() < 1e-7);
    }

    #[test]
    fn ssim_identity_is_exactly_one() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let a = random_image(&mut rng, 16, 16);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn ssim_is_symmetric() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(8);
        let a = random_image(&mut rng, 14, 18);
        let b = random_image(&mut rng, 14, 18);
        let ab = ssim(&a, &b).unwrap();
        let ba = ssim(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn ssim_constant_images_match_closed_form() {
        // Constant vs constant reduces SSIM to the luminance term.
        let a = Array2::<f32>::from_elem((16, 16), 0.25);
        let b = Array2::<f32>::from_elem((16, 16), 0.75);
        let cfg = SsimConfig::default();
        let c1 = (cfg.k1 * cfg.data_range).powi(2);
        let want = (2.0 * 0.25 * 0.75 + c1) / (0.25f64.powi(2) + 0.75f64.powi(2) + c1);
        let got = ssim(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn ssim_matches_reference_implementation() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let cfg = SsimConfig::default();
        for _ in 0..5 {
            let a = random_image(&mut rng, 15, 13);
            let b = random_image(&mut rng, 15, 13);
            let fast = ssim_with(&a, &b, &cfg).unwrap();
            let slow = ssim_reference(&a, &b, &cfg);
            assert!((fast - slow).abs() < 1e-6, "{fast} vs {slow}");
        }
    }

    #[test]
    fn ssim_negative_pattern_against_reference() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(10);
        let a = random_image(&mut rng, 16, 16);
        let neg = a.mapv(|v| 1.0 - v);
        let cfg = SsimConfig::default();
        let fast = ssim_with(&a, &neg, &cfg).unwrap();
        let slow = ssim_reference(&a, &neg, &cfg);
        assert!((fast - slow).abs() < 1e-6);
        assert!(fast < 1.0);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = Array2::<f32>::zeros((8, 8));
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn sequence_report_means_and_table_round_trip() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let gt: Vec<Array2<f32>> = (0..3).map(|_| random_image(&mut rng, 16, 16)).collect();
        let report = evaluate_sequence(&gt, &gt).unwrap();
        assert_eq!(report.mean_mse, 0.0);
        assert_eq!(report.mean_ssim, 1.0);

        let pred: Vec<Array2<f32>> =
            gt.iter().map(|f| f.mapv(|v| (v * 0.9 + 0.05).clamp(0.0, 1.0))).collect();
        let report = evaluate_sequence(&pred, &gt).unwrap();
        let mean: f64 =
            report.per_frame.iter().map(|m| m.mse).sum::<f64>() / report.per_frame.len() as f64;
        assert!((report.mean_mse - mean).abs() < 1e-12);

        let table = format_table(&[
            ("ours".to_string(), &report),
            ("baseline".to_string(), &report),
        ]);
        let rows = parse_table(&table).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].0, "ours");
        assert!((rows[0].1 - report.mean_mse).abs() < 1e-3);
        assert!((rows[0].2 - report.mean_ssim).abs() < 1e-3);
    }
}
