//! Measurement vocabulary: squared error, correlations, cross entropy,
//! calibration curves, quartile summaries and dataset attributes.

use serde::{Deserialize, Serialize};

use crate::dataset::FullDataset;
use crate::error::{check_len, Error, Result};

pub fn squared_error(estimate: f64, truth: f64) -> f64 {
    (estimate - truth).powi(2)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson product-moment correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len("b", a.len(), b.len())?;
    if a.len() < 2 {
        return Err(Error::InvalidArgument("pearson needs at least two points".into()));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Row means and grand mean of the pairwise distance matrix `|v_i - v_j|`.
fn distance_margins(v: &[f64]) -> (Vec<f64>, f64) {
    let n = v.len();
    let rows: Vec<f64> = v
        .iter()
        .map(|&x| v.iter().map(|&y| (x - y).abs()).sum::<f64>() / n as f64)
        .collect();
    let grand = mean(&rows);
    (rows, grand)
}

/// Sample distance correlation from double-centred distance matrices.
///
/// The centred entries are recomputed on the fly, so memory stays linear.
/// Returns 0 when either distance variance vanishes (constant input).
pub fn distance_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len("b", a.len(), b.len())?;
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument("distance correlation needs at least two points".into()));
    }
    let (ra, ga) = distance_margins(a);
    let (rb, gb) = distance_margins(b);
    let (mut vab, mut vaa, mut vbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let ca = (a[i] - a[j]).abs() - ra[i] - ra[j] + ga;
            let cb = (b[i] - b[j]).abs() - rb[i] - rb[j] + gb;
            vab += ca * cb;
            vaa += ca * ca;
            vbb += cb * cb;
        }
    }
    if vaa <= 0.0 || vbb <= 0.0 {
        return Ok(0.0);
    }
    let r2 = (vab / (vaa * vbb).sqrt()).max(0.0);
    Ok(r2.sqrt().min(1.0))
}

/// Mean negative log-likelihood of `z` under `p`, in nats.
pub fn binary_cross_entropy(p: &[f64], z: &[bool]) -> Result<f64> {
    check_len("z", p.len(), z.len())?;
    if p.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for (index, (&pi, &zi)) in p.iter().zip(z).enumerate() {
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::PropensityDomain { index, value: pi });
        }
        total -= if zi { pi.ln() } else { (1.0 - pi).ln() };
    }
    Ok(total / p.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub mean_predicted_p: f64,
    pub mean_treated_rate: f64,
    pub count: usize,
}

/// Nonempty equal-width bins over `[0, 1]`, in increasing order of `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub bins: Vec<CalibrationBin>,
}

impl CalibrationCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mean_predicted_p,mean_treated_rate,count\n");
        for b in &self.bins {
            out.push_str(&format!("{},{},{}\n", b.mean_predicted_p, b.mean_treated_rate, b.count));
        }
        out
    }
}

pub fn calibration_curve(p: &[f64], z: &[bool], n_bins: usize) -> Result<CalibrationCurve> {
    check_len("z", p.len(), z.len())?;
    if n_bins == 0 {
        return Err(Error::InvalidArgument("n_bins must be at least 1".into()));
    }
    let mut sums = vec![(0.0, 0.0, 0usize); n_bins];
    for (&pi, &zi) in p.iter().zip(z) {
        let k = ((pi * n_bins as f64).floor() as usize).min(n_bins - 1);
        let s = &mut sums[k];
        s.0 += pi;
        s.1 += if zi { 1.0 } else { 0.0 };
        s.2 += 1;
    }
    let bins = sums
        .into_iter()
        .filter(|s| s.2 > 0)
        .map(|(sp, sz, c)| CalibrationBin {
            mean_predicted_p: sp / c as f64,
            mean_treated_rate: sz / c as f64,
            count: c,
        })
        .collect();
    Ok(CalibrationCurve { bins })
}

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean, quartiles and mean wall time of a set of runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub mean_time: f64,
    pub count: usize,
}

pub fn quartile_summary(values: &[f64], times: &[f64]) -> Result<RunSummary> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean_time = if times.is_empty() { 0.0 } else { mean(times) };
    Ok(RunSummary {
        mean: mean(values),
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        mean_time,
        count: values.len(),
    })
}

/// The dataset-attribute row: size, variables, treated %, BCE and outcome correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetAttributes {
    pub size: usize,
    pub variables: usize,
    pub treated_pct: f64,
    pub bce: f64,
    pub corr_y1_p: f64,
    pub corr_y0_p: f64,
}

impl DatasetAttributes {
    pub const CSV_HEADER: &'static str = "Size,Variables,Treated %,BCE,Corr(y1 p),Corr(y0 p)";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{:.1},{:.3},{:.3},{:.3}",
            self.size, self.variables, self.treated_pct, self.bce, self.corr_y1_p, self.corr_y0_p
        )
    }
}

pub fn dataset_attributes(full: &FullDataset, z: &[bool], d: usize) -> Result<DatasetAttributes> {
    check_len("z", full.len(), z.len())?;
    if z.is_empty() {
        return Err(Error::EmptyInput);
    }
    let treated = z.iter().filter(|&&t| t).count();
    Ok(DatasetAttributes {
        size: full.len(),
        variables: d,
        treated_pct: 100.0 * treated as f64 / z.len() as f64,
        bce: binary_cross_entropy(full.propensity(), z)?,
        corr_y1_p: pearson(full.y1(), full.propensity())?,
        corr_y0_p: pearson(full.y0(), full.propensity())?,
    })
}
