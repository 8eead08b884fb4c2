use serde::Serialize;

/// Squared distance between two coupled members whose shifts differ by `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub delta: f64,
    pub dist_sq: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NuRateReport {
    pub points: Vec<RatePoint>,
    /// Least-squares slope of `ln dist²` against `ln |ν − ν′|`.
    pub alpha: Option<f64>,
    pub intercept: Option<f64>,
    /// Mean of `dist² / (|ν − ν′|·‖x‖_{L²})`.
    pub fitted_c: f64,
    /// Points with `ν = ν′`; their distance must vanish.
    pub coincident: usize,
    pub coincident_max_dist_sq: f64,
}

/// Fits `dist² ≈ C|ν − ν′|^α` over points with `ν ≠ ν′` and positive distance.
pub fn nu_rate_check(points: &[RatePoint], datum_l2: f64) -> NuRateReport {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.delta > 0.0 && p.dist_sq > 0.0)
        .map(|p| (p.delta.ln(), p.dist_sq.ln()))
        .collect();
    let (alpha, intercept) = if usable.len() >= 2 {
        let n = usable.len() as f64;
        let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
        let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            let a = sxy / sxx;
            (Some(a), Some(my - a * mx))
        } else {
            (None, None)
        }
    } else {
        (None, None)
    };
    let positive: Vec<&RatePoint> = points.iter().filter(|p| p.delta > 0.0).collect();
    let fitted_c = if positive.is_empty() || datum_l2 == 0.0 {
        0.0
    } else {
        positive.iter().map(|p| p.dist_sq / (p.delta * datum_l2)).sum::<f64>() / positive.len() as f64
    };
    let coincident: Vec<&RatePoint> = points.iter().filter(|p| p.delta == 0.0).collect();
    NuRateReport {
        points: points.to_vec(),
        alpha,
        intercept,
        fitted_c,
        coincident: coincident.len(),
        coincident_max_dist_sq: coincident.iter().fold(0.0, |m, p| m.max(p.dist_sq)),
    }
}
