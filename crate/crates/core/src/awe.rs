//! Absolute wealth estimates: country wealth distributions built from GDP
//! per capita and the Gini coefficient (log-normal body, Pareto upper tail)
//! evaluated at the within-country rank of each tile's relative wealth.

use std::collections::BTreeMap;

use statrs::function::erf::erfc;

use crate::country::CountryCode;
use crate::error::{Error, Result};
use crate::tilegrid::TileId;

/// Country-level distribution inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryStats {
    pub iso2: CountryCode,
    /// Mean GDP per capita in USD.
    pub gdp_pc: f64,
    /// Gini coefficient as a fraction.
    pub gini: f64,
    pub gdp_year: Option<i32>,
    pub gini_year: Option<i32>,
}

impl CountryStats {
    pub fn new(iso2: CountryCode, gdp_pc: f64, gini: f64) -> Result<Self> {
        if !(gdp_pc > 0.0) || !gdp_pc.is_finite() {
            return Err(Error::invalid(format!("{iso2}: GDP per capita must be positive")));
        }
        if !(gini > 0.0 && gini < 1.0) {
            return Err(Error::invalid(format!("{iso2}: Gini {gini} outside (0, 1)")));
        }
        Ok(CountryStats {
            iso2,
            gdp_pc,
            gini,
            gdp_year: None,
            gini_year: None,
        })
    }

    pub fn with_years(mut self, gdp_year: Option<i32>, gini_year: Option<i32>) -> Self {
        self.gdp_year = gdp_year;
        self.gini_year = gini_year;
        self
    }
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of the standard normal CDF.
///
/// Acklam's rational approximation (relative error ~1e-9) followed by one
/// Newton step against an accurate `erfc`. Upper-half inputs are reflected
/// so that the correction never works on `1 - p` cancellation.
pub fn probit(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -probit(1.0 - p);
    }
    if p == 0.5 {
        return 0.0;
    }

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    x - (normal_cdf(x) - p) / normal_pdf(x)
}

/// Parameters of a country's wealth quantile function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcdfSpec {
    /// Pareto shape.
    pub alpha: f64,
    /// Log-normal scale.
    pub sigma: f64,
    /// Log-normal location.
    pub mu: f64,
    /// Quantile above which the Pareto tail applies.
    pub switch_quantile: f64,
}

pub fn pareto_alpha(gini: f64) -> f64 {
    (1.0 + gini) / (2.0 * gini)
}

pub fn icdf_params(stats: &CountryStats) -> Result<IcdfSpec> {
    icdf_params_from(stats.gdp_pc, stats.gini)
}

pub fn icdf_params_from(gdp_pc: f64, gini: f64) -> Result<IcdfSpec> {
    if !(gini > 0.0 && gini < 1.0) {
        return Err(Error::invalid(format!("Gini {gini} outside (0, 1)")));
    }
    if !(gdp_pc > 0.0) {
        return Err(Error::invalid("GDP per capita must be positive"));
    }
    let alpha = pareto_alpha(gini);
    let sigma = std::f64::consts::SQRT_2 * probit((gini + 1.0) / 2.0);
    Ok(IcdfSpec {
        alpha,
        sigma,
        mu: gdp_pc.ln() - sigma * sigma / 2.0,
        switch_quantile: 1.0 - 1.0 / alpha,
    })
}

impl IcdfSpec {
    fn lognormal(&self, q: f64) -> f64 {
        (self.mu + self.sigma * probit(q)).exp()
    }

    /// Pareto scale making the two branches meet at the switch quantile.
    pub fn pareto_scale(&self) -> f64 {
        let s = self.switch_quantile;
        if s <= 0.0 {
            return 0.0;
        }
        self.lognormal(s) * (1.0 - s).powf(1.0 / self.alpha)
    }

    pub fn eval(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::invalid(format!("quantile {q} outside (0, 1)")));
        }
        if q <= self.switch_quantile {
            Ok(self.lognormal(q))
        } else {
            Ok(self.pareto_scale() * (1.0 - q).powf(-1.0 / self.alpha))
        }
    }
}

/// How the rank enters the conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AweMode {
    /// `ICDF(rank) * GDP / mean(ICDF(rank_j))`: mean AWE equals GDP.
    #[default]
    IcdfOfRank,
    /// `rank * GDP / mean(ICDF(rank_j))`, the displayed equation taken literally.
    Literal,
}

/// Mid-rank quantiles `(r - 0.5) / n`, ties sharing their average rank.
pub fn mid_rank_quantiles(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their mean.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = (rank - 0.5) / n as f64;
        }
        start = end;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AweEstimate {
    pub tile: TileId,
    pub country: CountryCode,
    pub rwi: f64,
    pub rank_quantile: f64,
    pub awe_usd: f64,
}

/// Converts relative wealth to absolute wealth country by country.
/// Output order matches the input.
pub fn rwi_to_awe(
    tiles: &[(TileId, CountryCode, f64)],
    stats: &BTreeMap<CountryCode, CountryStats>,
    mode: AweMode,
) -> Result<Vec<AweEstimate>> {
    let mut groups: BTreeMap<CountryCode, Vec<usize>> = BTreeMap::new();
    for (i, (_, c, rwi)) in tiles.iter().enumerate() {
        if !rwi.is_finite() {
            return Err(Error::invalid(format!("non-finite RWI for tile {}", tiles[i].0)));
        }
        groups.entry(*c).or_default().push(i);
    }
    let mut out: Vec<Option<AweEstimate>> = vec![None; tiles.len()];
    for (country, members) in groups {
        let cs = stats
            .get(&country)
            .ok_or_else(|| Error::MissingCountryStats(country.to_string()))?;
        let spec = icdf_params(cs)?;
        let values: Vec<f64> = members.iter().map(|&i| tiles[i].2).collect();
        let quantiles = mid_rank_quantiles(&values);
        let raw = quantiles
            .iter()
            .map(|&q| spec.eval(q))
            .collect::<Result<Vec<_>>>()?;
        let mean_raw = raw.iter().sum::<f64>() / raw.len() as f64;
        for ((&i, &q), &r) in members.iter().zip(&quantiles).zip(&raw) {
            let numerator = match mode {
                AweMode::IcdfOfRank => r,
                AweMode::Literal => q,
            };
            out[i] = Some(AweEstimate {
                tile: tiles[i].0,
                country,
                rwi: tiles[i].2,
                rank_quantile: q,
                awe_usd: numerator * cs.gdp_pc / mean_raw,
            });
        }
    }
    Ok(out.into_iter().map(|e| e.expect("every tile grouped")).collect())
}

/// One log-spaced histogram bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionBin {
    pub lower_usd: f64,
    pub upper_usd: f64,
    pub weight: f64,
}

/// Weighted histogram of wealth over equal-width bins in log space.
pub fn export_distribution(values: &[f64], weights: &[f64], n_bins: usize) -> Result<Vec<DistributionBin>> {
    if values.len() != weights.len() {
        return Err(Error::Arity {
            expected: values.len(),
            got: weights.len(),
        });
    }
    if values.len() < 2 {
        return Err(Error::TooFewRows {
            context: "wealth distribution".into(),
            needed: 2,
            got: values.len(),
        });
    }
    if n_bins == 0 {
        return Err(Error::invalid("need at least one bin"));
    }
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("wealth values must be positive and finite"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("weights must be nonnegative"));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(vec![DistributionBin {
            lower_usd: lo.exp(),
            upper_usd: hi.exp(),
            weight: weights.iter().sum(),
        }]);
    }
    let width = (hi - lo) / n_bins as f64;
    let mut bins: Vec<DistributionBin> = (0..n_bins)
        .map(|b| DistributionBin {
            lower_usd: (lo + width * b as f64).exp(),
            upper_usd: if b + 1 == n_bins {
                hi.exp()
            } else {
                (lo + width * (b + 1) as f64).exp()
            },
            weight: 0.0,
        })
        .collect();
    for (l, w) in logs.iter().zip(weights) {
        let b = (((l - lo) / width).floor() as usize).min(n_bins - 1);
        bins[b].weight += w;
    }
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cc(s: &str) -> CountryCode {
        CountryCode::new(s).unwrap()
    }

    #[test]
    fn closed_forms_at_half() {
        let spec = icdf_params_from(1000.0, 0.5).unwrap();
        assert_eq!(spec.alpha, 1.5);
        assert!((spec.switch_quantile - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn togo_alpha() {
        assert!((pareto_alpha(0.431) - 1.431 / 0.862).abs() < 1e-15);
        assert!((pareto_alpha(0.431) - 1.6601).abs() < 1e-4);
    }

    #[test]
    fn sigma_vanishes_with_gini() {
        let spec = icdf_params_from(1000.0, 1e-12).unwrap();
        assert!(spec.sigma.abs() < 1e-10);
    }

    #[test]
    fn degenerate_spread_is_constant() {
        let spec = IcdfSpec {
            alpha: 1e9,
            sigma: 0.0,
            mu: 2.0,
            switch_quantile: 0.999_999,
        };
        for q in [0.01, 0.5, 0.9] {
            assert_eq!(spec.eval(q).unwrap(), 2f64.exp());
        }
    }

    #[test]
    fn quantile_bounds() {
        let spec = icdf_params_from(1000.0, 0.4).unwrap();
        assert!(spec.eval(0.0).is_err());
        assert!(spec.eval(1.0).is_err());
        assert!(icdf_params_from(1000.0, 1.0).is_err());
        assert!(icdf_params_from(1000.0, 0.0).is_err());
    }

    #[test]
    fn mid_ranks_share_ties() {
        let q = mid_rank_quantiles(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(q, vec![0.75, 0.125, 0.75, 0.375]);
        assert_eq!(mid_rank_quantiles(&[5.0]), vec![0.5]);
    }

    #[test]
    fn single_tile_gets_gdp() {
        let t = TileId::new(14, 1, 1).unwrap();
        let stats: BTreeMap<_, _> = [(cc("TG"), CountryStats::new(cc("TG"), 900.0, 0.43).unwrap())].into();
        let awe = rwi_to_awe(&[(t, cc("TG"), 0.3)], &stats, AweMode::IcdfOfRank).unwrap();
        assert!((awe[0].awe_usd - 900.0).abs() < 1e-9 * 900.0);
    }

    #[test]
    fn missing_stats_error() {
        let t = TileId::new(14, 1, 1).unwrap();
        let err = rwi_to_awe(&[(t, cc("TG"), 0.3)], &BTreeMap::new(), AweMode::IcdfOfRank);
        assert!(matches!(err, Err(Error::MissingCountryStats(_))));
    }

    #[test]
    fn histogram_contracts() {
        let equal = export_distribution(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0], 10).unwrap();
        assert_eq!(equal.len(), 1);
        assert_eq!(equal[0].weight, 6.0);

        let values = [10.0, 200.0, 3000.0, 45.0, 45.0, 999.0];
        let weights = [1.0, 0.5, 2.0, 3.0, 1.5, 0.25];
        let bins = export_distribution(&values, &weights, 7).unwrap();
        let total: f64 = bins.iter().map(|b| b.weight).sum();
        assert!((total - weights.iter().sum::<f64>()).abs() < 1e-12);
        let doubled: Vec<f64> = weights.iter().map(|w| w * 2.0).collect();
        let bins2 = export_distribution(&values, &doubled, 7).unwrap();
        for (a, b) in bins.iter().zip(&bins2) {
            assert_eq!(b.weight, 2.0 * a.weight);
        }
        assert!(export_distribution(&[1.0], &[1.0], 3).is_err());
        assert!(export_distribution(&[0.0, 1.0], &[1.0, 1.0], 3).is_err());
    }
}
