//! Provider price lists and the per-dataset cost attributes derived from them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ddg::{Ddg, HOME};

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("failed to parse catalog: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("failed to read catalog {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("rate `{field}` of `{name}` is negative or not finite ({value})")]
    NegativeRate {
        name: String,
        field: &'static str,
        value: f64,
    },
    #[error("catalog lists no providers")]
    EmptyCatalog,
}

/// A storage service: monthly storage price and outbound transfer price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provider {
    pub name: String,
    pub storage_per_gb_month: f64,
    pub transfer_out_per_gb: f64,
}

impl Provider {
    pub fn new(
        name: impl Into<String>,
        storage_per_gb_month: f64,
        transfer_out_per_gb: f64,
    ) -> Self {
        Self {
            name: name.into(),
            storage_per_gb_month,
            transfer_out_per_gb,
        }
    }

    pub fn s3() -> Self {
        Self::new("s3", 0.15, 0.12)
    }

    pub fn service_one() -> Self {
        Self::new("service-one", 0.10, 0.01)
    }

    pub fn service_two() -> Self {
        Self::new("service-two", 0.05, 0.06)
    }

    pub fn glacier() -> Self {
        Self::new("glacier", 0.01, 0.02)
    }

    pub fn haylix() -> Self {
        Self::new("haylix", 0.12, 0.046)
    }
}

/// Compute price plus the ordered storage services. The first provider is
/// the home service where the application runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderCatalog {
    pub compute_per_cpu_hour: f64,
    pub providers: Vec<Provider>,
}

/// EC2 on-demand compute price used by all preset catalogs.
pub const DEFAULT_COMPUTE_PER_CPU_HOUR: f64 = 0.10;

impl ProviderCatalog {
    pub fn new(compute_per_cpu_hour: f64, providers: Vec<Provider>) -> Result<Self, PricingError> {
        let catalog = Self {
            compute_per_cpu_hour,
            providers,
        };
        catalog.check()?;
        Ok(catalog)
    }

    pub fn from_json(text: &str) -> Result<Self, PricingError> {
        let catalog: Self = serde_json::from_str(text)?;
        catalog.check()?;
        Ok(catalog)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PricingError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PricingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    fn check(&self) -> Result<(), PricingError> {
        if self.providers.is_empty() {
            return Err(PricingError::EmptyCatalog);
        }
        let rate_ok = |v: f64| v >= 0.0 && v.is_finite();
        if !rate_ok(self.compute_per_cpu_hour) {
            return Err(PricingError::NegativeRate {
                name: "catalog".into(),
                field: "compute_per_cpu_hour",
                value: self.compute_per_cpu_hour,
            });
        }
        for p in &self.providers {
            for (field, value) in [
                ("storage_per_gb_month", p.storage_per_gb_month),
                ("transfer_out_per_gb", p.transfer_out_per_gb),
            ] {
                if !rate_ok(value) {
                    return Err(PricingError::NegativeRate {
                        name: p.name.clone(),
                        field,
                        value,
                    });
                }
            }
        }
        Ok(())
    }

    /// Number of storage services `m`.
    pub fn len(&self) -> usize {
        self.providers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.providers.is_empty()
    }

    pub fn home(&self) -> &Provider {
        &self.providers[0]
    }

    /// The catalog reduced to its home provider.
    pub fn home_only(&self) -> Self {
        self.prefix(1)
    }

    /// The first `k` providers, home included.
    pub fn prefix(&self, k: usize) -> Self {
        assert!(
            (1..=self.len()).contains(&k),
            "prefix of {k} out of 1..={}",
            self.len()
        );
        Self {
            compute_per_cpu_hour: self.compute_per_cpu_hour,
            providers: self.providers[..k].to_vec(),
        }
    }

    pub fn with_provider(mut self, provider: Provider) -> Self {
        self.providers.push(provider);
        self
    }

    pub fn s3_only() -> Self {
        Self {
            compute_per_cpu_hour: DEFAULT_COMPUTE_PER_CPU_HOUR,
            providers: vec![Provider::s3()],
        }
    }

    pub fn s3_glacier() -> Self {
        Self::s3_only().with_provider(Provider::glacier())
    }

    pub fn s3_haylix() -> Self {
        Self::s3_only().with_provider(Provider::haylix())
    }

    /// S3 plus the two representative storage services.
    pub fn s3_two_services() -> Self {
        Self::s3_only()
            .with_provider(Provider::service_one())
            .with_provider(Provider::service_two())
    }
}

/// A graph annotated with generation cost `x`, storage rates `y` and
/// transfer-to-home costs `z` for every dataset and provider.
///
/// Providers are addressed by their 1-based strategy flag; `z(i, 1)` is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CostedDdg {
    ddg: Ddg,
    catalog: ProviderCatalog,
    x: Vec<f64>,
    y: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
}

pub fn derive_costs(ddg: Ddg, catalog: ProviderCatalog) -> CostedDdg {
    let mut x = Vec::with_capacity(ddg.len());
    let mut y = Vec::with_capacity(ddg.len());
    let mut z = Vec::with_capacity(ddg.len());
    for d in ddg.datasets() {
        x.push(d.gen_time_hours * catalog.compute_per_cpu_hour);
        y.push(
            catalog
                .providers
                .iter()
                .map(|p| d.size_gb * p.storage_per_gb_month)
                .collect(),
        );
        z.push(
            catalog
                .providers
                .iter()
                .enumerate()
                .map(|(s, p)| {
                    if s == 0 {
                        0.0
                    } else {
                        d.size_gb * p.transfer_out_per_gb
                    }
                })
                .collect(),
        );
    }
    CostedDdg {
        ddg,
        catalog,
        x,
        y,
        z,
    }
}

impl CostedDdg {
    pub fn ddg(&self) -> &Ddg {
        &self.ddg
    }

    pub fn catalog(&self) -> &ProviderCatalog {
        &self.catalog
    }

    pub fn len(&self) -> usize {
        self.ddg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ddg.is_empty()
    }

    pub fn providers(&self) -> usize {
        self.catalog.len()
    }

    #[inline]
    pub fn x(&self, idx: usize) -> f64 {
        self.x[idx]
    }

    #[inline]
    pub fn y(&self, idx: usize, provider: u32) -> f64 {
        debug_assert!(provider >= HOME);
        self.y[idx][provider as usize - 1]
    }

    #[inline]
    pub fn z(&self, idx: usize, provider: u32) -> f64 {
        debug_assert!(provider >= HOME);
        self.z[idx][provider as usize - 1]
    }

    #[inline]
    pub fn v(&self, idx: usize) -> f64 {
        self.ddg.dataset(idx).uses_per_month
    }

    /// Same graph priced with the home provider only.
    pub fn home_only(&self) -> Self {
        self.prefix(1)
    }

    /// The same graph priced with only the first `k` providers. Flags valid
    /// here cost exactly the same under the full catalog.
    pub fn prefix(&self, k: usize) -> Self {
        derive_costs(self.ddg.clone(), self.catalog.prefix(k))
    }

    pub fn into_parts(self) -> (Ddg, ProviderCatalog) {
        (self.ddg, self.catalog)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddg::Dataset;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn loads_catalogs_in_declared_order() {
        let s3 = r#"{"compute_per_cpu_hour": 0.10,
            "providers": [{"name": "s3", "storage_per_gb_month": 0.15, "transfer_out_per_gb": 0.12}]}"#;
        let c = ProviderCatalog::from_json(s3).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c, ProviderCatalog::s3_only());

        let glacier = r#"{"compute_per_cpu_hour": 0.10, "providers": [
            {"name": "s3", "storage_per_gb_month": 0.15, "transfer_out_per_gb": 0.12},
            {"name": "glacier", "storage_per_gb_month": 0.01, "transfer_out_per_gb": 0.02}]}"#;
        let c = ProviderCatalog::from_json(glacier).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.providers[1].name, "glacier");
        assert_eq!(c, ProviderCatalog::s3_glacier());

        let haylix = ProviderCatalog::s3_haylix();
        let round = ProviderCatalog::from_json(&haylix.to_json()).unwrap();
        assert_eq!(round, haylix);
        assert_eq!(round.providers[1].storage_per_gb_month, 0.12);
        assert_eq!(round.providers[1].transfer_out_per_gb, 0.046);
    }

    #[test]
    fn rejects_bad_catalogs() {
        assert!(matches!(
            ProviderCatalog::from_json("{not json"),
            Err(PricingError::Parse(_))
        ));
        assert!(matches!(
            ProviderCatalog::from_json(r#"{"compute_per_cpu_hour": 0.1, "providers": []}"#),
            Err(PricingError::EmptyCatalog)
        ));
        let neg = r#"{"compute_per_cpu_hour": 0.1, "providers": [
            {"name": "x", "storage_per_gb_month": -0.1, "transfer_out_per_gb": 0.0}]}"#;
        assert!(matches!(
            ProviderCatalog::from_json(neg),
            Err(PricingError::NegativeRate {
                field: "storage_per_gb_month",
                ..
            })
        ));
        assert!(matches!(
            ProviderCatalog::new(-1.0, vec![Provider::s3()]),
            Err(PricingError::NegativeRate {
                field: "compute_per_cpu_hour",
                ..
            })
        ));
    }

    #[test]
    fn derives_worked_attributes() {
        let ddg = Ddg::new(vec![
            Dataset::new("d1", 10.0, 10.0, 1.0),
            Dataset::new("d0", 3.0, 0.0, 1.0),
        ])
        .unwrap();
        let c = derive_costs(ddg, ProviderCatalog::s3_glacier());
        assert!(close(c.x(0), 1.0));
        assert!(close(c.y(0, 1), 1.5));
        assert!(close(c.y(0, 2), 0.1));
        assert_eq!(c.z(0, 1), 0.0);
        assert!(close(c.z(0, 2), 0.2));
        assert_eq!(c.x(1), 0.0);
        assert_eq!(c.z(1, 1), 0.0);
    }

    #[test]
    fn derived_costs_scale_linearly() {
        let base = Ddg::new(vec![Dataset::new("a", 7.5, 33.0, 0.4)]).unwrap();
        let doubled = Ddg::new(vec![Dataset::new("a", 15.0, 66.0, 0.4)]).unwrap();
        let cat = ProviderCatalog::s3_two_services();
        let a = derive_costs(base, cat.clone());
        let b = derive_costs(doubled, cat);
        assert!(close(b.x(0), 2.0 * a.x(0)));
        for s in 1..=3 {
            assert!(close(b.y(0, s), 2.0 * a.y(0, s)));
            assert!(close(b.z(0, s), 2.0 * a.z(0, s)));
        }
    }
}
