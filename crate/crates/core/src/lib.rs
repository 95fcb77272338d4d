//! Toolkit that turns statechart models and structured requirements into
//! signal-grounded Gherkin scenarios and executes them against a simulated
//! vehicle-signal broker hosting a reference child presence detection
//! system.
//!
//! The pipeline, end to end:
//!
//! 1. [`statechart`] parses the chart DSL and extracts candidate signal
//!    names.
//! 2. [`mapper`] maps those names onto [`vss_catalog`] paths, asking for
//!    clarification when nothing matches confidently.
//! 3. [`testgen`] plans scenarios from requirement bindings and emits a
//!    [`gherkin`] feature.
//! 4. [`runner`] binds the steps and executes them on a [`broker`] with the
//!    [`cpds`] reference system attached, producing a report in virtual
//!    time.
//!
//! With the default `parallel` feature, batch signal mapping and
//! multi-scenario execution spread across a rayon pool; without it every
//! code path is sequential.

pub mod assets;
pub mod broker;
pub mod cpds;
pub mod gherkin;
pub mod mapper;
pub mod runner;
pub mod statechart;
pub mod testgen;
pub mod value;
pub mod vss_catalog;

#[cfg(test)]
pub(crate) mod test_support {
    use std::collections::BTreeMap;
    use std::sync::Arc;

    use crate::assets;
    use crate::vss_catalog::{load_catalog, Catalog, CatalogSource};

    pub fn core_source() -> CatalogSource {
        CatalogSource::new("vss_core.catalog", assets::VSS_CORE_CATALOG)
    }

    pub fn overlay_source() -> CatalogSource {
        CatalogSource::new("cpds_overlay.catalog", assets::CPDS_OVERLAY_CATALOG)
    }

    pub fn shipped_catalog() -> Catalog {
        load_catalog(&[core_source(), overlay_source()]).expect("shipped catalogs load")
    }

    pub fn shipped_catalog_arc() -> Arc<Catalog> {
        Arc::new(shipped_catalog())
    }

    pub fn read(name: &str) -> String {
        match name {
            "vss_core.catalog" => assets::VSS_CORE_CATALOG.to_string(),
            "cpds_overlay.catalog" => assets::CPDS_OVERLAY_CATALOG.to_string(),
            other => panic!("unknown test data file {other}"),
        }
    }

    pub fn read_golden_feature() -> String {
        assets::GENERATED_FEATURE_GOLDEN.to_string()
    }

    /// Full raw-name -> path table for the shipped chart, as the offline
    /// mapper with shipped overrides produces it.
    pub fn shipped_mappings() -> BTreeMap<String, String> {
        let catalog = shipped_catalog();
        let chart = crate::statechart::parse_statechart(assets::CPDS_CHART).unwrap();
        let raws: Vec<String> = crate::statechart::extract_signals(&chart)
            .into_iter()
            .map(|s| s.name)
            .collect();
        let overrides = crate::mapper::parse_overrides(assets::CPDS_OVERRIDES).unwrap();
        crate::mapper::map_signals_seq(&raws, &catalog, 0.5, &overrides)
            .unwrap()
            .into_iter()
            .map(|outcome| match outcome {
                crate::mapper::MapOutcome::Mapped(m) => (m.raw_name, m.path),
                crate::mapper::MapOutcome::NeedsClarification(c) => {
                    panic!("shipped inputs must map fully, `{}` did not", c.raw_name)
                }
            })
            .collect()
    }
}
