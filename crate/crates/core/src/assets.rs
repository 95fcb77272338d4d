//! Shipped data files, embedded so library consumers and the CLI work
//! without knowing the repository layout. The files under `data/` remain
//! the source of truth; these constants mirror them byte for byte.

pub const VSS_CORE_CATALOG: &str = include_str!("../../../data/vss_core.catalog");
pub const CPDS_OVERLAY_CATALOG: &str = include_str!("../../../data/cpds_overlay.catalog");
pub const CPDS_CHART: &str = include_str!("../../../data/cpds.chart");
pub const CPDS_REQUIREMENTS: &str = include_str!("../../../data/cpds.reqs");
pub const CPDS_OVERRIDES: &str = include_str!("../../../data/cpds.overrides");
pub const STEP_ALIASES: &str = include_str!("../../../data/step_aliases.txt");
pub const HVAC_FEATURE: &str = include_str!("../../../data/features/cpds_hvac.feature");
pub const GENERATED_FEATURE_GOLDEN: &str = include_str!("../../../data/golden/cpds_generated.feature");

pub const PROMPT_EXTRACT: &str = include_str!("../../../data/prompts/extract.txt");
pub const PROMPT_MAP: &str = include_str!("../../../data/prompts/map.txt");
pub const PROMPT_CODEGEN: &str = include_str!("../../../data/prompts/codegen.txt");
