use serde::Serialize;

/// Non-fatal conditions raised while estimating. Every one of these ends up
/// in the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// Quantile inversion ran past the top of the outcome grid.
    GridTooNarrow { arm: u8, theta: f64 },
    /// Conditional density estimate replaced by the floor.
    DegenerateDensity { arm: u8, y: f64, raw: f64, floor: f64 },
    /// Pilot bias constant was zero; Silverman's bandwidth used instead.
    PilotFallback { c0: f64 },
    /// Main bias constant was zero; rate-adjusted pilot used instead.
    MainFallback { c1_sum: f64 },
}

impl Warning {
    pub fn log(&self) {
        log::warn!("{self:?}");
    }
}
