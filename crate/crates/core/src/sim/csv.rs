//! CSV output with a `# key: value` metadata header.

use super::{CapacityReport, ExperimentConfig, FerRecord, RateLossRow, RcuRow, TOOL_VERSION};
use crate::error::Result;

/// Ordered `key: value` pairs written ahead of the column header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    pub entries: Vec<(String, String)>,
}

impl Metadata {
    /// Tool version, config hash, design hash, seed and mode.
    pub fn for_config(cfg: &ExperimentConfig) -> Result<Self> {
        let mut m = Self::default();
        m.push("tool_version", TOOL_VERSION);
        m.push("config_hash", cfg.config_hash()?);
        m.push("design_hash", cfg.design_hash()?);
        m.push("seed", cfg.seed);
        m.push("mode", serde_json::to_value(cfg.mode)?.as_str().unwrap_or_default());
        if let Some(spec) = cfg.crc()? {
            m.push("crc", format!("width {} poly {:#x}", spec.width, spec.poly));
        }
        Ok(m)
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string().replace('\n', " ")));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub metadata: Metadata,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata.entries {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn fer(metadata: Metadata, records: &[FerRecord]) -> Self {
        Self {
            metadata,
            header: vec![
                "snr_db", "frames", "frame_errors", "bit_errors", "fer", "ber", "ci_low", "ci_high",
                "max_frames_reached", "wall_time_s",
            ],
            rows: records
                .iter()
                .map(|r| {
                    vec![
                        r.snr_db.to_string(),
                        r.frames.to_string(),
                        r.frame_errors.to_string(),
                        r.bit_errors.to_string(),
                        r.fer.to_string(),
                        r.ber.to_string(),
                        r.ci_low.to_string(),
                        r.ci_high.to_string(),
                        r.max_frames_reached.to_string(),
                        format!("{:.3}", r.wall_time_s),
                    ]
                })
                .collect(),
        }
    }

    pub fn rate_loss(metadata: Metadata, rows: &[RateLossRow]) -> Self {
        Self {
            metadata,
            header: vec![
                "block_len", "data_positions", "mlhy_delta", "mlhy_entropy", "ccdm_delta", "ccdm_input_bits",
                "frames", "construction_trials",
            ],
            rows: rows
                .iter()
                .map(|r| {
                    vec![
                        r.block_len.to_string(),
                        r.data_positions.to_string(),
                        r.mlhy_delta.to_string(),
                        r.mlhy_entropy.to_string(),
                        r.ccdm_delta.to_string(),
                        r.ccdm_input_bits.to_string(),
                        r.frames.to_string(),
                        r.construction_trials.to_string(),
                    ]
                })
                .collect(),
        }
    }

    pub fn capacity(mut metadata: Metadata, report: &CapacityReport) -> Self {
        metadata.push("target_rate", report.target_rate);
        metadata.push("threshold_uniform_db", report.threshold_uniform_db);
        metadata.push("threshold_shaped_db", report.threshold_shaped_db);
        metadata.push("shaping_gain_db", report.shaping_gain_db());
        if let (Some(p), Some(g)) = (report.threshold_paired_db, report.asymmetry_gain_db()) {
            metadata.push("threshold_paired_db", p);
            metadata.push("asymmetry_gain_db", g);
        }
        Self {
            metadata,
            header: vec!["snr_db", "mi_uniform", "mi_shaped", "nu_shaped", "mi_paired"],
            rows: report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.snr_db.to_string(),
                        r.mi_uniform.to_string(),
                        r.mi_shaped.to_string(),
                        r.nu_shaped.to_string(),
                        r.mi_paired.map(|v| v.to_string()).unwrap_or_default(),
                    ]
                })
                .collect(),
        }
    }

    pub fn rcu(metadata: Metadata, rows: &[RcuRow]) -> Self {
        Self {
            metadata,
            header: vec!["snr_db", "bound", "std_err", "trials"],
            rows: rows
                .iter()
                .map(|r| vec![r.snr_db.to_string(), r.bound.to_string(), r.std_err.to_string(), r.trials.to_string()])
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_metadata_then_rows() {
        let mut m = Metadata::default();
        m.push("seed", 5);
        let t = CsvTable::rcu(
            m,
            &[RcuRow {
                snr_db: 10.5,
                bound: 0.01,
                std_err: 0.001,
                trials: 100,
            }],
        );
        assert_eq!(t.render(), "# seed: 5\nsnr_db,bound,std_err,trials\n10.5,0.01,0.001,100\n");
    }
}
