//! Evaluation and sweep reports: JSON plus a flat CSV for plotting.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evaluation::{aggregate, mean_and_sample_std, profile_regression, Aggregate, ProfileRegressionResult, SessionMetrics};
use crate::numfmt::{self, fmt17};
use crate::signal::Scheme;

/// One session's metrics at one `L_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub session_id: String,
    pub scheme: Scheme,
    pub l_x: usize,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub rrmse: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub rho: f64,
    pub n_test_cycles: usize,
    #[serde(serialize_with = "numfmt::ser_opt_f64")]
    pub age: Option<f64>,
    #[serde(serialize_with = "numfmt::ser_opt_f64")]
    pub weight: Option<f64>,
}

impl SessionEntry {
    pub fn new(session_id: &str, m: &SessionMetrics, age: Option<f64>, weight: Option<f64>) -> Self {
        Self {
            session_id: session_id.to_string(),
            scheme: m.scheme,
            l_x: m.l_x,
            rrmse: m.rrmse,
            rho: m.rho,
            n_test_cycles: m.n_test_cycles,
            age,
            weight,
        }
    }
}

/// Cross-session summary at one `L_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub l_x: usize,
    pub n: usize,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub rrmse_mean: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub rho_mean: f64,
    /// Zero when only one session contributes.
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub rrmse_std: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub rho_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileBlock {
    pub rrmse: ProfileRegressionResult,
    pub rho: ProfileRegressionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: PipelineConfig,
    /// Sorted by session id, then `L_x`.
    pub sessions: Vec<SessionEntry>,
    pub aggregate: Option<Aggregate>,
    #[serde(default)]
    pub sweep: Vec<SweepPoint>,
    pub profile: Option<ProfileBlock>,
}

fn sort_entries(entries: &mut [SessionEntry]) {
    entries.sort_by(|a, b| a.session_id.cmp(&b.session_id).then(a.l_x.cmp(&b.l_x)));
}

/// Runs both profile regressions when every session has age and weight and
/// there are enough sessions.
pub fn profile_block(entries: &[SessionEntry]) -> Result<ProfileBlock> {
    let rows: Option<Vec<(f64, f64, &SessionEntry)>> = entries
        .iter()
        .map(|e| Some((e.age?, e.weight?, e)))
        .collect();
    let rows = rows.ok_or_else(|| Error::InvalidConfig("every session needs age and weight".into()))?;
    let pick = |f: fn(&SessionEntry) -> f64| -> Vec<(f64, f64, f64)> {
        rows.iter().map(|(a, w, e)| (*a, *w, f(e))).collect()
    };
    Ok(ProfileBlock {
        rrmse: profile_regression(&pick(|e| e.rrmse))?,
        rho: profile_regression(&pick(|e| e.rho))?,
    })
}

impl Report {
    /// Per-session evaluation at a single `L_x`.
    pub fn evaluation(config: PipelineConfig, mut sessions: Vec<SessionEntry>) -> Self {
        sort_entries(&mut sessions);
        let metrics: Vec<SessionMetrics> = sessions
            .iter()
            .map(|e| SessionMetrics {
                rrmse: e.rrmse,
                rho: e.rho,
                n_test_cycles: e.n_test_cycles,
                scheme: e.scheme,
                l_x: e.l_x,
            })
            .collect();
        let aggregate = aggregate(&metrics).ok();
        let profile = profile_block(&sessions).ok();
        Self {
            config,
            sessions,
            aggregate,
            sweep: Vec::new(),
            profile,
        }
    }

    /// Per-session curves over `L_x` plus their cross-session means.
    pub fn sweep(config: PipelineConfig, mut sessions: Vec<SessionEntry>) -> Self {
        sort_entries(&mut sessions);
        let mut by_lx: BTreeMap<usize, Vec<&SessionEntry>> = BTreeMap::new();
        for e in &sessions {
            by_lx.entry(e.l_x).or_default().push(e);
        }
        let sweep = by_lx
            .into_iter()
            .map(|(l_x, es)| {
                let r: Vec<f64> = es.iter().map(|e| e.rrmse).collect();
                let p: Vec<f64> = es.iter().map(|e| e.rho).collect();
                let (rrmse_mean, rrmse_std) = mean_and_sample_std(&r);
                let (rho_mean, rho_std) = mean_and_sample_std(&p);
                let fix = |s: f64| if es.len() < 2 { 0.0 } else { s };
                SweepPoint {
                    l_x,
                    n: es.len(),
                    rrmse_mean,
                    rho_mean,
                    rrmse_std: fix(rrmse_std),
                    rho_std: fix(rho_std),
                }
            })
            .collect();
        Self {
            config,
            sessions,
            aggregate: None,
            sweep,
            profile: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Flat CSV: `session_id,scheme,l_x,rrmse,rho,age,weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("session_id,scheme,l_x,rrmse,rho,age,weight\n");
        let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
        for e in &self.sessions {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.session_id,
                e.scheme,
                e.l_x,
                fmt17(e.rrmse),
                fmt17(e.rho),
                opt(e.age),
                opt(e.weight)
            ));
        }
        out
    }
}
