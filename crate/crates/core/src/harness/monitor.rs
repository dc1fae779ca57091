//! Weighted `L^{ρq}` norms along a run and a sticky blow-up flag.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::fields::{lq_norm, ScalarField, VectorField};

use super::config::MonitorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub weighted_n: f64,
    pub weighted_c: f64,
    pub weighted_u: f64,
    pub norm_n: f64,
    pub norm_c: f64,
    pub norm_u: f64,
    pub blowup_flag: bool,
    /// Last time before the flag was first raised.
    pub t_max: Option<f64>,
}

pub const MONITOR_HEADER: &str = "t,weighted_n,weighted_c,weighted_u,norm_n,norm_c,norm_u,blowup_flag,t_max";

impl MonitorRecord {
    pub fn csv_row(&self) -> String {
        let t_max = self.t_max.map_or(String::new(), |v| format!("{v:e}"));
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            self.t,
            self.weighted_n,
            self.weighted_c,
            self.weighted_u,
            self.norm_n,
            self.norm_c,
            self.norm_u,
            u8::from(self.blowup_flag),
            t_max
        )
    }
}

pub fn monitor_csv(records: &[MonitorRecord]) -> String {
    let mut s = String::from(MONITOR_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

/// Running monitor; remembers the previous time and whether the flag fired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    pub cfg_rho: f64,
    pub cfg_q: f64,
    pub threshold: f64,
    pub beta: f64,
    last_t: Option<f64>,
    t_max: Option<f64>,
}

impl Monitor {
    pub fn new(cfg: &MonitorConfig) -> Self {
        Self {
            cfg_rho: cfg.rho,
            cfg_q: cfg.q,
            threshold: cfg.threshold,
            beta: cfg.beta,
            last_t: None,
            t_max: None,
        }
    }

    pub fn flagged(&self) -> bool {
        self.t_max.is_some()
    }

    pub fn t_max(&self) -> Option<f64> {
        self.t_max
    }

    /// `u` may be absent (KS-only runs); its norms are then 0.
    pub fn observe(&mut self, n: &ScalarField, c: &ScalarField, u: Option<&VectorField>, t: f64) -> MonitorRecord {
        let p = self.cfg_rho * self.cfg_q;
        let norm_n = lq_norm(n, p);
        let norm_c = lq_norm(c, p);
        let norm_u = u.map_or(0.0, |u| lq_norm(&u.speed(), p));
        let w = t.powf(self.beta);
        let bad = |v: f64| !v.is_finite() || v > self.threshold;
        if self.t_max.is_none() && (bad(norm_n) || bad(norm_c) || bad(norm_u)) {
            self.t_max = Some(self.last_t.unwrap_or(0.0));
        }
        self.last_t = Some(t);
        MonitorRecord {
            t,
            weighted_n: w * norm_n,
            weighted_c: w * norm_c,
            weighted_u: w * norm_u,
            norm_n,
            norm_c,
            norm_u,
            blowup_flag: self.t_max.is_some(),
            t_max: self.t_max,
        }
    }
}
