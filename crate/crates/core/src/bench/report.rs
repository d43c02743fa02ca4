//! Per-episode rows, aggregation and the CSV schema.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "dwa")]
    Dwa,
    #[serde(rename = "sfw")]
    Sfw,
    #[serde(rename = "sfw-sac")]
    SfwSac,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Dwa, Method::Sfw, Method::SfwSac];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dwa => "dwa",
            Method::Sfw => "sfw",
            Method::SfwSac => "sfw-sac",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown method `{s}` (expected dwa, sfw or sfw-sac)")))
    }
}

pub const EPISODE_HEADER: &str =
    "scenario,method,seed,success,time_s,path_m,v_avg,sw_total,sw_step,prox_intimate,prox_personal,prox_social,prox_public";

/// One CSV row. Time, path length and average speed are empty on failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub scenario: String,
    pub method: Method,
    pub seed: u64,
    pub success: bool,
    pub time_s: Option<f64>,
    pub path_m: Option<f64>,
    pub v_avg: Option<f64>,
    pub sw_total: f64,
    pub sw_step: f64,
    pub prox_intimate: f64,
    pub prox_personal: f64,
    pub prox_social: f64,
    pub prox_public: f64,
}

impl EpisodeRecord {
    pub fn proxemics(&self) -> [f64; 4] {
        [self.prox_intimate, self.prox_personal, self.prox_social, self.prox_public]
    }
}

/// Means over a group of episodes; `scenario` is `ALL` for the overall rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: String,
    pub method: Method,
    pub episodes: usize,
    pub success_pct: f64,
    pub time_s: Option<f64>,
    pub path_m: Option<f64>,
    pub v_avg: Option<f64>,
    pub sw_step: f64,
    pub prox_intimate: f64,
    pub prox_personal: f64,
    pub prox_social: f64,
    pub prox_public: f64,
}

pub const OVERALL: &str = "ALL";

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Success rate and social work over all episodes; time, path and speed over
/// successful ones only.
pub fn aggregate_group(scenario: &str, method: Method, rows: &[&EpisodeRecord]) -> Aggregate {
    let n = rows.len();
    let successes = rows.iter().filter(|r| r.success).count();
    let all = |f: fn(&EpisodeRecord) -> f64| mean(rows.iter().map(|r| f(r))).unwrap_or(0.0);
    let ok = |f: fn(&EpisodeRecord) -> Option<f64>| mean(rows.iter().filter(|r| r.success).filter_map(|r| f(r)));
    Aggregate {
        scenario: scenario.to_string(),
        method,
        episodes: n,
        success_pct: if n == 0 { 0.0 } else { successes as f64 / n as f64 * 100.0 },
        time_s: ok(|r| r.time_s),
        path_m: ok(|r| r.path_m),
        v_avg: ok(|r| r.v_avg),
        sw_step: all(|r| r.sw_step),
        prox_intimate: all(|r| r.prox_intimate),
        prox_personal: all(|r| r.prox_personal),
        prox_social: all(|r| r.prox_social),
        prox_public: all(|r| r.prox_public),
    }
}

/// Per-(scenario, method) rows in first-appearance scenario order, then one
/// overall row per method.
pub fn aggregate(rows: &[EpisodeRecord]) -> Vec<Aggregate> {
    let mut scenarios: Vec<&str> = Vec::new();
    let mut methods: Vec<Method> = Vec::new();
    for r in rows {
        if !scenarios.contains(&r.scenario.as_str()) {
            scenarios.push(&r.scenario);
        }
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    methods.sort();
    let mut out = Vec::new();
    for s in &scenarios {
        for &m in &methods {
            let group: Vec<&EpisodeRecord> = rows.iter().filter(|r| r.scenario == *s && r.method == m).collect();
            if !group.is_empty() {
                out.push(aggregate_group(s, m, &group));
            }
        }
    }
    for &m in &methods {
        let group: Vec<&EpisodeRecord> = rows.iter().filter(|r| r.method == m).collect();
        out.push(aggregate_group(OVERALL, m, &group));
    }
    out
}

fn to_csv<T: Serialize>(rows: &[T], header_only: &str) -> Result<String, Error> {
    if rows.is_empty() {
        return Ok(format!("{header_only}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Invalid(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn episodes_csv(rows: &[EpisodeRecord]) -> Result<String, Error> {
    to_csv(rows, EPISODE_HEADER)
}

pub const AGGREGATE_HEADER: &str = "scenario,method,episodes,success_pct,time_s,path_m,v_avg,sw_step,prox_intimate,prox_personal,prox_social,prox_public";

pub fn aggregates_csv(rows: &[Aggregate]) -> Result<String, Error> {
    to_csv(rows, AGGREGATE_HEADER)
}

fn from_csv<T: for<'de> Deserialize<'de>>(text: &str, header: &str) -> Result<Vec<T>, Error> {
    let first = text.lines().next().unwrap_or_default();
    if first != header {
        return Err(Error::Invalid(format!("unexpected CSV header `{first}`")));
    }
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| Error::Invalid(e.to_string()))
}

pub fn parse_episodes_csv(text: &str) -> Result<Vec<EpisodeRecord>, Error> {
    from_csv(text, EPISODE_HEADER)
}

pub fn parse_aggregates_csv(text: &str) -> Result<Vec<Aggregate>, Error> {
    from_csv(text, AGGREGATE_HEADER)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(scenario: &str, method: Method, seed: u64, success: bool, t: f64) -> EpisodeRecord {
        EpisodeRecord {
            scenario: scenario.into(),
            method,
            seed,
            success,
            time_s: success.then_some(t),
            path_m: success.then_some(t * 0.5),
            v_avg: success.then_some(0.5),
            sw_total: t * 0.1,
            sw_step: 0.1 / 3.0 * seed as f64,
            prox_intimate: 0.0,
            prox_personal: 0.25,
            prox_social: 0.25,
            prox_public: 0.5,
        }
    }

    #[test]
    fn header_is_exact() {
        let csv = episodes_csv(&[rec("a", Method::Dwa, 1, true, 10.0)]).unwrap();
        assert_eq!(csv.lines().next().unwrap(), EPISODE_HEADER);
        assert_eq!(episodes_csv(&[]).unwrap().trim_end(), EPISODE_HEADER);
    }

    #[test]
    fn failures_leave_blanks_and_are_excluded_from_time() {
        let rows = vec![
            rec("a", Method::Sfw, 1, true, 10.0),
            rec("a", Method::Sfw, 2, false, 99.0),
            rec("a", Method::Sfw, 3, true, 20.0),
        ];
        let csv = episodes_csv(&rows).unwrap();
        assert!(csv.lines().nth(2).unwrap().starts_with("a,sfw,2,false,,,,"));
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].time_s, Some(15.0));
        assert!((agg[0].success_pct - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(agg[1].scenario, OVERALL);
        assert_eq!(agg[0], Aggregate {
            scenario: "a".into(),
            ..agg[1].clone()
        });
    }

    #[test]
    fn single_seed_aggregate_equals_row() {
        let r = rec("b", Method::Dwa, 4, true, 12.0);
        let a = &aggregate(std::slice::from_ref(&r))[0];
        assert_eq!(a.time_s, r.time_s);
        assert_eq!(a.sw_step, r.sw_step);
        assert_eq!(a.success_pct, 100.0);
    }

    #[test]
    fn csv_round_trip_reproduces_aggregates() {
        let rows: Vec<EpisodeRecord> = (1..=7)
            .flat_map(|s| {
                [
                    rec("x", Method::Dwa, s, s % 3 != 0, 10.0 + s as f64 / 7.0),
                    rec("y", Method::SfwSac, s, s % 2 == 0, 1.0 / s as f64),
                ]
            })
            .collect();
        let back = parse_episodes_csv(&episodes_csv(&rows).unwrap()).unwrap();
        assert_eq!(back, rows);
        let agg = aggregate(&rows);
        assert_eq!(aggregate(&back), agg);
        assert_eq!(parse_aggregates_csv(&aggregates_csv(&agg).unwrap()).unwrap(), agg);
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("teb".parse::<Method>().is_err());
    }
}
