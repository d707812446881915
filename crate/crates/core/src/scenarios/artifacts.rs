//! CSV tables, a JSON summary and a run manifest for every scenario.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::config::Scenario;
use super::runners::{
    wave_envelopes, GainPoint, Outcome, PointFailure, RunRecord, ToneSummary, ZoomResult,
};
use crate::error::Result;
use crate::physics::DerivedScales;
use crate::spectral::GainProfile;

/// Everything needed to tell two result directories apart.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: &'static str,
    pub kind: &'static str,
    /// SHA-256 of the resolved scenario, excluding output path and worker count.
    pub scenario_hash: String,
    pub scenario: Scenario,
    pub derived: DerivedScales,
    pub wall_s: f64,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<PointFailure>,
    pub files: Vec<String>,
}

/// Hash of the physics content of a scenario.
pub fn scenario_hash(sc: &Scenario) -> Result<String> {
    let mut canonical = sc.clone();
    canonical.out = None;
    canonical.workers = 1;
    let bytes = serde_json::to_vec(&canonical)?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

struct Sink {
    dir: PathBuf,
    files: Vec<String>,
}

impl Sink {
    fn csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        R: IntoIterator<Item = String>,
        I: IntoIterator<Item = R>,
    {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        fs::write(self.dir.join(name), serde_json::to_string_pretty(value)?)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn num(x: f64) -> String {
    format!("{x:.10e}")
}

fn ghz_tag(f: f64) -> String {
    format!("{:.2}GHz", f * 1e-9)
}

fn tone_table(sink: &mut Sink, name: &str, t: &ToneSummary, z: f64) -> Result<()> {
    let mut header = vec!["cell".to_string()];
    let mut columns = Vec::new();
    for f in &t.fields {
        let (fwd, bwd) = wave_envelopes(f, z);
        let net = f.power_dbm();
        for (suffix, col) in [("net_dBm", net), ("fwd_dBm", fwd), ("bwd_dBm", bwd)] {
            header.push(format!("{}_{suffix}", f.label.name()));
            columns.push(col);
        }
    }
    let n = columns.first().map_or(0, Vec::len);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    sink.csv(
        name,
        &header,
        (0..n).map(|k| {
            std::iter::once(k.to_string()).chain(columns.iter().map(move |c| num(c[k])))
        }),
    )
}

fn gain_table(sink: &mut Sink, name: &str, points: &[&GainPoint]) -> Result<()> {
    sink.csv(
        name,
        &["fs_Hz", "gain_dB", "s11_dB", "degenerate"],
        points.iter().map(|p| {
            [num(p.fs), num(p.gain_db), num(p.s11_db), p.degenerate.to_string()]
        }),
    )
}

fn profile_summary(p: &GainProfile) -> serde_json::Value {
    json!({
        "fp": p.fp,
        "peak_gain_db": p.peak_gain_db,
        "band_3db": p.band_3db,
        "bandwidth": p.bandwidth(),
        "ripple_db": p.ripple_db,
    })
}

fn zoom_summary(z: &ZoomResult) -> serde_json::Value {
    json!({ "fp": z.fp, "ripple_spacing": z.ripple_spacing, "points": z.fs.len() })
}

/// Writes the artifacts of `outcome` into `dir` and returns the manifest,
/// which is also written as `manifest.json`.
pub fn write_outcome(sc: &Scenario, outcome: &Outcome, wall_s: f64, dir: &Path) -> Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let mut sink = Sink {
        dir: dir.to_path_buf(),
        files: Vec::new(),
    };
    let z_mean = sc.line.derived().z_mean;
    match outcome {
        Outcome::Dispersion(r) => {
            let d = &r.dispersion;
            sink.csv(
                "dispersion.csv",
                &["f_Hz", "re_k", "im_k", "in_gap"],
                d.freqs.iter().zip(&d.k).zip(&d.in_gap).map(|((f, k), g)| {
                    [num(*f), num(k.re), num(k.im), g.to_string()]
                }),
            )?;
            sink.csv(
                "gaps.csv",
                &["lower_Hz", "upper_Hz", "center_Hz"],
                d.stop_bands
                    .iter()
                    .zip(&d.gap_centers)
                    .map(|((lo, hi), c)| [num(*lo), num(*hi), num(*c)]),
            )?;
            for m in &r.mismatch {
                sink.csv(
                    &format!("mismatch_{}.csv", ghz_tag(m.fp)),
                    &["fs_Hz", "dk", "xi", "flagged", "dk_p_plus_s", "xi_p_plus_s", "dk_p_plus_i", "xi_p_plus_i"],
                    (0..m.fs.len()).map(|j| {
                        [
                            num(m.fs[j]),
                            num(m.dk[j]),
                            num(m.xi[j]),
                            m.flagged[j].to_string(),
                            num(m.p_plus_s[j].dk),
                            num(m.p_plus_s[j].xi),
                            num(m.p_plus_i[j].dk),
                            num(m.p_plus_i[j].xi),
                        ]
                    }),
                )?;
            }
            let s = &r.sparams;
            sink.csv(
                "sparams.csv",
                &["f_Hz", "s11_dB", "s21_dB", "s11_re", "s11_im", "s21_re", "s21_im"],
                s.freqs
                    .iter()
                    .zip(s.s11_db())
                    .zip(s.s21_db())
                    .zip(s.s11.iter().zip(&s.s21))
                    .map(|(((f, a), b), (s11, s21))| {
                        [num(*f), num(a), num(b), num(s11.re), num(s11.im), num(s21.re), num(s21.im)]
                    }),
            )?;
            sink.json(
                "summary.json",
                &json!({
                    "l_s0": r.l_s0,
                    "k_m": d.k_m,
                    "stop_bands": d.stop_bands,
                    "coherence": r.coherence,
                }),
            )?;
        }
        Outcome::Tones(t) => {
            tone_table(&mut sink, "tones.csv", t, z_mean)?;
            sink.json("summary.json", t)?;
        }
        Outcome::Gain(r) => {
            for &fp in &sc.sweep.fp {
                let pts: Vec<&GainPoint> = r.points.iter().filter(|q| q.fp == fp).collect();
                gain_table(&mut sink, &format!("gain_{}.csv", ghz_tag(fp)), &pts)?;
            }
            for z in &r.zoom {
                sink.csv(
                    &format!("zoom_{}.csv", ghz_tag(z.fp)),
                    &["fs_Hz", "gain_dB"],
                    z.fs.iter().zip(&z.gain_db).map(|(f, g)| [num(*f), num(*g)]),
                )?;
            }
            sink.json(
                "summary.json",
                &json!({
                    "profiles": r.profiles.iter().map(profile_summary).collect::<Vec<_>>(),
                    "zoom": r.zoom.iter().map(zoom_summary).collect::<Vec<_>>(),
                    "failures": r.failures,
                }),
            )?;
        }
        Outcome::Phase(r) => {
            sink.csv(
                "phase.csv",
                &["theta_rad", "gain_dB", "s21_re", "s21_im"],
                r.theta.iter().zip(&r.gain_db).zip(&r.s21).map(|((t, g), s)| {
                    [num(*t), num(*g), num(s.re), num(s.im)]
                }),
            )?;
            sink.json(
                "summary.json",
                &json!({
                    "fp": r.fp,
                    "fs": r.fs,
                    "refined": r.refined,
                    "max_gain_db": r.max_gain_db,
                    "min_gain_db": r.min_gain_db,
                    "extinction_db": r.extinction_db,
                    "period_correlation": r.period_correlation,
                    "adjacent_gain_db": r.adjacent_gain_db,
                    "excess_gain_db": r.excess_gain_db,
                    "failures": r.failures,
                }),
            )?;
        }
        Outcome::Reflection(r) => {
            let mut header = vec!["f_Hz".to_string()];
            for a in &r.levels {
                header.push(format!("s11_dB@{:.3}uA", a * 1e6));
                header.push(format!("s21_dB@{:.3}uA", a * 1e6));
            }
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            sink.csv(
                "reflection.csv",
                &header,
                r.freqs.iter().enumerate().map(|(j, f)| {
                    let mut row = vec![num(*f)];
                    for l in 0..r.levels.len() {
                        row.push(num(r.s11_db[l][j]));
                        row.push(num(r.s21_db[l][j]));
                    }
                    row
                }),
            )?;
            sink.csv(
                "reflection_tmm.csv",
                &["f_Hz", "s11_dB"],
                r.tmm_freqs.iter().zip(&r.tmm_s11_db).map(|(f, s)| [num(*f), num(*s)]),
            )?;
            sink.json("summary.json", &json!({ "failures": r.failures }))?;
        }
        Outcome::Uniform(r) => {
            tone_table(&mut sink, "tones.csv", &r.tones, z_mean)?;
            let pts: Vec<&GainPoint> = r.points.iter().collect();
            gain_table(&mut sink, &format!("gain_{}.csv", ghz_tag(sc.drive.pump.freq)), &pts)?;
            sink.json(
                "summary.json",
                &json!({
                    "tones": r.tones,
                    "gain": r.gain.as_ref().map(profile_summary),
                    "xi": r.xi,
                    "xi_p_plus_s": r.xi_p_plus_s,
                    "xi_p_plus_i": r.xi_p_plus_i,
                    "failures": r.failures,
                }),
            )?;
        }
    }
    sink.files.push("manifest.json".into());
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        kind: sc.kind.name(),
        scenario_hash: scenario_hash(sc)?,
        scenario: sc.clone(),
        derived: sc.line.derived(),
        wall_s,
        runs: outcome.records(),
        failures: outcome.failures().to_vec(),
        files: sink.files.clone(),
    };
    sink.json("manifest.json", &manifest)?;
    sink.files.pop();
    Ok(manifest)
}
