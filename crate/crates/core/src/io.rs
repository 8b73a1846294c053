//! CSV output with provenance headers. Numbers carry 17 significant digits
//! so every value round-trips; lines end in `\n`.

use std::fmt::Write as _;

use crate::control::{SimulationResult, Termination};
use crate::linear::{dispersion_benney, dispersion_wr};
use crate::model::{FlowParameters, Grid, InterfaceState, ModelKind};

/// `# key = value` lines written at the top of every output file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub entries: Vec<(String, String)>,
}

impl Provenance {
    pub fn new() -> Self {
        Provenance::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn lines(&self) -> Vec<String> {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }

    fn write(&self, out: &mut String) {
        for line in self.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
}

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let cells: Vec<String> = cells.into_iter().collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}

pub fn termination_label(t: &Termination) -> String {
    match t {
        Termination::Completed => "completed".into(),
        Termination::BlowUp(at) => format!("blow-up at t={}", num(*at)),
        Termination::NewtonFailure(at) => format!("newton-failure at t={}", num(*at)),
    }
}

/// `t, deviation_norm, u_1..u_M, accumulated_cost`.
pub fn time_series_csv(result: &SimulationResult, provenance: &Provenance) -> String {
    let mut out = String::new();
    provenance.write(&mut out);
    let _ = writeln!(out, "# termination = {}", termination_label(&result.termination));
    let m = result.control_history.first().map_or(0, |u| u.len());
    row(
        &mut out,
        ["t".to_string(), "deviation_norm".to_string()]
            .into_iter()
            .chain((1..=m).map(|i| format!("u_{i}")))
            .chain(["accumulated_cost".to_string()]),
    );
    for i in 0..result.len() {
        row(
            &mut out,
            [num(result.times[i]), num(result.deviation_norms[i])]
                .into_iter()
                .chain(result.control_history[i].0.iter().map(|v| num(*v)))
                .chain([num(result.cost_history[i])]),
        );
    }
    out
}

/// Snapshot table for one field: header `t, x₀…x_{N−1}`, one row per state.
/// The flux table (`flux = true`) is labelled with the half-point coordinates.
pub fn snapshots_csv(
    states: &[InterfaceState],
    grid: &Grid,
    flux: bool,
    provenance: &Provenance,
) -> String {
    let mut out = String::new();
    provenance.write(&mut out);
    let _ = writeln!(out, "# field = {}", if flux { "q" } else { "h" });
    let shift = if flux { 0.5 * grid.spacing() } else { 0.0 };
    row(
        &mut out,
        std::iter::once("t".to_string()).chain(grid.coordinates().iter().map(|x| num(x + shift))),
    );
    for s in states {
        let values = if flux { s.q.as_ref() } else { Some(&s.h) };
        if let Some(v) = values {
            row(&mut out, std::iter::once(num(s.time)).chain(v.iter().map(|x| num(*x))));
        }
    }
    out
}

/// Analytic dispersion relation sampled at `samples` evenly spaced
/// wavenumbers in `(0, k_max]`.
pub fn dispersion_csv(
    model: ModelKind,
    params: &FlowParameters,
    k_max: f64,
    samples: usize,
    provenance: &Provenance,
) -> String {
    let mut out = String::new();
    provenance.write(&mut out);
    match model {
        ModelKind::Benney => row(&mut out, ["k", "growth", "frequency"].map(String::from)),
        ModelKind::WeightedResidual => row(
            &mut out,
            ["k", "growth", "frequency", "growth_2", "frequency_2"].map(String::from),
        ),
    }
    for i in 1..=samples {
        let k = k_max * i as f64 / samples as f64;
        match model {
            ModelKind::Benney => {
                let l = dispersion_benney(k, params);
                row(&mut out, [num(k), num(l.re), num(l.im)]);
            }
            ModelKind::WeightedResidual => {
                let (a, b) = dispersion_wr(k, params);
                row(&mut out, [num(k), num(a.re), num(a.im), num(b.re), num(b.im)]);
            }
        }
    }
    out
}

/// One cell of a minimum-actuator sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCell {
    pub reynolds: f64,
    pub capillary: f64,
    pub m_min: Option<usize>,
    pub unstable_modes: usize,
    pub verdict: String,
    pub runtime: f64,
}

/// `Re, Ca, M_min, n_u, verdict, runtime`; an empty `M_min` means no count
/// up to the limit stabilised the film.
pub fn stability_map_csv(cells: &[StabilityCell], provenance: &Provenance) -> String {
    let mut out = String::new();
    provenance.write(&mut out);
    row(&mut out, ["Re", "Ca", "M_min", "n_u", "verdict", "runtime"].map(String::from));
    for c in cells {
        row(
            &mut out,
            [
                num(c.reynolds),
                num(c.capillary),
                c.m_min.map_or(String::new(), |m| m.to_string()),
                c.unstable_modes.to_string(),
                c.verdict.clone(),
                format!("{:.3}", c.runtime),
            ],
        );
    }
    out
}

/// Splits a CSV produced here into `(comments, header, rows)`.
pub fn read_csv(text: &str) -> (Vec<String>, Vec<String>, Vec<Vec<String>>) {
    let mut comments = Vec::new();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
        } else if header.is_empty() {
            header = line.split(',').map(String::from).collect();
        } else if !line.is_empty() {
            rows.push(line.split(',').map(String::from).collect());
        }
    }
    (comments, header, rows)
}
