//! Vortex detection on sampled fields, vortex counts and frame-to-frame
//! association into tracks.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::closed_form::{wrap_phase, EventKind, VortexEvent};
use crate::error::{Error, Result};
use crate::grid::ComplexField2D;

/// Default gate velocity for association, in trap units.
pub const DEFAULT_V_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexObservation {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub charge: i32,
    /// Lower-left corner (i, j) of the plaquette.
    pub plaquette: (usize, usize),
    /// |ψ| of the bilinear interpolant at the refined position, relative to
    /// the largest corner modulus.
    pub residual: f64,
}

impl VortexObservation {
    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Finds all plaquettes inside the disc `r ≤ r_edge` with nonzero winding.
///
/// Each edge phase difference is wrapped once and shared by its two
/// plaquettes, so windings sum exactly to the winding along the outer
/// boundary.
pub fn detect(f: &ComplexField2D, r_edge: f64) -> Result<Vec<VortexObservation>> {
    let g = f.grid();
    let m = g.points_per_axis();
    let h = g.spacing();
    let xs = g.coords();
    let v = f.values();
    // index range of plaquettes whose centers can lie in the disc
    let lo = ((-r_edge - xs[0]) / h - 1.0).floor().max(0.0) as usize;
    let hi = (((r_edge - xs[0]) / h).ceil() as usize + 1).min(m - 1);
    if lo >= hi {
        return Ok(Vec::new());
    }
    let n = hi - lo + 1;
    let mut phase = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            phase[a * n + b] = v[[lo + a, lo + b]].arg();
        }
    }
    let p = |a: usize, b: usize| phase[a * n + b];
    // ex[a][b]: (a, b) → (a+1, b); ey[a][b]: (a, b) → (a, b+1)
    let mut ex = vec![0.0; n * n];
    let mut ey = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            if a + 1 < n {
                ex[a * n + b] = wrap_phase(p(a + 1, b) - p(a, b));
            }
            if b + 1 < n {
                ey[a * n + b] = wrap_phase(p(a, b + 1) - p(a, b));
            }
        }
    }
    let mut out = Vec::new();
    for a in 0..n - 1 {
        for b in 0..n - 1 {
            let (i, j) = (lo + a, lo + b);
            let cx = xs[i] + 0.5 * h;
            let cy = xs[j] + 0.5 * h;
            if cx.hypot(cy) > r_edge {
                continue;
            }
            let total = ex[a * n + b] + ey[(a + 1) * n + b] - ex[a * n + b + 1] - ey[a * n + b];
            let w = (total / (2.0 * PI)).round() as i32;
            if w == 0 {
                continue;
            }
            if w.abs() > 1 {
                // unreachable with shared edges (each term lies in (−π, π]); kept as a guard
                return Err(Error::GridTooCoarse { i, j, winding: w });
            }
            let corners = [v[[i, j]], v[[i + 1, j]], v[[i, j + 1]], v[[i + 1, j + 1]]];
            let (s, u, residual) = bilinear_zero(corners);
            out.push(VortexObservation {
                t: f.time(),
                x: xs[i] + s * h,
                y: xs[j] + u * h,
                charge: w,
                plaquette: (i, j),
                residual,
            });
        }
    }
    Ok(out)
}

/// Zero of the bilinear interpolant `ψ(s, u)` on the unit square with
/// corners ψ00, ψ10, ψ01, ψ11. Falls back to the centre when the iteration
/// does not settle inside the square.
fn bilinear_zero(c: [Complex64; 4]) -> (f64, f64, f64) {
    let [p00, p10, p01, p11] = c;
    let a = p00;
    let b = p10 - p00;
    let cc = p01 - p00;
    let d = p11 - p10 - p01 + p00;
    let eval = |s: f64, u: f64| a + b * s + cc * u + d * s * u;
    let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let (mut s, mut u) = (0.5, 0.5);
    for _ in 0..50 {
        let f = eval(s, u);
        let fs = b + d * u;
        let fu = cc + d * s;
        let det = fs.re * fu.im - fu.re * fs.im;
        if det.abs() < 1e-300 {
            break;
        }
        let ds = (fu.im * f.re - fu.re * f.im) / det;
        let du = (-fs.im * f.re + fs.re * f.im) / det;
        s = (s - ds).clamp(0.0, 1.0);
        u = (u - du).clamp(0.0, 1.0);
        if ds.abs() + du.abs() < 1e-14 {
            break;
        }
    }
    let r = eval(s, u).norm() / scale;
    if r.is_finite() && r < 1e-6 {
        (s, u, r)
    } else {
        (0.5, 0.5, eval(0.5, 0.5).norm() / scale)
    }
}

/// Detections of one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub observations: Vec<VortexObservation>,
}

impl Frame {
    pub fn detect(f: &ComplexField2D, r_edge: f64) -> Result<Self> {
        Ok(Frame {
            t: f.time(),
            observations: detect(f, r_edge)?,
        })
    }

    pub fn count(&self) -> usize {
        self.observations.len()
    }

    pub fn total_charge(&self) -> i32 {
        self.observations.iter().map(|o| o.charge).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSample {
    pub t: f64,
    pub n: usize,
    pub charge: i32,
    /// Set when N < |Q| or N and Q differ in parity.
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSeries {
    pub expected_charge: i32,
    pub samples: Vec<CountSample>,
}

/// N(t) from detection frames, checking N ≥ |Q| and N ≡ Q (mod 2) against the
/// expected total charge.
pub fn count_series(frames: &[Frame], expected_charge: i32) -> CountSeries {
    let samples = frames
        .iter()
        .map(|f| {
            let n = f.count();
            let q = f.total_charge();
            let mut issues = Vec::new();
            if q != expected_charge {
                issues.push(format!("total charge {q}, expected {expected_charge}"));
            }
            if (n as i32) < expected_charge.abs() {
                issues.push(format!("N = {n} below |Q| = {}", expected_charge.abs()));
            }
            if (n as i32 - expected_charge).rem_euclid(2) != 0 {
                issues.push(format!("N = {n} has the wrong parity for Q = {expected_charge}"));
            }
            if !issues.is_empty() {
                log::warn!("detection quality at t = {}: {}", f.t, issues.join("; "));
            }
            CountSample {
                t: f.t,
                n,
                charge: q,
                flag: (!issues.is_empty()).then(|| issues.join("; ")),
            }
        })
        .collect();
    CountSeries {
        expected_charge,
        samples,
    }
}

impl CountSeries {
    pub fn from_counts(expected_charge: i32, samples: impl IntoIterator<Item = (f64, usize)>) -> Self {
        CountSeries {
            expected_charge,
            samples: samples
                .into_iter()
                .map(|(t, n)| CountSample {
                    t,
                    n,
                    charge: expected_charge,
                    flag: None,
                })
                .collect(),
        }
    }

    pub fn flagged(&self) -> impl Iterator<Item = &CountSample> {
        self.samples.iter().filter(|s| s.flag.is_some())
    }

    /// Changes of N, stamped at the midpoint between the two samples.
    pub fn transitions(&self) -> Vec<CountTransition> {
        self.samples
            .windows(2)
            .filter(|w| w[0].n != w[1].n)
            .map(|w| CountTransition {
                t: 0.5 * (w[0].t + w[1].t),
                from: w[0].n,
                to: w[1].n,
            })
            .collect()
    }

    /// Maximal runs of constant N as (start, end, N), with boundaries at
    /// transition midpoints.
    pub fn plateaus(&self) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::new();
        let Some(first) = self.samples.first() else {
            return out;
        };
        let mut start = first.t;
        let mut n = first.n;
        for tr in self.transitions() {
            out.push((start, tr.t, n));
            start = tr.t;
            n = tr.to;
        }
        out.push((start, self.samples.last().unwrap().t, n));
        out
    }

    pub fn max_count(&self) -> Option<usize> {
        self.samples.iter().map(|s| s.n).max()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        w.write_record(["t", "N"]).map_err(csv_error)?;
        for s in &self.samples {
            w.write_record([fmt_f64(s.t), s.n.to_string()]).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountTransition {
    pub t: f64,
    pub from: usize,
    pub to: usize,
}

/// Time average of N over [t0, t1], trapezoidal over the samples that fall
/// inside the window.
pub fn average_count(series: &CountSeries, t0: f64, t1: f64) -> Result<f64> {
    let inside: Vec<&CountSample> = series
        .samples
        .iter()
        .filter(|s| s.t >= t0 - 1e-12 && s.t <= t1 + 1e-12)
        .collect();
    if inside.len() < 2 || !(t1 > t0) {
        return Err(Error::EmptyWindow(t0, t1));
    }
    let mut area = 0.0;
    for w in inside.windows(2) {
        area += 0.5 * (w[0].n + w[1].n) as f64 * (w[1].t - w[0].t);
    }
    Ok(area / (inside.last().unwrap().t - inside[0].t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BirthKind {
    Initial,
    Creation,
    /// Appeared without an opposite-charge partner, usually at the disc edge.
    Entered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeathKind {
    EndOfRun,
    Annihilation,
    LeftDetectionDisc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackEnd<K> {
    pub kind: K,
    pub t: f64,
    pub partner: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexTrack {
    pub id: usize,
    pub birth: TrackEnd<BirthKind>,
    pub death: TrackEnd<DeathKind>,
    /// Times at which the matched detection changed charge.
    pub charge_flips: Vec<f64>,
    pub observations: Vec<VortexObservation>,
}

impl VortexTrack {
    pub fn last(&self) -> &VortexObservation {
        self.observations.last().expect("tracks are never empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationConfig {
    pub v_max: f64,
    /// Maximum separation of an opposite-charge pair created or annihilated
    /// between two frames.
    pub pair_radius: f64,
    /// Frames a track may go undetected before it is closed. Bridges the
    /// dropouts of a pair closer than one cell.
    pub max_gap: usize,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        AssociationConfig {
            v_max: DEFAULT_V_MAX,
            pair_radius: 1.0,
            max_gap: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    pub tracks: Vec<VortexTrack>,
    pub events: Vec<VortexEvent>,
    /// Assignments where two candidates were within 10% cost of each other.
    pub ambiguities: Vec<String>,
}

fn dist(a: &VortexObservation, b: &VortexObservation) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Nearest opposite-charge partner of `obs[a]` among the unpaired entries,
/// within `radius`.
fn nearest_partner(obs: &[VortexObservation], paired: &[bool], a: usize, radius: f64) -> Option<usize> {
    (a + 1..obs.len())
        .filter(|&b| !paired[b] && obs[b].charge == -obs[a].charge)
        .map(|b| (b, dist(&obs[a], &obs[b])))
        .filter(|&(_, d)| d <= radius)
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(b, _)| b)
}

/// Greedy nearest-neighbour association across time-ordered frames.
///
/// A detection may join a track if it lies within `v_max·Δt` of the track's
/// last position, where Δt counts from the last frame the track was seen.
/// Same-charge matches are preferred; an opposite-charge match is recorded as
/// a charge flip unless a same-charge detection or track nearby explains it as
/// a pair created or annihilated next to the vortex. Tracks missing for more
/// than `max_gap` frames are closed, pairwise as annihilations when possible.
pub fn associate(frames: &[Frame], cfg: &AssociationConfig) -> Association {
    let mut tracks: Vec<VortexTrack> = Vec::new();
    let mut last_frame: Vec<usize> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    let mut events = Vec::new();
    let mut ambiguities = Vec::new();
    let Some(first) = frames.first() else {
        return Association {
            tracks,
            events,
            ambiguities,
        };
    };
    for o in &first.observations {
        let id = tracks.len();
        tracks.push(VortexTrack {
            id,
            birth: TrackEnd {
                kind: BirthKind::Initial,
                t: first.t,
                partner: None,
            },
            death: TrackEnd {
                kind: DeathKind::EndOfRun,
                t: first.t,
                partner: None,
            },
            charge_flips: Vec::new(),
            observations: vec![*o],
        });
        last_frame.push(0);
        open.push(id);
    }

    // closes `ended` tracks, grouped by the frame they were last seen in
    let close = |tracks: &mut Vec<VortexTrack>, events: &mut Vec<VortexEvent>, last_frame: &[usize], mut ended: Vec<usize>| {
        ended.sort_by_key(|&t| (last_frame[t], t));
        for group in ended.chunk_by(|&a, &b| last_frame[a] == last_frame[b]) {
            let f = last_frame[group[0]];
            let t_gone = 0.5 * (frames[f].t + frames[(f + 1).min(frames.len() - 1)].t);
            let obs: Vec<VortexObservation> = group.iter().map(|&t| *tracks[t].last()).collect();
            let mut paired = vec![false; group.len()];
            for a in 0..group.len() {
                if paired[a] {
                    continue;
                }
                if let Some(b) = nearest_partner(&obs, &paired, a, cfg.pair_radius) {
                    paired[a] = true;
                    paired[b] = true;
                    for (me, other) in [(group[a], group[b]), (group[b], group[a])] {
                        tracks[me].death = TrackEnd {
                            kind: DeathKind::Annihilation,
                            t: t_gone,
                            partner: Some(other),
                        };
                    }
                    events.push(VortexEvent {
                        t: t_gone,
                        kind: EventKind::Annihilation,
                        x: 0.5 * (obs[a].x + obs[b].x),
                        y: 0.5 * (obs[a].y + obs[b].y),
                    });
                } else {
                    tracks[group[a]].death = TrackEnd {
                        kind: DeathKind::LeftDetectionDisc,
                        t: t_gone,
                        partner: None,
                    };
                }
            }
        }
    };

    for fi in 1..frames.len() {
        let (prev, cur) = (&frames[fi - 1], &frames[fi]);
        let t_mid = 0.5 * (prev.t + cur.t);
        // candidate (cost, track, detection)
        let mut cand = Vec::new();
        for &tid in &open {
            let last = tracks[tid].last();
            let gate = cfg.v_max * (cur.t - last.t);
            let mut costs = Vec::new();
            for (k, o) in cur.observations.iter().enumerate() {
                let d = dist(o, last);
                if d <= gate {
                    let cost = d + if o.charge == last.charge { 0.0 } else { gate };
                    cand.push((cost, tid, k));
                    costs.push(cost);
                }
            }
            costs.sort_by(f64::total_cmp);
            if costs.len() >= 2 && costs[1] - costs[0] <= 0.1 * costs[1] {
                ambiguities.push(format!(
                    "t = {:.4}: track {tid} has {} candidates within 10% cost",
                    cur.t,
                    costs.len()
                ));
            }
        }
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut det_of: Vec<Option<usize>> = vec![None; tracks.len()];
        let mut det_done = vec![false; cur.observations.len()];
        let mut matches = Vec::new();
        for (_, tid, k) in cand {
            if det_of[tid].is_some() || det_done[k] {
                continue;
            }
            det_of[tid] = Some(k);
            det_done[k] = true;
            matches.push(tid);
        }

        // A flip next to fresh same-charge vortices is a pair event beside a
        // vortex that keeps its charge.
        let mut flips = Vec::new();
        for &tid in &matches {
            let Some(k) = det_of[tid] else { continue };
            let q = tracks[tid].last().charge;
            let o = cur.observations[k];
            if o.charge == q {
                continue;
            }
            let fresh = (0..cur.observations.len())
                .filter(|&j| !det_done[j] && cur.observations[j].charge == q)
                .map(|j| (j, dist(&cur.observations[j], &o)))
                .filter(|&(_, d)| d <= cfg.pair_radius)
                .min_by(|x, y| x.1.total_cmp(&y.1));
            if let Some((j, _)) = fresh {
                det_of[tid] = Some(j);
                det_done[j] = true;
                det_done[k] = false;
                continue;
            }
            let arriving = open
                .iter()
                .copied()
                .filter(|&u| det_of[u].is_none() && last_frame[u] == fi - 1 && tracks[u].last().charge == o.charge)
                .map(|u| (u, dist(tracks[u].last(), &o)))
                .filter(|&(_, d)| d <= cfg.pair_radius)
                .min_by(|x, y| x.1.total_cmp(&y.1));
            if let Some((u, _)) = arriving {
                det_of[u] = Some(k);
                det_of[tid] = None;
                continue;
            }
            flips.push(tid);
        }
        for tid in flips {
            tracks[tid].charge_flips.push(t_mid);
            let o = cur.observations[det_of[tid].unwrap()];
            events.push(VortexEvent {
                t: t_mid,
                kind: EventKind::ChargeFlip,
                x: o.x,
                y: o.y,
            });
        }
        for &tid in &open {
            if let Some(k) = det_of[tid] {
                tracks[tid].observations.push(cur.observations[k]);
                last_frame[tid] = fi;
            }
        }

        // tracks missing for too long
        let (ended, kept): (Vec<usize>, Vec<usize>) = open
            .iter()
            .partition(|&&t| det_of[t].is_none() && fi - last_frame[t] > cfg.max_gap);
        close(&mut tracks, &mut events, &last_frame, ended);
        open = kept;

        // detections that continue no track
        let born: Vec<usize> = (0..cur.observations.len()).filter(|&k| !det_done[k]).collect();
        let born_obs: Vec<VortexObservation> = born.iter().map(|&k| cur.observations[k]).collect();
        let first_id = tracks.len();
        for o in &born_obs {
            let id = tracks.len();
            tracks.push(VortexTrack {
                id,
                birth: TrackEnd {
                    kind: BirthKind::Entered,
                    t: t_mid,
                    partner: None,
                },
                death: TrackEnd {
                    kind: DeathKind::EndOfRun,
                    t: cur.t,
                    partner: None,
                },
                charge_flips: Vec::new(),
                observations: vec![*o],
            });
            last_frame.push(fi);
            open.push(id);
        }
        let mut paired = vec![false; born.len()];
        for a in 0..born.len() {
            if paired[a] {
                continue;
            }
            if let Some(b) = nearest_partner(&born_obs, &paired, a, cfg.pair_radius) {
                paired[a] = true;
                paired[b] = true;
                let (ia, ib) = (first_id + a, first_id + b);
                for (me, other) in [(ia, ib), (ib, ia)] {
                    tracks[me].birth = TrackEnd {
                        kind: BirthKind::Creation,
                        t: t_mid,
                        partner: Some(other),
                    };
                }
                events.push(VortexEvent {
                    t: t_mid,
                    kind: EventKind::Creation,
                    x: 0.5 * (born_obs[a].x + born_obs[b].x),
                    y: 0.5 * (born_obs[a].y + born_obs[b].y),
                });
            }
        }
        open.sort_unstable();
    }
    let last = frames.len() - 1;
    let (missing, seen): (Vec<usize>, Vec<usize>) = open.iter().partition(|&&t| last_frame[t] < last);
    close(&mut tracks, &mut events, &last_frame, missing);
    for tid in seen {
        tracks[tid].death = TrackEnd {
            kind: DeathKind::EndOfRun,
            t: frames[last].t,
            partner: None,
        };
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Association {
        tracks,
        events,
        ambiguities,
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Shortest representation that round-trips.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_detections_csv(frames: &[Frame], path: &Path) -> Result<()> {
    write_detections(frames, std::fs::File::create(path)?)
}

pub fn write_detections(frames: &[Frame], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "y", "charge", "residual"]).map_err(csv_error)?;
    for f in frames {
        for o in &f.observations {
            w.write_record([
                fmt_f64(o.t),
                fmt_f64(o.x),
                fmt_f64(o.y),
                o.charge.to_string(),
                fmt_f64(o.residual),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_events_csv(events: &[VortexEvent], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["t", "event_type", "x", "y"]).map_err(csv_error)?;
    for e in events {
        w.write_record([fmt_f64(e.t), e.kind.as_str().to_string(), fmt_f64(e.x), fmt_f64(e.y)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tracks_json(assoc: &Association, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(serde_json::to_string_pretty(assoc)?.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use approx::assert_abs_diff_eq;

    fn field(f: impl Fn(f64, f64) -> Complex64) -> ComplexField2D {
        ComplexField2D::from_fn(GridSpec::default(), 0.0, |x, y| f(x, y) * (-(x * x + y * y) / 2.0).exp())
    }

    #[test]
    fn single_centered_vortex() {
        let obs = detect(&field(|x, y| Complex64::new(x, y)), 4.0).unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].charge, 1);
        assert!(obs[0].radius() <= 0.5 * GridSpec::default().spacing());
    }

    #[test]
    fn off_grid_vortex_is_refined() {
        let (x0, y0) = (0.713, -1.234);
        let obs = detect(&field(|x, y| Complex64::new(x - x0, -(y - y0))), 4.0).unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].charge, -1);
        // a linear zero is reproduced exactly by the bilinear interpolant up to the Gaussian factor
        assert_abs_diff_eq!(obs[0].x, x0, epsilon = 1e-3);
        assert_abs_diff_eq!(obs[0].y, y0, epsilon = 1e-3);
    }

    #[test]
    fn no_vortex_in_gaussian() {
        assert!(detect(&field(|_, _| Complex64::new(1.0, 0.0)), 4.0).unwrap().is_empty());
    }

    #[test]
    fn counts_and_average() {
        let s = CountSeries::from_counts(1, (0..=10).map(|k| (k as f64 * 0.1, 3)));
        assert_abs_diff_eq!(average_count(&s, 0.0, 1.0).unwrap(), 3.0, epsilon = 1e-14);
        assert!(average_count(&s, 2.0, 3.0).is_err());
        let s = CountSeries::from_counts(1, [(0.0, 3), (1.0, 3), (2.0, 5), (3.0, 5)]);
        let tr = s.transitions();
        assert_eq!(tr.len(), 1);
        assert_abs_diff_eq!(tr[0].t, 1.5);
        assert_eq!(s.plateaus(), vec![(0.0, 1.5, 3), (1.5, 3.0, 5)]);
    }

    #[test]
    fn invariant_violations_are_flagged() {
        let o = |x: f64, q: i32| VortexObservation {
            t: 0.0,
            x,
            y: 0.0,
            charge: q,
            plaquette: (0, 0),
            residual: 0.0,
        };
        let frames = vec![
            Frame { t: 0.0, observations: vec![o(0.0, 1)] },
            Frame { t: 0.1, observations: vec![o(0.0, 1), o(1.0, 1)] },
        ];
        let s = count_series(&frames, 1);
        assert!(s.samples[0].flag.is_none());
        assert!(s.samples[1].flag.is_some());
    }

    #[test]
    fn association_pairs_and_flips() {
        let o = |t: f64, x: f64, q: i32| VortexObservation {
            t,
            x,
            y: 0.0,
            charge: q,
            plaquette: (0, 0),
            residual: 0.0,
        };
        let frames = vec![
            Frame { t: 0.0, observations: vec![o(0.0, -0.1, 1), o(0.0, 0.1, -1)] },
            Frame { t: 0.01, observations: vec![] },
            Frame { t: 0.02, observations: vec![o(0.02, 0.5, 1), o(0.02, 0.55, -1)] },
            Frame { t: 0.03, observations: vec![o(0.03, 0.5, -1), o(0.03, 0.55, -1), o(0.03, 3.0, 1)] },
        ];
        let a = associate(&frames, &AssociationConfig::default());
        assert_eq!(a.tracks.len(), 5);
        assert_eq!(a.tracks[0].death.kind, DeathKind::Annihilation);
        assert_eq!(a.tracks[0].death.partner, Some(1));
        assert_eq!(a.tracks[2].birth.kind, BirthKind::Creation);
        assert_eq!(a.tracks[2].charge_flips, vec![0.025]);
        assert_eq!(a.tracks[4].birth.kind, BirthKind::Entered);
        let kinds: Vec<_> = a.events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![EventKind::Annihilation, EventKind::Creation, EventKind::ChargeFlip]);
    }

    #[test]
    fn gaps_are_bridged_when_allowed() {
        let o = |t: f64, x: f64, q: i32| VortexObservation {
            t,
            x,
            y: 0.0,
            charge: q,
            plaquette: (0, 0),
            residual: 0.0,
        };
        let frames = vec![
            Frame { t: 0.0, observations: vec![o(0.0, -0.1, 1), o(0.0, 0.1, -1)] },
            Frame { t: 0.01, observations: vec![] },
            Frame { t: 0.02, observations: vec![o(0.02, -0.1, 1), o(0.02, 0.1, -1)] },
        ];
        let strict = associate(&frames, &AssociationConfig::default());
        assert_eq!(strict.tracks.len(), 4);
        let cfg = AssociationConfig { max_gap: 1, ..Default::default() };
        let a = associate(&frames, &cfg);
        assert_eq!(a.tracks.len(), 2);
        assert!(a.events.is_empty());
        assert!(a.tracks.iter().all(|t| t.observations.len() == 2 && t.death.kind == DeathKind::EndOfRun));
    }
}
