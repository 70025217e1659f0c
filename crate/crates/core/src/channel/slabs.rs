use serde::{Deserialize, Serialize};

use super::atmosphere::fried_from_integral;
use super::{fried_parameter, rytov_variance, scintillation_index, AtmosphereProfile, ChannelError};
use crate::channel::quad::integrate;

pub const DEFAULT_SCREEN_BUDGET: usize = 40;

/// Fraction of the path Rytov variance allowed above the top slab.
const TOP_RESIDUAL: f64 = 1e-4;
/// Below this total scintillation the path is treated as vacuum.
const NEGLIGIBLE_SCINTILLATION: f64 = 1e-9;
const ABSOLUTE_LIMIT: f64 = 0.1;
const RELATIVE_LIMIT: f64 = 0.1;
const MAX_GROWTH: f64 = 4.0;
const GROWTH_STEPS: usize = 400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slab {
    pub lower: f64,
    pub upper: f64,
    pub sigma2_r: f64,
    pub sigma2_i: f64,
    pub r0: f64,
    /// Slant thickness ΔL, m.
    pub thickness: f64,
}

impl Slab {
    /// Altitude of the screen representing this slab.
    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Slabs listed from the ground up. Above the last slab the path is
/// treated as free space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabPartition {
    pub slabs: Vec<Slab>,
    pub total_sigma2_r: f64,
    pub total_sigma2_i: f64,
}

impl SlabPartition {
    pub fn len(&self) -> usize {
        self.slabs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slabs.is_empty()
    }

    pub fn boundaries(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.slabs.iter().map(|s| s.lower).collect();
        if let Some(last) = self.slabs.last() {
            b.push(last.upper);
        }
        b
    }

    /// Largest σ²_I a single slab may carry.
    pub fn limit(&self) -> f64 {
        ABSOLUTE_LIMIT.min(RELATIVE_LIMIT * self.total_sigma2_i)
    }

    /// Re-checks both slab inequalities.
    pub fn satisfies_constraints(&self) -> bool {
        self.is_vacuum() || self.slabs.iter().all(|s| s.sigma2_i < self.limit())
    }

    pub fn is_vacuum(&self) -> bool {
        self.total_sigma2_i < NEGLIGIBLE_SCINTILLATION
    }
}

/// Cumulative Rytov and C²_n integrals on a grid that is dense near the
/// receiver.
struct CumulativeTable {
    h: Vec<f64>,
    rytov: Vec<f64>,
}

impl CumulativeTable {
    fn new(profile: &AtmosphereProfile, hi: f64, intervals: usize) -> Self {
        let h0 = profile.receiver_altitude;
        let s = 50.0;
        let u_max = (1.0 + (hi - h0) / s).ln();
        let du = u_max / intervals as f64;
        let map = |u: f64| h0 + s * u.exp_m1();
        let g = |u: f64| {
            let h = map(u);
            profile.cn2_at(h) * (h - h0).powf(5.0 / 6.0) * s * u.exp()
        };
        let mut h = Vec::with_capacity(intervals + 1);
        let mut rytov = Vec::with_capacity(intervals + 1);
        h.push(h0);
        rytov.push(0.0);
        let mut acc = 0.0;
        for i in 0..intervals {
            let (u0, u1) = (i as f64 * du, (i + 1) as f64 * du);
            acc += du / 6.0 * (g(u0) + 4.0 * g(0.5 * (u0 + u1)) + g(u1));
            h.push(if i + 1 == intervals { hi } else { map(u1) });
            rytov.push(acc);
        }
        Self { h, rytov }
    }

    fn total(&self) -> f64 {
        *self.rytov.last().unwrap_or(&0.0)
    }

    /// Cumulative integral at altitude `h`.
    fn at(&self, h: f64) -> f64 {
        let k = self.h.partition_point(|v| *v < h);
        if k == 0 {
            return self.rytov[0];
        }
        if k >= self.h.len() {
            return self.total();
        }
        let (h0, h1) = (self.h[k - 1], self.h[k]);
        let t = (h - h0) / (h1 - h0);
        self.rytov[k - 1] + t * (self.rytov[k] - self.rytov[k - 1])
    }

    /// Altitude where the cumulative integral reaches `target`.
    fn invert(&self, target: f64) -> f64 {
        let k = self.rytov.partition_point(|v| *v < target);
        if k == 0 {
            return self.h[0];
        }
        if k >= self.h.len() {
            return *self.h.last().unwrap();
        }
        let (c0, c1) = (self.rytov[k - 1], self.rytov[k]);
        let t = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        self.h[k - 1] + t * (self.h[k] - self.h[k - 1])
    }
}

/// Boundaries of `count` slabs over [lo, hi] whose thickness grows by
/// `ratio` per slab going up.
fn geometric_edges(lo: f64, hi: f64, count: usize, ratio: f64) -> Vec<f64> {
    let weights: Vec<f64> = (0..count).map(|j| ratio.powi(j as i32)).collect();
    let total: f64 = weights.iter().sum();
    let mut edges = Vec::with_capacity(count + 1);
    let mut h = lo;
    edges.push(lo);
    for w in &weights[..count - 1] {
        h += (hi - lo) * w / total;
        edges.push(h);
    }
    edges.push(hi);
    edges
}

fn make_slab(profile: &AtmosphereProfile, lower: f64, upper: f64) -> Result<Slab, ChannelError> {
    let sigma2_r = rytov_variance(profile, lower, upper)?;
    Ok(Slab {
        lower,
        upper,
        sigma2_r,
        sigma2_i: scintillation_index(sigma2_r),
        r0: fried_parameter(profile, lower, upper)?,
        thickness: (upper - lower) * profile.sec_zenith(),
    })
}

/// Smallest set of slabs meeting σ²_I_j < 0.1 and σ²_I_j < 0.1·σ²_I over
/// the path, with slab thickness nondecreasing in altitude.
pub fn partition_slabs(profile: &AtmosphereProfile, budget: usize) -> Result<SlabPartition, ChannelError> {
    profile.validate()?;
    let (h0, top) = (profile.receiver_altitude, profile.satellite_altitude);
    let total_sigma2_r = rytov_variance(profile, h0, top)?;
    let total_sigma2_i = scintillation_index(total_sigma2_r);
    if total_sigma2_i < NEGLIGIBLE_SCINTILLATION {
        let cn2 = integrate(|h| profile.cn2_at(h), h0, top, 1e-10);
        let slab = Slab {
            lower: h0,
            upper: top,
            sigma2_r: total_sigma2_r,
            sigma2_i: total_sigma2_i,
            r0: fried_from_integral(profile, cn2),
            thickness: profile.path_length(),
        };
        return Ok(SlabPartition { slabs: vec![slab], total_sigma2_r, total_sigma2_i });
    }
    let limit = ABSOLUTE_LIMIT.min(RELATIVE_LIMIT * total_sigma2_i);
    let table = CumulativeTable::new(profile, top, 8192);
    let scale = total_sigma2_r / table.total();
    let atmosphere_top = table.invert((1.0 - TOP_RESIDUAL) * table.total());
    let worst = |edges: &[f64]| {
        edges
            .windows(2)
            .map(|w| scintillation_index(scale * (table.at(w[1]) - table.at(w[0]))))
            .fold(0.0, f64::max)
    };

    // Thickness grows geometrically with altitude; for each slab count the
    // growth ratio minimizing the worst slab is found by a scan.
    for count in 1..=budget {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for i in 0..=GROWTH_STEPS {
            let ratio = (MAX_GROWTH.ln() * i as f64 / GROWTH_STEPS as f64).exp();
            let edges = geometric_edges(h0, atmosphere_top, count, ratio);
            let w = worst(&edges);
            if best.as_ref().is_none_or(|(b, _)| w < *b) {
                best = Some((w, edges));
            }
        }
        let Some((estimate, edges)) = best else { continue };
        if estimate >= limit {
            continue;
        }
        let slabs = edges
            .windows(2)
            .map(|w| make_slab(profile, w[0], w[1]))
            .collect::<Result<Vec<_>, _>>()?;
        if slabs.iter().all(|s| s.sigma2_i < limit) {
            return Ok(SlabPartition { slabs, total_sigma2_r, total_sigma2_i });
        }
    }
    Err(ChannelError::Unsatisfiable { budget })
}
