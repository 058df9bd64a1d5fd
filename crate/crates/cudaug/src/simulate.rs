//! Simulated curriculum runs: LoL history CSV, run manifest and a decile plot.

use std::convert::Infallible;
use std::time::Instant;

use cudaug_core::curriculum::{EpochView, RunError};
use cudaug_core::sim::sim_outcome;
use cudaug_core::{Curriculum, LoLTable, RasterImage, Rgb};
use serde::{Deserialize, Serialize};

use crate::codec::encode_png;
use crate::config::{CurriculumSection, SimSetup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub gamma: f64,
    pub mean_level: f64,
    pub max_level: u32,
    pub probes: u64,
    pub micros: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: CurriculumSection,
    pub class_counts: Vec<u32>,
    pub learner_rates: Vec<f64>,
    pub learner_beta: f64,
    pub learner_seed: u64,
    pub final_gamma: f64,
    pub total_micros: u64,
    pub epochs: Vec<EpochRecord>,
}

pub struct SimRun {
    pub table: LoLTable,
    pub manifest: RunManifest,
}

/// Drive the curriculum with the simulated learner, timing each epoch.
pub fn simulate(setup: &SimSetup) -> Result<SimRun, RunError<Infallible>> {
    let SimSetup { config, profile, learner } = setup;
    let mut cur = Curriculum::new(config.clone(), profile.labels(), profile.num_classes()).map_err(|e| RunError {
        epoch: 0,
        stage: cudaug_core::curriculum::Stage::Probe,
        source: e.into(),
    })?;
    let start = Instant::now();
    let mut epochs = Vec::with_capacity(config.epochs as usize);
    for _ in 0..config.epochs {
        let t0 = Instant::now();
        cur.run_epoch(&mut |e, plan| Ok(sim_outcome(e, plan, learner)), &mut |_: EpochView<'_>| Ok(()))?;
        let m = cur.metrics().last().expect("one metrics row per epoch");
        epochs.push(EpochRecord {
            epoch: m.epoch,
            gamma: m.gamma,
            mean_level: m.mean_level,
            max_level: m.max_level,
            probes: m.probes,
            micros: t0.elapsed().as_micros() as u64,
        });
        log::debug!("epoch {}: mean level {:.3}", m.epoch, m.mean_level);
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone().into(),
        class_counts: profile.counts().to_vec(),
        learner_rates: learner.rates.clone(),
        learner_beta: learner.beta,
        learner_seed: learner.seed,
        final_gamma: cur.gamma(),
        total_micros: start.elapsed().as_micros() as u64,
        epochs,
    };
    Ok(SimRun { table: cur.table().clone(), manifest })
}

/// Mean level per class group and epoch. Classes are split into up to 10
/// contiguous groups in class order (head first); `out[g][e]` is the mean of
/// group `g` after epoch `e + 1`.
pub fn decile_means(table: &LoLTable) -> Vec<Vec<f64>> {
    let c = table.num_classes();
    let groups = c.min(10);
    (0..groups)
        .map(|g| {
            let (lo, hi) = (g * c / groups, (g + 1) * c / groups);
            table
                .history()
                .iter()
                .map(|snap| snap[lo..hi].iter().map(|&l| l as f64).sum::<f64>() / (hi - lo) as f64)
                .collect()
        })
        .collect()
}

const PALETTE: [Rgb; 10] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
];

/// Line chart of [`decile_means`] over epochs, as PNG bytes.
pub fn render_plot(table: &LoLTable) -> Vec<u8> {
    const W: i64 = 640;
    const H: i64 = 360;
    const M: i64 = 30;
    let series = decile_means(table);
    let epochs = table.history().len().max(1) as f64;
    let top = series.iter().flatten().fold(1.0f64, |a, &b| a.max(b)).ceil();
    let mut px = vec![[255u8; 3]; (W * H) as usize];
    let mut put = |x: i64, y: i64, c: Rgb| {
        if (0..W).contains(&x) && (0..H).contains(&y) {
            px[(y * W + x) as usize] = c;
        }
    };
    for x in M..W - M {
        put(x, H - M, [0; 3]);
    }
    for y in M..=H - M {
        put(M, y, [0; 3]);
    }
    for level in 1..=top as i64 {
        let y = H - M - ((level as f64 / top) * (H - 2 * M) as f64) as i64;
        for x in (M..W - M).step_by(4) {
            put(x, y, [210; 3]);
        }
    }
    let to_xy = |e: usize, v: f64| {
        let x = M + ((e as f64 + 1.0) / epochs * (W - 2 * M) as f64) as i64;
        let y = H - M - (v / top * (H - 2 * M) as f64) as i64;
        (x, y)
    };
    for (g, s) in series.iter().enumerate() {
        let color = PALETTE[g % PALETTE.len()];
        let mut prev = (M, H - M);
        for (e, &v) in s.iter().enumerate() {
            let next = to_xy(e, v);
            line(prev, next, |x, y| {
                put(x, y, color);
                put(x, y + 1, color);
            });
            prev = next;
        }
    }
    let img = RasterImage::new(W as u32, H as u32, px).expect("plot dimensions match buffer");
    encode_png(&img)
}

fn line((mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), mut plot: impl FnMut(i64, i64)) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let mut err = dx + dy;
    loop {
        plot(x0, y0);
        if x0 == x1 && y0 == y1 {
            return;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}
