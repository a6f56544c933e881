//! Ground coverage maps: where a subchannel's received power clears a detection threshold.

use std::io::Write;
use std::str::FromStr;

use csun_core::channel::amplitude_gain;
use csun_core::units::watts_to_dbm;
use csun_core::{Allocation, Error, Result, Scenario};

/// Regular grid of ground points; cell centres are sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// `[x_min, y_min, x_max, y_max]` in metres.
    pub bounds: [f64; 4],
    /// Receiver height, metres.
    pub height: f64,
}

impl GridSpec {
    pub fn over_area(nx: usize, ny: usize, area: [f64; 2]) -> Self {
        Self {
            nx,
            ny,
            bounds: [0.0, 0.0, area[0], area[1]],
            height: 0.0,
        }
    }

    pub fn cell(&self) -> [f64; 2] {
        [
            (self.bounds[2] - self.bounds[0]) / self.nx as f64,
            (self.bounds[3] - self.bounds[1]) / self.ny as f64,
        ]
    }

    /// Centre of cell `(ix, iy)`.
    pub fn point(&self, ix: usize, iy: usize) -> [f64; 3] {
        let [dx, dy] = self.cell();
        [
            self.bounds[0] + (ix as f64 + 0.5) * dx,
            self.bounds[1] + (iy as f64 + 0.5) * dy,
            self.height,
        ]
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0
            || self.ny == 0
            || !(self.bounds[2] > self.bounds[0])
            || !(self.bounds[3] > self.bounds[1])
        {
            return Err(Error::Usage(format!("degenerate grid {self:?}")));
        }
        Ok(())
    }
}

/// Parses `"200x200"`-style grid sizes.
pub fn parse_grid_size(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Usage(format!("grid size {s:?} is not of the form NXxNY"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let nx = usize::from_str(a.trim()).map_err(|_| bad())?;
    let ny = usize::from_str(b.trim()).map_err(|_| bad())?;
    Ok((nx, ny))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMap {
    pub grid: GridSpec,
    pub slot: usize,
    pub threshold_w: f64,
    /// Received power per subchannel, `[g][iy * nx + ix]`, watts.
    pub received: Vec<Vec<f64>>,
}

impl CoverageMap {
    pub fn covered(&self, g: usize, ix: usize, iy: usize) -> bool {
        self.received[g][iy * self.grid.nx + ix] > self.threshold_w
    }

    /// Mask of subchannel `g`, row-major in `iy`.
    pub fn mask(&self, g: usize) -> Vec<bool> {
        self.received[g]
            .iter()
            .map(|&r| r > self.threshold_w)
            .collect()
    }

    pub fn covered_cells(&self, g: usize) -> usize {
        self.received[g]
            .iter()
            .filter(|&&r| r > self.threshold_w)
            .count()
    }

    /// Same received powers, different threshold.
    pub fn with_threshold(&self, threshold_w: f64) -> Self {
        Self {
            threshold_w,
            ..self.clone()
        }
    }

    /// CSV rows `subchannel,x,y,received_dbm,covered`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["subchannel", "x", "y", "received_dbm", "covered"])?;
        for (g, per_point) in self.received.iter().enumerate() {
            for iy in 0..self.grid.ny {
                for ix in 0..self.grid.nx {
                    let p = self.grid.point(ix, iy);
                    let r = per_point[iy * self.grid.nx + ix];
                    wtr.write_record([
                        g.to_string(),
                        p[0].to_string(),
                        p[1].to_string(),
                        watts_to_dbm(r).to_string(),
                        u8::from(r > self.threshold_w).to_string(),
                    ])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Received power `sum_k l^2(point, k) p_{n,g,k}` over the grid for every subchannel of slot
/// `slot`; a point is covered when it exceeds `threshold_w`.
pub fn coverage_map(
    alloc: &Allocation,
    sc: &Scenario,
    slot: usize,
    grid: GridSpec,
    threshold_w: f64,
) -> Result<CoverageMap> {
    alloc.check_shape(sc)?;
    grid.validate()?;
    if slot >= sc.num_slots() {
        return Err(Error::Usage(format!(
            "slot {slot} out of {}",
            sc.num_slots()
        )));
    }
    let uavs = sc
        .geometry
        .uavs
        .get(slot)
        .filter(|u| u.len() == sc.num_uavs)
        .ok_or_else(|| Error::Usage("scenario carries no UAV positions for this slot".into()))?;
    let mut received = vec![vec![0.0; grid.nx * grid.ny]; sc.num_subchannels];
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let pt = grid.point(ix, iy);
            let gains: Vec<f64> = uavs
                .iter()
                .map(|uav| amplitude_gain(uav, &pt, sc.carrier_freq, sc.atten_db_per_km).powi(2))
                .collect();
            for (g, per_point) in received.iter_mut().enumerate() {
                per_point[iy * grid.nx + ix] = gains
                    .iter()
                    .zip(&alloc.power[slot][g])
                    .map(|(l2, p)| l2 * p)
                    .sum();
            }
        }
    }
    Ok(CoverageMap {
        grid,
        slot,
        threshold_w,
        received,
    })
}
