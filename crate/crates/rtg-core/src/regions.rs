//! Linear regions of a ReLU network, identified by activation pattern.
//!
//! Every input point lands in exactly one region: the set of points sharing
//! its activation pattern. Extraction runs a point set through the network,
//! deduplicates the patterns, and keeps per-region statistics — empirical
//! mass (member share of the sample), centroid, and mean output.

use std::collections::HashMap;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{forward_batch, softmax_rows, MlpParams};
use crate::pattern::ActivationPattern;

/// How a point set was produced; grids can be regenerated from their
/// parameters alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Grid { resolution: usize, lo: f64, hi: f64 },
    Explicit,
}

/// Points to be pushed through a network.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSet {
    pub points: Array2<f64>,
    pub kind: InputKind,
}

impl InputSet {
    /// Wraps caller-supplied points (e.g. training inputs).
    pub fn explicit(points: Array2<f64>) -> Result<Self> {
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("input points must be finite".into()));
        }
        Ok(Self {
            points,
            kind: InputKind::Explicit,
        })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Square 2D grid: `resolution` equally spaced values per axis, both
/// endpoints included, points ordered row-major with the first coordinate
/// varying fastest. The same parameters always regenerate the same points.
pub fn make_grid(resolution: usize, lo: f64, hi: f64) -> Result<InputSet> {
    if resolution < 2 {
        return Err(Error::InvalidConfig(format!(
            "grid resolution must be >= 2, got {resolution}"
        )));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidConfig(format!(
            "grid bounds must be finite with lo < hi, got [{lo}, {hi}]"
        )));
    }
    let step = (hi - lo) / (resolution - 1) as f64;
    let value = |i: usize| if i == resolution - 1 { hi } else { lo + step * i as f64 };
    let mut points = Array2::zeros((resolution * resolution, 2));
    let mut row = 0;
    for i2 in 0..resolution {
        for i1 in 0..resolution {
            points[[row, 0]] = value(i1);
            points[[row, 1]] = value(i2);
            row += 1;
        }
    }
    Ok(InputSet {
        points,
        kind: InputKind::Grid { resolution, lo, hi },
    })
}

/// Whether region mean outputs average raw network outputs or their
/// softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    Raw,
    Softmax,
}

/// One linear region as seen through the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: u32,
    pub pattern: ActivationPattern,
    pub member_count: usize,
    /// Empirical probability mass: `member_count / total_points`.
    pub mass: f64,
    /// Mean of the member points.
    pub centroid: Array1<f64>,
    /// Mean network output over members (softmax-transformed first when
    /// extraction ran in [`OutputMode::Softmax`]).
    pub mean_output: Array1<f64>,
}

/// All regions found in a sample, ids in first-occurrence order.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionTable {
    pub regions: Vec<Region>,
    index: HashMap<ActivationPattern, u32>,
    pub total_points: usize,
    pub n_bits: usize,
}

impl RegionTable {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Region id for a pattern, if any point in the sample produced it.
    pub fn lookup(&self, pattern: &ActivationPattern) -> Result<Option<u32>> {
        if pattern.len() != self.n_bits {
            return Err(Error::PatternLength {
                expected: self.n_bits,
                got: pattern.len(),
            });
        }
        Ok(self.index.get(pattern).copied())
    }

    /// Rebuilds a table from regions alone (deserialization path). Regions
    /// must already be in id order with consistent counts.
    pub fn from_regions(regions: Vec<Region>, total_points: usize, n_bits: usize) -> Result<Self> {
        if regions.is_empty() || total_points == 0 {
            return Err(Error::EmptyInput);
        }
        let mut index = HashMap::with_capacity(regions.len());
        let mut count_sum = 0usize;
        for (i, r) in regions.iter().enumerate() {
            if r.id as usize != i {
                return Err(Error::Malformed(format!(
                    "region ids must be dense and ordered; found {} at position {i}",
                    r.id
                )));
            }
            if r.pattern.len() != n_bits {
                return Err(Error::PatternLength {
                    expected: n_bits,
                    got: r.pattern.len(),
                });
            }
            if index.insert(r.pattern.clone(), r.id).is_some() {
                return Err(Error::Malformed(format!("duplicate pattern in region {}", r.id)));
            }
            count_sum += r.member_count;
        }
        if count_sum != total_points {
            return Err(Error::Malformed(format!(
                "member counts sum to {count_sum}, expected {total_points}"
            )));
        }
        Ok(Self {
            regions,
            index,
            total_points,
            n_bits,
        })
    }
}

/// Runs every input through the network and groups points by activation
/// pattern. Region ids follow first occurrence in input order, so the same
/// inputs always yield the same table.
pub fn extract_regions(
    params: &MlpParams,
    inputs: &InputSet,
    output_mode: OutputMode,
) -> Result<RegionTable> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (outputs, patterns) = forward_batch(params, inputs.points.view())?;
    let outputs = match output_mode {
        OutputMode::Raw => outputs,
        OutputMode::Softmax => softmax_rows(outputs.view()),
    };

    struct Acc {
        count: usize,
        centroid_sum: Array1<f64>,
        output_sum: Array1<f64>,
    }
    let mut index: HashMap<ActivationPattern, u32> = HashMap::new();
    let mut accs: Vec<Acc> = Vec::new();
    let mut order: Vec<ActivationPattern> = Vec::new();

    for (row, pattern) in patterns.into_iter().enumerate() {
        let id = *index.entry(pattern.clone()).or_insert_with(|| {
            accs.push(Acc {
                count: 0,
                centroid_sum: Array1::zeros(inputs.points.ncols()),
                output_sum: Array1::zeros(outputs.ncols()),
            });
            order.push(pattern);
            (accs.len() - 1) as u32
        });
        let acc = &mut accs[id as usize];
        acc.count += 1;
        acc.centroid_sum += &inputs.points.index_axis(Axis(0), row);
        acc.output_sum += &outputs.index_axis(Axis(0), row);
    }

    let total_points = inputs.len();
    let regions = order
        .into_iter()
        .zip(accs)
        .enumerate()
        .map(|(id, (pattern, acc))| {
            let inv = 1.0 / acc.count as f64;
            Region {
                id: id as u32,
                pattern,
                member_count: acc.count,
                mass: acc.count as f64 / total_points as f64,
                centroid: acc.centroid_sum * inv,
                mean_output: acc.output_sum * inv,
            }
        })
        .collect();
    Ok(RegionTable {
        regions,
        index,
        total_points,
        n_bits: params.config.hidden_units(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{forward, init_mlp, MlpConfig};
    use ndarray::{arr1, arr2};

    /// One hidden layer splitting the plane along both axes.
    fn quadrant_net() -> MlpParams {
        MlpParams {
            weights: vec![arr2(&[[1.0, 0.0], [0.0, 1.0]]), arr2(&[[1.0, 1.0]])],
            biases: vec![arr1(&[0.0, 0.0]), arr1(&[0.0])],
            config: MlpConfig::new(2, 1, 2, 1, 0),
        }
    }

    #[test]
    fn grid_two_by_two_is_the_four_corners() {
        let g = make_grid(2, -1.0, 1.0).unwrap();
        let expected = arr2(&[[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(g.points, expected);
    }

    #[test]
    fn grid_hits_endpoints_exactly() {
        let g = make_grid(100, -1.0, 1.0).unwrap();
        assert_eq!(g.len(), 10_000);
        let min = g.points.iter().copied().fold(f64::INFINITY, f64::min);
        let max = g.points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(min, -1.0);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn grid_odd_resolution_contains_center() {
        let g = make_grid(3, -1.0, 1.0).unwrap();
        assert_eq!(g.points.row(4), arr1(&[0.0, 0.0]));
    }

    #[test]
    fn grid_regenerates_identically_and_validates() {
        assert_eq!(make_grid(7, -0.5, 2.0).unwrap(), make_grid(7, -0.5, 2.0).unwrap());
        assert!(make_grid(1, -1.0, 1.0).is_err());
        assert!(make_grid(10, 1.0, -1.0).is_err());
        assert!(make_grid(10, 0.0, 0.0).is_err());
    }

    #[test]
    fn explicit_rejects_non_finite_points() {
        let mut pts = Array2::zeros((2, 2));
        pts[[1, 0]] = f64::NAN;
        assert!(InputSet::explicit(pts).is_err());
    }

    #[test]
    fn zero_network_has_one_region_of_full_mass() {
        let mut p = quadrant_net();
        for w in &mut p.weights {
            w.fill(0.0);
        }
        let table = extract_regions(&p, &make_grid(10, -1.0, 1.0).unwrap(), OutputMode::Raw).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.regions[0].mass, 1.0);
        assert_eq!(table.regions[0].member_count, 100);
    }

    #[test]
    fn quadrant_net_splits_even_grid_into_four_equal_regions() {
        let table = extract_regions(
            &quadrant_net(),
            &make_grid(100, -1.0, 1.0).unwrap(),
            OutputMode::Raw,
        )
        .unwrap();
        assert_eq!(table.len(), 4);
        for r in &table.regions {
            // resolution 100 has no grid line on either axis, so the
            // quadrants split the 10000 points exactly evenly
            assert_eq!(r.member_count, 2500);
            assert_eq!(r.mass, 0.25);
        }
        // first-occurrence order walks the grid from (-1,-1) with x1 fastest
        let bits = |r: &Region| (r.pattern.get(0), r.pattern.get(1));
        assert_eq!(bits(&table.regions[0]), (false, false));
        assert_eq!(bits(&table.regions[1]), (true, false));
        assert_eq!(bits(&table.regions[2]), (false, true));
        assert_eq!(bits(&table.regions[3]), (true, true));
    }

    #[test]
    fn masses_conserve_and_counts_sum() {
        let p = init_mlp(&MlpConfig::new(2, 3, 16, 2, 123)).unwrap();
        let table = extract_regions(&p, &make_grid(60, -1.0, 1.0).unwrap(), OutputMode::Raw).unwrap();
        let mass_sum: f64 = table.regions.iter().map(|r| r.mass).sum();
        assert!((mass_sum - 1.0).abs() < 1e-12);
        let count_sum: usize = table.regions.iter().map(|r| r.member_count).sum();
        assert_eq!(count_sum, table.total_points);
        assert!(table.regions.iter().all(|r| r.mass > 0.0));
    }

    #[test]
    fn centroids_are_member_means() {
        let table = extract_regions(
            &quadrant_net(),
            &make_grid(100, -1.0, 1.0).unwrap(),
            OutputMode::Raw,
        )
        .unwrap();
        // members of the (+,+) quadrant are the grid values > 0: 50 values
        // averaging (1/99 + 97/99/2)... easier: mean of v_i for i in 50..100
        let vals: Vec<f64> = (50..100).map(|i| -1.0 + 2.0 * i as f64 / 99.0).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let r = &table.regions[3];
        assert!((r.centroid[0] - mean).abs() < 1e-12);
        assert!((r.centroid[1] - mean).abs() < 1e-12);
    }

    #[test]
    fn softmax_mode_mean_outputs_are_distributions() {
        let p = init_mlp(&MlpConfig::new(2, 2, 8, 3, 9)).unwrap();
        let table = extract_regions(&p, &make_grid(30, -1.0, 1.0).unwrap(), OutputMode::Softmax).unwrap();
        for r in &table.regions {
            assert!((r.mean_output.sum() - 1.0).abs() < 1e-9);
            assert!(r.mean_output.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn lookup_round_trips_and_rejects_bad_lengths() {
        let p = init_mlp(&MlpConfig::new(2, 2, 6, 2, 33)).unwrap();
        let table = extract_regions(&p, &make_grid(25, -1.0, 1.0).unwrap(), OutputMode::Raw).unwrap();
        for r in &table.regions {
            assert_eq!(table.lookup(&r.pattern).unwrap(), Some(r.id));
        }
        let all_ones =
            ActivationPattern::from_bits(table.n_bits, vec![true; table.n_bits]).unwrap();
        if table.lookup(&all_ones).unwrap().is_some() {
            // possible in principle; the table must then contain it
            assert!(table.regions.iter().any(|r| r.pattern == all_ones));
        }
        let short = ActivationPattern::zeroed(3);
        assert!(table.lookup(&short).is_err());
    }

    #[test]
    fn extraction_is_reproducible() {
        let p = init_mlp(&MlpConfig::new(2, 2, 10, 2, 8)).unwrap();
        let grid = make_grid(40, -1.0, 1.0).unwrap();
        let a = extract_regions(&p, &grid, OutputMode::Raw).unwrap();
        let b = extract_regions(&p, &grid, OutputMode::Raw).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn more_points_never_means_fewer_regions() {
        let p = init_mlp(&MlpConfig::new(2, 2, 12, 2, 77)).unwrap();
        let mut prev = 0;
        for res in [5, 10, 20, 40] {
            let table = extract_regions(&p, &make_grid(res, -1.0, 1.0).unwrap(), OutputMode::Raw).unwrap();
            assert!(table.len() >= prev, "resolution {res} lost regions");
            prev = table.len();
        }
    }

    #[test]
    fn grid_midpoints_of_region_members_share_the_pattern() {
        // convexity of regions, restricted to midpoints that land on the grid
        let p = init_mlp(&MlpConfig::new(2, 2, 6, 2, 15)).unwrap();
        let grid = make_grid(21, -1.0, 1.0).unwrap();
        let (_, patterns) = forward_batch(&p, grid.points.view()).unwrap();
        // index grid points by (i1, i2)
        let res = 21usize;
        let mut checked = 0;
        for a in 0..grid.len() {
            for b in (a + 1)..grid.len().min(a + 200) {
                if patterns[a] != patterns[b] {
                    continue;
                }
                let (a1, a2) = (a % res, a / res);
                let (b1, b2) = (b % res, b / res);
                if (a1 + b1) % 2 != 0 || (a2 + b2) % 2 != 0 {
                    continue; // midpoint falls between grid lines
                }
                let mid = ((a2 + b2) / 2) * res + (a1 + b1) / 2;
                assert_eq!(patterns[mid], patterns[a], "points {a} and {b}");
                checked += 1;
            }
        }
        assert!(checked > 50, "too few on-grid midpoints exercised: {checked}");
    }

    #[test]
    fn empty_input_is_rejected() {
        let p = quadrant_net();
        let empty = InputSet::explicit(Array2::zeros((0, 2))).unwrap();
        assert!(matches!(
            extract_regions(&p, &empty, OutputMode::Raw),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn patterns_match_per_point_forward() {
        let p = init_mlp(&MlpConfig::new(2, 2, 5, 2, 44)).unwrap();
        let grid = make_grid(9, -1.0, 1.0).unwrap();
        let table = extract_regions(&p, &grid, OutputMode::Raw).unwrap();
        for row in 0..grid.len() {
            let (_, pat) = forward(&p, grid.points.row(row)).unwrap();
            assert!(table.lookup(&pat).unwrap().is_some());
        }
    }
}
