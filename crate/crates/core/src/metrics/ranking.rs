use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{Direction, MetricError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Cumulative epoch-equivalents consumed.
    pub time: f64,
    /// Best validation loss so far.
    pub val_loss: f64,
    /// Headline test metric of the incumbent.
    pub test_metric: f64,
}

/// Incumbent over time: `time` strictly increasing, `val_loss` non-increasing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IncumbentTrajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl IncumbentTrajectory {
    pub fn new(points: Vec<TrajectoryPoint>) -> Result<Self, MetricError> {
        let t = Self { points };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<(), MetricError> {
        for w in self.points.windows(2) {
            if w[1].time <= w[0].time {
                return Err(MetricError::Trajectory("time must strictly increase".into()));
            }
            if w[1].val_loss > w[0].val_loss {
                return Err(MetricError::Trajectory("val_loss increased".into()));
            }
        }
        Ok(())
    }

    pub fn end_time(&self) -> Option<f64> {
        self.points.last().map(|p| p.time)
    }

    /// Step interpolation: the last point at or before `time`.
    pub fn at(&self, time: f64) -> Option<&TrajectoryPoint> {
        let idx = self.points.partition_point(|p| p.time <= time);
        idx.checked_sub(1).map(|i| &self.points[i])
    }

    pub fn final_point(&self) -> Option<&TrajectoryPoint> {
        self.points.last()
    }

    /// Pointwise mean of step functions, evaluated on the union of change
    /// points from the moment every trajectory has started.
    pub fn average(trajectories: &[IncumbentTrajectory]) -> Result<Self, MetricError> {
        if trajectories.is_empty() || trajectories.iter().any(|t| t.points.is_empty()) {
            return Err(MetricError::Empty);
        }
        let start = trajectories
            .iter()
            .map(|t| t.points[0].time)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut times: Vec<f64> = trajectories
            .iter()
            .flat_map(|t| t.points.iter().map(|p| p.time))
            .filter(|&t| t >= start)
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let k = trajectories.len() as f64;
        let points = times
            .into_iter()
            .map(|time| {
                let (mut val, mut test) = (0.0, 0.0);
                for t in trajectories {
                    let p = t.at(time).expect("started");
                    val += p.val_loss;
                    test += p.test_metric;
                }
                TrajectoryPoint {
                    time,
                    val_loss: val / k,
                    test_metric: test / k,
                }
            })
            .collect();
        Ok(Self { points })
    }

    pub fn write_csv<W: Write>(&self, method: &str, out: &mut W) -> io::Result<()> {
        for p in &self.points {
            writeln!(out, "{method},{},{},{}", p.time, p.val_loss, p.test_metric)?;
        }
        Ok(())
    }
}

pub const TRAJECTORY_CSV_HEADER: &str = "method,time,val_loss,test_metric";
pub const RANKING_CSV_HEADER: &str = "method,t,avg_rank";

/// All methods' trajectories on one dataset, with the direction of its metric.
#[derive(Debug, Clone)]
pub struct DatasetTrajectories {
    pub direction: Direction,
    pub methods: BTreeMap<String, IncumbentTrajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub methods: Vec<String>,
    /// Normalised time fractions.
    pub grid: Vec<f64>,
    /// `ranks[g][k]`: average rank of `methods[k]` at `grid[g]`.
    pub ranks: Vec<Vec<f64>>,
    /// Mean normalised end time per method.
    pub end_points: Vec<f64>,
}

impl RankingTable {
    pub fn rank_of(&self, method: &str, grid_index: usize) -> Option<f64> {
        let k = self.methods.iter().position(|m| m == method)?;
        Some(self.ranks[grid_index][k])
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{RANKING_CSV_HEADER}")?;
        for (k, m) in self.methods.iter().enumerate() {
            for (g, t) in self.grid.iter().enumerate() {
                writeln!(out, "{m},{t},{}", self.ranks[g][k])?;
            }
        }
        Ok(())
    }

    pub fn write_end_points_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "method,end_point")?;
        for (m, e) in self.methods.iter().zip(&self.end_points) {
            writeln!(out, "{m},{e}")?;
        }
        Ok(())
    }
}

/// Ranks with ties sharing the average of the positions they occupy. `None`
/// (not yet started) and NaN rank after every real value.
pub fn average_ranks(values: &[Option<f64>], direction: Direction) -> Vec<f64> {
    let key = |v: &Option<f64>| -> Option<f64> {
        match v {
            Some(x) if !x.is_nan() => Some(match direction {
                Direction::HigherIsBetter => -x,
                Direction::LowerIsBetter => *x,
            }),
            _ => None,
        }
    };
    let keys: Vec<Option<f64>> = values.iter().map(key).collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| match (keys[a], keys[b]) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && keys[order[end]] == keys[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Average rank of each method across datasets at every normalised time
/// fraction `k / resolution`, `k = 1..=resolution`.
pub fn rank_over_time(
    datasets: &BTreeMap<String, DatasetTrajectories>,
    resolution: usize,
) -> Result<RankingTable, MetricError> {
    let first = datasets.values().next().ok_or(MetricError::Empty)?;
    let methods: Vec<String> = first.methods.keys().cloned().collect();
    if methods.len() < 2 {
        return Err(MetricError::Ranking("need at least two methods".into()));
    }
    let resolution = resolution.max(1);
    let grid: Vec<f64> = (1..=resolution).map(|k| k as f64 / resolution as f64).collect();
    let mut ranks = vec![vec![0.0; methods.len()]; grid.len()];
    let mut end_points = vec![0.0; methods.len()];

    for (name, data) in datasets {
        let trajs: Vec<&IncumbentTrajectory> = methods
            .iter()
            .map(|m| {
                data.methods
                    .get(m)
                    .ok_or_else(|| MetricError::Ranking(format!("dataset {name} lacks method {m}")))
            })
            .collect::<Result<_, _>>()?;
        if data.methods.len() != methods.len() {
            return Err(MetricError::Ranking(format!(
                "dataset {name} has a different method set"
            )));
        }
        let ends: Vec<f64> = trajs
            .iter()
            .map(|t| t.end_time().ok_or(MetricError::Empty))
            .collect::<Result<_, _>>()?;
        let max_end = ends.iter().copied().fold(0.0, f64::max);
        if max_end <= 0.0 {
            return Err(MetricError::Ranking(format!("dataset {name} has zero runtime")));
        }
        for (k, e) in ends.iter().enumerate() {
            end_points[k] += e / max_end;
        }
        for (g, &t) in grid.iter().enumerate() {
            // small slack so a point landing exactly on a grid line counts
            let cutoff = t * max_end * (1.0 + 1e-12);
            let values: Vec<Option<f64>> = trajs.iter().map(|tr| tr.at(cutoff).map(|p| p.test_metric)).collect();
            for (k, r) in average_ranks(&values, data.direction).into_iter().enumerate() {
                ranks[g][k] += r;
            }
        }
    }
    let n = datasets.len() as f64;
    for row in &mut ranks {
        for r in row.iter_mut() {
            *r /= n;
        }
    }
    for e in &mut end_points {
        *e /= n;
    }
    Ok(RankingTable {
        methods,
        grid,
        ranks,
        end_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(points: &[(f64, f64)]) -> IncumbentTrajectory {
        IncumbentTrajectory {
            points: points
                .iter()
                .enumerate()
                .map(|(i, &(time, test_metric))| TrajectoryPoint {
                    time,
                    val_loss: 1.0 / (i + 1) as f64,
                    test_metric,
                })
                .collect(),
        }
    }

    #[test]
    fn average_ranks_with_ties() {
        let r = average_ranks(&[Some(0.5), Some(0.9), Some(0.5), None], Direction::HigherIsBetter);
        assert_eq!(r, vec![2.5, 1.0, 2.5, 4.0]);
        let r = average_ranks(&[None, None], Direction::LowerIsBetter);
        assert_eq!(r, vec![1.5, 1.5]);
    }

    #[test]
    fn dominating_method_ranks_first() {
        let mut methods = BTreeMap::new();
        methods.insert("a".into(), traj(&[(1.0, 0.9), (10.0, 0.95)]));
        methods.insert("b".into(), traj(&[(1.0, 0.5), (10.0, 0.6)]));
        let mut ds = BTreeMap::new();
        ds.insert(
            "d".into(),
            DatasetTrajectories {
                direction: Direction::HigherIsBetter,
                methods,
            },
        );
        let table = rank_over_time(&ds, 100).unwrap();
        // neither has a point before 10% of the run
        for g in 0..9 {
            assert_eq!(table.rank_of("a", g), Some(1.5));
        }
        for g in 9..100 {
            assert_eq!(table.rank_of("a", g), Some(1.0));
        }
    }

    #[test]
    fn identical_methods_tie() {
        let mut methods = BTreeMap::new();
        methods.insert("a".into(), traj(&[(1.0, 0.3)]));
        methods.insert("b".into(), traj(&[(1.0, 0.3)]));
        let mut ds = BTreeMap::new();
        ds.insert(
            "d".into(),
            DatasetTrajectories {
                direction: Direction::LowerIsBetter,
                methods,
            },
        );
        let table = rank_over_time(&ds, 10).unwrap();
        assert!(table.ranks.iter().all(|row| row == &vec![1.5, 1.5]));
    }

    #[test]
    fn average_trajectory_uses_union_of_times() {
        let a = traj(&[(1.0, 0.2), (3.0, 0.6)]);
        let b = traj(&[(2.0, 0.4), (4.0, 0.8)]);
        let avg = IncumbentTrajectory::average(&[a, b]).unwrap();
        let times: Vec<f64> = avg.points.iter().map(|p| p.time).collect();
        assert_eq!(times, vec![2.0, 3.0, 4.0]);
        let metrics: Vec<f64> = avg.points.iter().map(|p| p.test_metric).collect();
        for (got, want) in metrics.iter().zip([0.3, 0.5, 0.7]) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
