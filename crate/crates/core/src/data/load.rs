use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use indexmap::IndexSet;

use crate::mtp::{FeatureMatrix, MtpDataset, ScoreType, Triplet};

use super::{DataError, DatasetBundle, FORMAT_VERSION};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BundlePaths {
    pub scores: Option<PathBuf>,
    pub instance_features: Option<PathBuf>,
    pub target_features: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

const TRIPLET_HEADER: [&str; 3] = ["instance_id", "target_id", "value"];

struct Cell {
    instance: String,
    target: String,
    value: f64,
    line: u64,
}

fn open(path: &Path) -> Result<csv::Reader<File>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        file: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> DataError {
    let line = e.position().map_or(0, |p| p.line());
    DataError::Parse {
        file: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

fn number(path: &Path, line: u64, column: &str, value: &str) -> Result<f64, DataError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| DataError::NonNumeric {
            file: path.to_path_buf(),
            line,
            column: column.to_string(),
            value: value.to_string(),
        })
}

/// Reads `instance_id,target_id,value` rows, or a dense matrix whose first
/// column holds instance ids and whose header names the targets. Empty
/// dense fields are unobserved cells.
fn read_scores(path: &Path) -> Result<Vec<Cell>, DataError> {
    let mut reader = open(path)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let triplet_form = header.len() == 3
        && header
            .iter()
            .zip(TRIPLET_HEADER)
            .all(|(h, want)| h.eq_ignore_ascii_case(want));
    if header.len() < 2 {
        return Err(DataError::Parse {
            file: path.to_path_buf(),
            line: 1,
            message: "score file needs an id column and at least one value column".into(),
        });
    }
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if triplet_form {
            cells.push(Cell {
                instance: record[0].to_string(),
                target: record[1].to_string(),
                value: number(path, line, "value", &record[2])?,
                line,
            });
        } else {
            for (col, field) in record.iter().enumerate().skip(1) {
                if field.is_empty() {
                    continue;
                }
                cells.push(Cell {
                    instance: record[0].to_string(),
                    target: header[col].clone(),
                    value: number(path, line, &header[col], field)?,
                    line,
                });
            }
        }
    }
    Ok(cells)
}

fn to_triplets(
    path: &Path,
    cells: &[Cell],
    instances: &IndexSet<String>,
    targets: &IndexSet<String>,
) -> Result<Vec<Triplet>, DataError> {
    let mut seen = HashSet::with_capacity(cells.len());
    cells
        .iter()
        .map(|c| {
            let i = instances
                .get_index_of(&c.instance)
                .expect("vocabulary built from cells");
            let j = targets.get_index_of(&c.target).expect("vocabulary built from cells");
            if !seen.insert((i, j)) {
                return Err(DataError::DuplicateCell {
                    file: path.to_path_buf(),
                    line: c.line,
                    instance: c.instance.clone(),
                    target: c.target.clone(),
                });
            }
            Ok(Triplet::new(i, j, c.value))
        })
        .collect()
}

/// Feature rows `id,f1,f2,...` ordered by the vocabulary.
fn read_features(path: &Path, vocab: &IndexSet<String>) -> Result<FeatureMatrix, DataError> {
    let mut reader = open(path)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 2 {
        return Err(DataError::Parse {
            file: path.to_path_buf(),
            line: 1,
            message: "feature file needs an id column and at least one feature".into(),
        });
    }
    let dim = header.len() - 1;
    let mut rows: HashMap<usize, Vec<f64>> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = &record[0];
        let idx = vocab.get_index_of(id).ok_or_else(|| DataError::UnknownId {
            file: path.to_path_buf(),
            line,
            id: id.to_string(),
        })?;
        let values = record
            .iter()
            .enumerate()
            .skip(1)
            .map(|(c, v)| number(path, line, &header[c], v))
            .collect::<Result<Vec<f64>, _>>()?;
        if rows.insert(idx, values).is_some() {
            return Err(DataError::Parse {
                file: path.to_path_buf(),
                line,
                message: format!("second feature row for id `{id}`"),
            });
        }
    }
    let mut values = Vec::with_capacity(vocab.len() * dim);
    for (i, id) in vocab.iter().enumerate() {
        let row = rows.get(&i).ok_or_else(|| DataError::MissingFeatures {
            file: path.to_path_buf(),
            id: id.clone(),
        })?;
        values.extend_from_slice(row);
    }
    Ok(FeatureMatrix::new(dim, values)?)
}

fn detect_score_type(triplets: &[Triplet]) -> ScoreType {
    if triplets.iter().all(|t| t.score == 0.0 || t.score == 1.0) {
        ScoreType::Binary
    } else {
        ScoreType::Real
    }
}

/// Loads a score file, optional side-information files, and an optional
/// test score file. Ids are numbered in order of first appearance over the
/// train then test scores.
pub fn load_bundle(
    scores: &Path,
    instance_features: Option<&Path>,
    target_features: Option<&Path>,
    test: Option<&Path>,
) -> Result<DatasetBundle, DataError> {
    let train_cells = read_scores(scores)?;
    let test_cells = test.map(read_scores).transpose()?;
    let all = train_cells.iter().chain(test_cells.iter().flatten());
    let mut instances = IndexSet::new();
    let mut targets = IndexSet::new();
    for c in all {
        instances.insert(c.instance.clone());
        targets.insert(c.target.clone());
    }
    let train_triplets = to_triplets(scores, &train_cells, &instances, &targets)?;
    let test_triplets = match (test, &test_cells) {
        (Some(p), Some(cells)) => Some(to_triplets(p, cells, &instances, &targets)?),
        _ => None,
    };
    let inst_features = instance_features.map(|p| read_features(p, &instances)).transpose()?;
    let targ_features = target_features.map(|p| read_features(p, &targets)).transpose()?;
    let score_type = detect_score_type(&train_triplets);
    let train = MtpDataset::new(
        instances.into_iter().collect(),
        targets.into_iter().collect(),
        inst_features,
        targ_features,
        train_triplets,
        score_type,
    )?;
    let test_set = test_triplets.map(|t| train.with_triplets(t));
    Ok(DatasetBundle {
        train,
        test: test_set,
        paths: BundlePaths {
            scores: Some(scores.to_path_buf()),
            instance_features: instance_features.map(Path::to_path_buf),
            target_features: target_features.map(Path::to_path_buf),
            test: test.map(Path::to_path_buf),
        },
        format_version: FORMAT_VERSION,
    })
}

fn create(path: &Path) -> Result<csv::Writer<File>, DataError> {
    let file = File::create(path).map_err(|source| DataError::Io {
        file: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Writer::from_writer(file))
}

fn io_err(path: &Path) -> impl Fn(csv::Error) -> DataError + '_ {
    move |e| DataError::Io {
        file: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn write_scores(path: &Path, d: &MtpDataset) -> Result<(), DataError> {
    let mut w = create(path)?;
    let err = io_err(path);
    w.write_record(TRIPLET_HEADER).map_err(&err)?;
    for t in &d.triplets {
        w.write_record([
            d.instance_ids[t.instance].as_str(),
            d.target_ids[t.target].as_str(),
            &t.score.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|source| DataError::Io {
        file: path.to_path_buf(),
        source,
    })
}

fn write_features(path: &Path, ids: &[String], f: &FeatureMatrix) -> Result<(), DataError> {
    let mut w = create(path)?;
    let err = io_err(path);
    let mut header = vec!["id".to_string()];
    header.extend((1..=f.dim()).map(|k| format!("f{k}")));
    w.write_record(&header).map_err(&err)?;
    for (i, id) in ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(f.row(i).iter().map(f64::to_string));
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|source| DataError::Io {
        file: path.to_path_buf(),
        source,
    })
}

/// Writes the bundle as `scores.csv`, optional `instance_features.csv`,
/// `target_features.csv` and `test.csv` in `dir`, returning their paths.
pub fn save_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<BundlePaths, DataError> {
    std::fs::create_dir_all(dir).map_err(|source| DataError::Io {
        file: dir.to_path_buf(),
        source,
    })?;
    let d = &bundle.train;
    let mut paths = BundlePaths {
        scores: Some(dir.join("scores.csv")),
        ..BundlePaths::default()
    };
    write_scores(paths.scores.as_deref().expect("set"), d)?;
    if let Some(f) = &d.instance_features {
        let p = dir.join("instance_features.csv");
        write_features(&p, &d.instance_ids, f)?;
        paths.instance_features = Some(p);
    }
    if let Some(f) = &d.target_features {
        let p = dir.join("target_features.csv");
        write_features(&p, &d.target_ids, f)?;
        paths.target_features = Some(p);
    }
    if let Some(test) = &bundle.test {
        let p = dir.join("test.csv");
        write_scores(&p, test)?;
        paths.test = Some(p);
    }
    let mut manifest = Vec::new();
    writeln!(manifest, "format_version={}", bundle.format_version).expect("in-memory write");
    std::fs::write(dir.join("bundle.txt"), manifest).map_err(|source| DataError::Io {
        file: dir.join("bundle.txt"),
        source,
    })?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn dense_file_skips_blank_cells() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "s.csv", "id,t1,t2\na,1,0\nb,,1\n");
        let b = load_bundle(&p, None, None, None).unwrap();
        assert_eq!(b.train.triplets.len(), 3);
        assert_eq!(b.train.target_ids, vec!["t1", "t2"]);
        assert_eq!(b.train.score_type, ScoreType::Binary);
    }

    #[test]
    fn duplicate_pair_names_the_cell() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "s.csv", "instance_id,target_id,value\na,x,1\na,x,2\n");
        match load_bundle(&p, None, None, None) {
            Err(DataError::DuplicateCell {
                line, instance, target, ..
            }) => {
                assert_eq!((line, instance.as_str(), target.as_str()), (3, "a", "x"));
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn feature_errors() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "s.csv", "instance_id,target_id,value\na,x,1.5\n");
        let unknown = write(dir.path(), "f.csv", "id,f1\na,0.1\nzz,0.2\n");
        assert!(matches!(
            load_bundle(&s, Some(&unknown), None, None),
            Err(DataError::UnknownId { line: 3, .. })
        ));
        let bad = write(dir.path(), "g.csv", "id,f1\na,abc\n");
        assert!(matches!(
            load_bundle(&s, Some(&bad), None, None),
            Err(DataError::NonNumeric { line: 2, .. })
        ));
        let missing = write(dir.path(), "h.csv", "id,f1\n");
        assert!(matches!(
            load_bundle(&s, None, Some(&missing), None),
            Err(DataError::MissingFeatures { .. })
        ));
    }
}
