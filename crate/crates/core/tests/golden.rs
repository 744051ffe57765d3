//! Byte-for-byte format checks. Regenerate with `UPDATE_GOLDEN=1`.

mod support;

use std::fs;

use crossdistill::domaingen::{dataset_to_string, read_dataset};
use crossdistill::eval::read_metrics_csv;
use crossdistill::ranker::{checkpoint_from_str, checkpoint_to_string};
use support::golden::{augmented_dataset, checkpoint_model, golden_dir, rendered, reports};

fn golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    if expected != actual {
        let line = expected
            .lines()
            .zip(actual.lines())
            .position(|(a, b)| a != b)
            .map_or("length".to_string(), |i| format!("line {}", i + 1));
        panic!("{name} differs from golden at {line}; rerun with UPDATE_GOLDEN=1 if intended");
    }
}

#[test]
fn every_format_matches_its_golden_file() {
    for (name, text) in rendered() {
        golden(name, &text);
    }
}

#[test]
fn dataset_file_round_trips() {
    let text = augmented_dataset();
    let back = read_dataset(text.as_bytes()).unwrap();
    assert_eq!(dataset_to_string(&back).unwrap(), text);
}

#[test]
fn checkpoint_file_round_trips() {
    let model = checkpoint_model();
    let text = checkpoint_to_string(&model).unwrap();
    let back = checkpoint_from_str(&text).unwrap();
    assert_eq!(back, model);
    assert_eq!(checkpoint_to_string(&back).unwrap(), text);
}

#[test]
fn metrics_file_round_trips() {
    let text = crossdistill::eval::metrics_csv_string(&reports()).unwrap();
    assert_eq!(read_metrics_csv(text.as_bytes()).unwrap(), reports());
}
